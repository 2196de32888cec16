"""Measurement-postulate simulator: Lüders vs von Neumann, EPR and time-window CHSH."""

__version__ = "0.1.0"
