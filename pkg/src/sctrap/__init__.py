"""Design and power-budget toolkit for superconducting ion-trap chips."""

__version__ = "0.1.0"
