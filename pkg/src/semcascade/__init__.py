"""Two-stage semantically decomposed detection with MAC-level cost accounting."""

__version__ = "0.1.0"
