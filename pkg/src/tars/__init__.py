"""Joint TCP flow routing and Transport Assistant placement."""

__version__ = "0.1.0"
