"""Hub capacity deployment under demand and disruption uncertainty."""

__version__ = "0.1.0"
