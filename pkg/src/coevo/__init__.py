"""Joint spread of interest and content in mobile opportunistic networks."""

__version__ = "0.1.0"
