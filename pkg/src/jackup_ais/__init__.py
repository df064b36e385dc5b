"""Installation-campaign decomposition from jackup-vessel AIS tracks."""

__version__ = "0.1.0"
