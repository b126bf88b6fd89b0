"""Joint sparse recovery from distributed measurements with SOMP variants."""

__version__ = "0.1.0"
