"""Multi-agent power control game driven by network intents."""

__version__ = "0.1.0"
