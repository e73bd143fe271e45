"""Travel-time laws and picker waiting times for carousel order picking."""

__version__ = "0.1.0"
