"""Design toolkit for III-V-on-diamond quantum photonic nodes."""

__version__ = "0.1.0"
