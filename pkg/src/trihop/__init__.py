"""trihop: three-legged hopper simulation and learning stack."""

__version__ = "0.1.0"
