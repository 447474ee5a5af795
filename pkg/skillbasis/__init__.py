"""skillbasis: skill discovery, compositional policies and reward recovery from demonstrations."""

__version__ = "0.0.1"
