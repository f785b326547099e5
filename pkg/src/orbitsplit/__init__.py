"""Energy-aware CU/DU split and placement for hybrid satellite/HAPS/gateway O-RAN."""

__version__ = "0.1.0"
