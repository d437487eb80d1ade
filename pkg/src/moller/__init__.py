"""Extended Moller operator deformations of free scalar fields, on lattices and in mode space."""

__version__ = "0.1.0"
