"""fks3d: parallel Fast Kinetic Scheme solver for the 3D x 3D kinetic equation."""

__version__ = "0.1.0"
