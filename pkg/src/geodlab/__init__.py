"""geodlab: desk-scale laboratory for geodesic flows on hyperbolic surfaces."""

__version__ = "0.1.0"
