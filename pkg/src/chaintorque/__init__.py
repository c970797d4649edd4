"""chaintorque: train-track style graph maps, Nielsen 1-chain certificates,
chain flare scans and L2-torsion estimation for free-by-cyclic groups."""

from chaintorque._wordops import IMPLEMENTATION as kernel_implementation

__version__ = "0.1.0"

__all__ = ["kernel_implementation", "__version__"]
