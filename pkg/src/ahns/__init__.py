"""Matrix-factorisation BPR training with adaptive-hardness negative sampling."""

__version__ = "0.1.0"
