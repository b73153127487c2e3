"""Deep and standard radiomic texture features with survival analysis."""

__version__ = "0.1.0"
