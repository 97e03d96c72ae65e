"""Near-duplicate auditing and duplicate-free splitting for license-plate datasets."""

__version__ = "0.1.0"
