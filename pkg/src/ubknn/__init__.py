"""Under-bagging k-nearest-neighbour classification for imbalanced data."""

__version__ = "0.1.0"
