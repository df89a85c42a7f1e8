"""Bound states of prescribed mass for supercritical NLS on compact metric graphs."""
__version__ = "0.1.0"
