"""Hybrid approximate linear programming for hybrid factored MDPs."""

__version__ = "0.1.0"
