"""Semiclassical entanglement and chaos quantifiers for collective spin models."""
__version__ = "0.1.0"
