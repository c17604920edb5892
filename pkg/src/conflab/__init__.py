"""Conformal measures and KMS states for homeomorphisms of compact spaces."""

__version__ = "0.1.0"
