"""Linear-optical teleportation with a standard or ancilla-boosted Bell measurement."""

__version__ = "0.1.0"
