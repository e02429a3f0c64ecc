"""Simulation laboratory for Set Disjointness on a line and delay-d query algorithms."""
__version__ = "0.1.0"
