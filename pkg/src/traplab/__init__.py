"""Analytic modelling of surface-electrode RF traps and their ion crystals."""
__version__ = "0.1.0"
