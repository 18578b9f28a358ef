"""Finite-element simulator for the unsteady p-Laplace thermistor system."""

__version__ = "0.1.0"
