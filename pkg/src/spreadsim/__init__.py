"""Discrete-element simulator for roller- and blade-based spreading of
cohesive metal powders, with a spatially resolved packing-fraction layer
quality metric."""

__version__ = "0.1.0"
