"""Mixed Killing vector fields and almost coKahler structures, checked numerically."""

__version__ = "0.1.0"
