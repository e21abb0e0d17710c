# Bismut formulas for path-distribution dependent SDEs
__version__ = "0.1.0"
