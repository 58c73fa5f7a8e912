"""Numerical toolkit for concave operators, their 2-isometric liftings and
Cauchy duals, realized on truncated towers of Hilbert spaces."""

__version__ = "0.1.0"
