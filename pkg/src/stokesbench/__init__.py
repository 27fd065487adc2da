"""Formal normal forms, Stokes matrices and first integrals for the family

    X_{a,b,c} = x^2 d/dx + (1+ax)(y1 d/dy1 - y2 d/dy2) + b x y2 d/dy1 + c x y1 d/dy2.
"""

__version__ = "0.1.0"

from .params import Params  # noqa: E402

__all__ = ["Params", "__version__"]
