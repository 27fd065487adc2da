"""Parameter triple (a, b, c) of the vector field family."""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import FLOAT_EPS, ExactComplex, parse_scalar


@dataclass(frozen=True)
class Params:
    """Complex parameters ``(a, b, c)``.

    All three are either :class:`ExactComplex` (exact mode) or ``complex``
    (float mode); use :meth:`of` to build a consistent triple.
    """

    a: object
    b: object
    c: object

    @classmethod
    def of(cls, a, b, c, exact: bool | None = None) -> Params:
        if exact is None:
            exact = not any(isinstance(v, (float, complex)) for v in (a, b, c))
        return cls(*(parse_scalar(v, exact) for v in (a, b, c)))

    @property
    def exact(self) -> bool:
        return all(isinstance(v, ExactComplex) for v in (self.a, self.b, self.c))

    @property
    def mode(self) -> str:
        return "exact" if self.exact else "float"

    @property
    def eps(self) -> float:
        """Rounding unit of the arithmetic in use (0 in exact mode)."""
        return 0.0 if self.exact else FLOAT_EPS

    def to_float(self) -> Params:
        return Params(complex(self.a), complex(self.b), complex(self.c))

    def to_exact(self) -> Params:
        return Params(*(parse_scalar(v, True) for v in (self.a, self.b, self.c)))

    def as_complex(self) -> tuple[complex, complex, complex]:
        return complex(self.a), complex(self.b), complex(self.c)

    @property
    def diagonal(self) -> bool:
        return not self.b and not self.c

    def __str__(self):
        def fmt(v):
            if isinstance(v, ExactComplex):
                return str(v)
            v = complex(v)
            return f"{v.real:g}" if v.imag == 0 else f"{v.real:g}{v.imag:+g}i"

        return f"({fmt(self.a)}, {fmt(self.b)}, {fmt(self.c)})"
