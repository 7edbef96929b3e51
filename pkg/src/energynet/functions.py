"""Real-valued functions on the interior of a truncation."""

from __future__ import annotations

import numpy as np

from energynet.errors import DomainError
from energynet.graph_core import Truncation


class VertexFunction:
    """Values on the interior vertices of ``trunc``, in ``trunc.interior`` order.

    Wired truncations read every vertex outside the interior as 0.  On free
    truncations a function stands for its class modulo constants whenever it
    is used as an element of the energy space; :meth:`anchored` picks the
    representative vanishing at a given vertex.
    """

    __slots__ = ("trunc", "values")

    def __init__(self, trunc: Truncation, values):
        values = np.array(values, dtype=float)
        if values.shape != (trunc.n,):
            raise DomainError(f"expected {trunc.n} values, got shape {values.shape}")
        self.trunc = trunc
        self.values = values

    @classmethod
    def zeros(cls, trunc):
        return cls(trunc, np.zeros(trunc.n))

    @classmethod
    def delta(cls, trunc, x):
        f = cls.zeros(trunc)
        try:
            f.values[trunc.index[x]] = 1.0
        except KeyError:
            raise DomainError(f"{x!r} is not an interior vertex") from None
        return f

    @classmethod
    def from_callable(cls, trunc, fn):
        return cls(trunc, [fn(x) for x in trunc.interior])

    def __getitem__(self, x) -> float:
        i = self.trunc.index.get(x)
        if i is None:
            if self.trunc.wired and x in self.trunc.base:
                return 0.0
            raise DomainError(f"{x!r} is not an interior vertex")
        return float(self.values[i])

    def anchored(self, anchor=None) -> "VertexFunction":
        """Representative with value 0 at ``anchor`` (default: the origin)."""
        anchor = self.trunc.origin if anchor is None else anchor
        return VertexFunction(self.trunc, self.values - self[anchor])

    def on(self, trunc: Truncation) -> "VertexFunction":
        """Same values read off on another truncation of the same network."""
        return VertexFunction(trunc, [self[x] for x in trunc.interior])

    def restrict(self, vertices) -> "VertexFunction":
        """Copy that keeps values only on ``vertices``, zero elsewhere."""
        keep = np.zeros(self.trunc.n, dtype=bool)
        for x in vertices:
            keep[self.trunc.index[x]] = True
        return VertexFunction(self.trunc, np.where(keep, self.values, 0.0))

    def as_dict(self) -> dict:
        return dict(zip(self.trunc.interior, self.values.tolist()))

    def _other(self, other):
        if isinstance(other, VertexFunction):
            check_same(self.trunc, other.trunc)
            return other.values
        return other

    def __add__(self, other):
        return VertexFunction(self.trunc, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return VertexFunction(self.trunc, self.values - self._other(other))

    def __rsub__(self, other):
        return VertexFunction(self.trunc, self._other(other) - self.values)

    def __mul__(self, scalar):
        return VertexFunction(self.trunc, self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return VertexFunction(self.trunc, self.values / scalar)

    def __neg__(self):
        return VertexFunction(self.trunc, -self.values)

    def __repr__(self):
        return f"VertexFunction(n={self.trunc.n}, mode={self.trunc.mode.value})"


def check_same(a: Truncation, b: Truncation):
    if a is b:
        return
    if a.interior != b.interior or a.mode != b.mode or a.boundary != b.boundary:
        raise DomainError("vertex functions live on different truncations")


def values_of(trunc: Truncation, u) -> np.ndarray:
    """Coordinate vector of ``u`` (a VertexFunction or array) on ``trunc``."""
    if isinstance(u, VertexFunction):
        check_same(trunc, u.trunc)
        return u.values
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return np.full(trunc.n, float(arr))
    if arr.shape != (trunc.n,):
        raise DomainError(f"expected {trunc.n} values, got shape {arr.shape}")
    return arr
