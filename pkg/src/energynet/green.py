"""Green operator ``G f = (I - P)^-1 (f / c)`` on wired truncations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from energynet.errors import DomainError, NumericalError
from energynet.functions import VertexFunction, values_of
from energynet.graph_core import Truncation
from energynet.kernels import _checked, _factor, _wired_solver
from energynet.operators import _cache, assemble_transition, degrees, energy, laplacian_apply


def _resolvent(trunc: Truncation):
    if not trunc.wired:
        raise DomainError("(I - P) is singular without grounding: use a wired truncation")
    if not trunc.boundary:
        raise NumericalError("(I - P) is singular: the wired truncation has an empty boundary")
    store = _cache(trunc)
    if "resolvent" not in store:
        P = assemble_transition(trunc).matrix
        A = (sp.identity(trunc.n, format="csr") - P).tocsr()
        store["resolvent"] = (A, _factor(A))
    return store["resolvent"]


def green_apply(trunc: Truncation, f) -> VertexFunction:
    """Solve ``(I - P) g = f / c`` and cross-check it against ``L g = f``.

    Both systems are solved; a relative disagreement above 1e-8 raises
    :class:`NumericalError`.
    """
    ff = values_of(trunc, f)
    A, lu = _resolvent(trunc)
    rhs = ff / degrees(trunc)
    g = _checked(A, lu.solve(rhs), rhs)
    L, lu_L = _wired_solver(trunc)
    g_alt = _checked(L, lu_L.solve(ff), ff)
    gap = np.abs(g - g_alt).max(initial=0.0)
    if gap > 1e-8 * max(np.abs(g).max(initial=0.0), 1e-300):
        raise NumericalError(f"(I - P) and Laplacian formulations disagree by {gap:.3g}")
    return VertexFunction(trunc, g)


@dataclass
class GreenDefectReport:
    defect_residual: float  # max |(L + I) f| / (c(x) |f|)
    harmonic_residual: float  # max |L(f + Gf)| / (c(x) |f + Gf|)
    identity_gap: float  # max |L(f + Gf) - (Lf + f)| / (c(x) |f + Gf|)
    vertices: tuple
    green_energy: float
    neumann_errors: np.ndarray  # |S_n - (f + Gf)|_inf, n = 0, 1, ...


def _scaled_max(values, scale, trunc, idx):
    if not len(idx):
        return 0.0
    c = degrees(trunc)[idx]
    return float(np.max(np.abs(values[idx]) / (c * scale)))


def green_defect_check(trunc: Truncation, f, vertices=None, iterations: int = 200) -> GreenDefectReport:
    """Residuals of the defect equation for ``f`` and of harmonicity for ``f + Gf``.

    Residuals are taken over ``vertices`` (default: vertices at distance at
    least 2 from the boundary) and scaled by ``c(x)`` times the sup norm of
    the function involved.  ``neumann_errors`` tracks the partial sums
    ``S_n = f + sum_{k<n} P^k (f/c)``, which coincide with ``P^n f`` when f
    is a defect vector and converge to ``f + Gf``; P is substochastic, so
    the sup-norm errors never increase.
    """
    ff = values_of(trunc, f)
    if not np.any(ff):
        raise DomainError("f must be nonzero")
    vertices = trunc.inner_vertices() if vertices is None else tuple(vertices)
    idx = np.array([trunc.index[x] for x in vertices], dtype=int)
    g = green_apply(trunc, ff).values
    h = ff + g
    Lf = laplacian_apply(trunc, ff).values
    Lh = laplacian_apply(trunc, h).values
    hscale = max(np.abs(h).max(), 1e-300)
    r1 = _scaled_max(Lf + ff, np.abs(ff).max(), trunc, idx)
    r2 = _scaled_max(Lh, hscale, trunc, idx)
    gap = float(np.max(np.abs(Lh - (Lf + ff)) / (degrees(trunc) * hscale)))

    P = assemble_transition(trunc).matrix
    step = ff / degrees(trunc)
    partial = ff.copy()
    errors = [np.abs(partial - h).max()]
    for _ in range(iterations):
        partial = partial + step
        step = P @ step
        errors.append(np.abs(partial - h).max())
    return GreenDefectReport(r1, r2, gap, vertices, energy(trunc, g), np.array(errors))
