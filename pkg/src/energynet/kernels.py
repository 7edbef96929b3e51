"""Energy kernel (dipoles), monopoles and the identities they satisfy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from energynet.errors import DomainError, NumericalError
from energynet.functions import VertexFunction, values_of
from energynet.graph_core import Truncation
from energynet.operators import _cache, assemble_laplacian, edge_arrays, energy, incidence

# post-solve sanity bound, relative to |L| |x| + |rhs|
_SOLVE_RTOL = 1e-8


def _factor(matrix):
    try:
        with np.errstate(all="raise"):
            return spla.splu(matrix.tocsc())
    except (RuntimeError, FloatingPointError) as exc:
        raise NumericalError(f"singular system: {exc}") from exc


def _checked(matrix, sol, rhs):
    if not np.all(np.isfinite(sol)):
        raise NumericalError("solve produced non-finite values")
    res = np.abs(matrix @ sol - rhs).max(axis=0)
    scale = abs(matrix).sum(axis=1).max() * np.abs(sol).max(axis=0) + np.abs(rhs).max(axis=0)
    if np.any(res > _SOLVE_RTOL * scale):
        raise NumericalError(f"linear solve residual {np.max(res):.3g} too large")
    return sol


def _grounded_solver(trunc: Truncation):
    """Factor of the Laplacian with the origin's row and column removed."""
    store = _cache(trunc)
    if "grounded" not in store:
        o = trunc.index.get(trunc.origin)
        if o is None:
            raise DomainError(f"origin {trunc.origin!r} is not an interior vertex")
        keep = np.array([i for i in range(trunc.n) if i != o], dtype=int)
        L = assemble_laplacian(trunc).matrix
        sub = L[keep][:, keep]
        store["grounded"] = (keep, sub, _factor(sub) if keep.size else None)
    return store["grounded"]


def _wired_solver(trunc: Truncation):
    if not trunc.wired:
        raise DomainError(
            "monopoles need a wired truncation: on a finite free network "
            "Lw = delta_x has no solution (constants span the kernel), and on "
            "the infinite network they exist only when the walk is transient"
        )
    if not trunc.boundary:
        raise NumericalError("wired truncation has an empty boundary, nothing is grounded")
    store = _cache(trunc)
    if "wired" not in store:
        L = assemble_laplacian(trunc).matrix
        store["wired"] = (L, _factor(L))
    return store["wired"]


def solve_dipole(trunc: Truncation, x) -> VertexFunction:
    """Kernel element ``v_x``: solves ``L v = delta_x - delta_o`` with ``v(o) = 0``."""
    if trunc.wired:
        raise DomainError("dipoles are computed on free truncations")
    if x not in trunc.index:
        raise DomainError(f"{x!r} is not an interior vertex")
    return VertexFunction(trunc, _dipole_columns(trunc, [trunc.index[x]])[:, 0])


def _dipole_columns(trunc, cols):
    keep, sub, lu = _grounded_solver(trunc)
    o = trunc.index[trunc.origin]
    out = np.zeros((trunc.n, len(cols)))
    if lu is None:
        return out
    pos = {i: k for k, i in enumerate(keep)}
    rhs = np.zeros((keep.size, len(cols)))
    for c, i in enumerate(cols):
        if i != o:
            rhs[pos[i], c] = 1.0
    # with v(o) = 0 the rows of delta_x - delta_o away from o reduce to delta_x
    sol = _checked(sub, lu.solve(rhs), rhs)
    out[keep] = sol
    return out


def solve_monopole(trunc: Truncation, x) -> VertexFunction:
    """Monopole ``w_x``: solves ``L w = delta_x`` with the boundary grounded."""
    if x not in trunc.index:
        raise DomainError(f"{x!r} is not an interior vertex")
    return VertexFunction(trunc, _monopole_columns(trunc, [trunc.index[x]])[:, 0])


def _monopole_columns(trunc, cols):
    L, lu = _wired_solver(trunc)
    rhs = np.zeros((trunc.n, len(cols)))
    rhs[cols, np.arange(len(cols))] = 1.0
    return _checked(L, lu.solve(rhs), rhs)


@dataclass(frozen=True)
class KernelFamily:
    """Dipoles ``v_x`` for every interior ``x``; column ``i`` is ``v`` at ``interior[i]``."""

    trunc: Truncation
    matrix: np.ndarray

    def __getitem__(self, x) -> VertexFunction:
        return VertexFunction(self.trunc, self.matrix[:, self.trunc.index[x]])

    @property
    def members(self) -> dict:
        return {x: self[x] for x in self.trunc.interior}

    def basis_vertices(self) -> tuple:
        """Vertices whose kernel elements form a basis (all but the origin)."""
        return tuple(x for x in self.trunc.interior if x != self.trunc.origin)


@dataclass(frozen=True)
class MonopoleFamily:
    """Monopoles ``w_x`` on a wired truncation; column ``i`` is ``w`` at ``interior[i]``."""

    trunc: Truncation
    matrix: np.ndarray

    def __getitem__(self, x) -> VertexFunction:
        return VertexFunction(self.trunc, self.matrix[:, self.trunc.index[x]])

    @property
    def members(self) -> dict:
        return {x: self[x] for x in self.trunc.interior}

    def basis_vertices(self) -> tuple:
        return self.trunc.interior


def energy_kernel(trunc: Truncation) -> KernelFamily:
    if trunc.wired:
        raise DomainError("the energy kernel is computed on free truncations")
    return KernelFamily(trunc, _dipole_columns(trunc, list(range(trunc.n))))


def monopoles(trunc: Truncation) -> MonopoleFamily:
    return MonopoleFamily(trunc, _monopole_columns(trunc, list(range(trunc.n))))


def reproducing_residual(trunc: Truncation, v_x, u, x) -> float:
    """``|E(v_x, u) - (u(x) - u(o))|`` for the kernel element at ``x``."""
    vx = values_of(trunc, v_x)
    uu = values_of(trunc, u)
    o = trunc.index[trunc.origin]
    return abs(energy(trunc, vx, uu) - (uu[trunc.index[x]] - uu[o]))


def reproducing_residuals(trunc: Truncation, kernel: KernelFamily, u) -> np.ndarray:
    """``E(v_x, u) - (u(x) - u(o))`` for every interior ``x`` at once."""
    uu = values_of(trunc, u)
    B, wt = incidence(trunc)
    lhs = (B @ kernel.matrix).T @ (wt * (B @ uu))
    return lhs - (uu - uu[trunc.index[trunc.origin]])


def delta_from_kernel(trunc: Truncation, x, kernel: KernelFamily) -> VertexFunction:
    """``c(x) v_x - sum_y c_xy v_y``, which is ``delta_x`` modulo constants."""
    nbrs = trunc.base.neighbors(x)
    if any(y not in trunc.index for y, _ in nbrs):
        raise DomainError(f"a neighbor of {x!r} lies outside the interior")
    out = trunc.degree(x) * kernel[x].values
    for y, w in nbrs:
        out = out - w * kernel[y].values
    return VertexFunction(trunc, out)


def frame_coefficients(trunc: Truncation, kernel: KernelFamily, u):
    """Frame coefficients over the undirected interior edges.

    Returns ``(via_energy, direct)``: ``E(sqrt(c_xy)(v_x - v_y), u)`` computed
    with the energy form, and ``sqrt(c_xy)(u(x) - u(y))``.
    """
    uu = values_of(trunc, u)
    head, tail, wt = _interior_edges(trunc)
    B, w_all = incidence(trunc)
    prod = (B @ kernel.matrix).T @ (w_all * (B @ uu))  # E(v_x, u) for every x
    root = np.sqrt(wt)
    via_energy = root * (prod[head] - prod[tail])
    direct = root * (uu[head] - uu[tail])
    return via_energy, direct


def _interior_edges(trunc):
    head, tail, wt = edge_arrays(trunc)
    inner = tail >= 0
    return head[inner], tail[inner], wt[inner]


def parseval_check(trunc: Truncation, kernel: KernelFamily, u) -> tuple[float, float]:
    """``(sum_edges |<u, sqrt(c_xy)(v_x - v_y)>_E|^2, E(u, u))``."""
    via_energy, _ = frame_coefficients(trunc, kernel, u)
    return float(np.dot(via_energy, via_energy)), energy(trunc, u)
