"""Finite-energy harmonic functions, defect vectors and the Royden splitting."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from energynet.errors import DomainError, NumericalError
from energynet.functions import VertexFunction, values_of
from energynet.graph_core import Mode, Network, Truncation, make_geometric_integers, truncate, whole
from energynet.operators import assemble_laplacian, assemble_transition, energy, energy_gram, laplacian_apply


def _require_transient(c):
    if not c > 1:
        raise DomainError(f"c = {c}: for c <= 1 the only finite-energy harmonic functions are constants")


def harmonic_value(c: float, n: int) -> float:
    """``sgn(n) (1 - c^-|n|)``."""
    return float(np.sign(n)) * (1.0 - float(c) ** (-abs(n)))


def geometric_harmonic(c: float, N: int | None = None, trunc: Truncation | None = None) -> VertexFunction:
    """The harmonic function of finite energy on the geometric integers.

    Evaluated on ``trunc`` when given, otherwise on the whole free network
    ``make_geometric_integers(c, N)``.
    """
    _require_transient(c)
    if trunc is None:
        if N is None:
            raise DomainError("give N or a truncation")
        trunc = whole(make_geometric_integers(c, N))
    return VertexFunction.from_callable(trunc, lambda n: harmonic_value(c, n))


# -- trees -----------------------------------------------------------------

@dataclass(frozen=True)
class RayPair:
    """Two rays leaving ``base`` away from the root, disjoint except at ``base``."""

    base: str
    plus: tuple
    minus: tuple

    @classmethod
    def from_directions(cls, base: str, length: int, plus_dir: str | None = None, minus_dir: str | None = None):
        """Rays ``base + plus_dir[:n]`` and ``base + minus_dir[:n]``, ``n <= length``.

        Directions default to all zeros and all ones.
        """
        plus_dir = "0" * length if plus_dir is None else plus_dir
        minus_dir = "1" * length if minus_dir is None else minus_dir
        if len(plus_dir) < length or len(minus_dir) < length:
            raise DomainError("direction strings shorter than the ray length")
        plus = tuple(base + plus_dir[:n] for n in range(length + 1))
        minus = tuple(base + minus_dir[:n] for n in range(length + 1))
        return cls(base, plus, minus)

    def validate(self, net: Network):
        for ray in (self.plus, self.minus):
            if not ray or ray[0] != self.base:
                raise DomainError("rays must start at the base vertex")
            for n, z in enumerate(ray):
                if z not in net:
                    raise DomainError(f"ray vertex {z!r} not in the tree")
                if len(z) != len(self.base) + n:
                    raise DomainError(f"ray vertex {z!r} is not at depth |base| + {n}")
                if n and net.conductance(z, ray[n - 1]) <= 0:
                    raise DomainError(f"ray vertices {ray[n - 1]!r} and {z!r} are not adjacent")
        if set(self.plus[1:]) & set(self.minus[1:]) or len(self.plus) > 1 and len(self.minus) > 1 and self.plus[1] == self.minus[1]:
            raise DomainError("rays must be disjoint except at the base")

    def labels(self) -> dict:
        """Ray vertex -> signed position (``+n`` on the plus ray, ``-n`` on the minus ray)."""
        out = {z: n for n, z in enumerate(self.plus)}
        out.update({z: -n for n, z in enumerate(self.minus)})
        return out


def _extend_from_rays(trunc: Truncation, ray_values: dict) -> np.ndarray:
    """Give every interior vertex the value of its nearest ray vertex."""
    vals = np.full(trunc.n, np.nan)
    queue = deque()
    for z, val in ray_values.items():
        if z in trunc.index:
            vals[trunc.index[z]] = val
            queue.append(z)
    if not queue:
        raise DomainError("no ray vertex lies in the truncation")
    while queue:
        x = queue.popleft()
        vx = vals[trunc.index[x]]
        for y, _ in trunc.neighbors(x):
            j = trunc.index.get(y)
            if j is not None and np.isnan(vals[j]):
                vals[j] = vx
                queue.append(y)
    return vals


def tree_c(net: Network) -> float:
    """Recover ``c`` from the root edges of a geometric tree."""
    return net.conductance(net.origin, net.origin + "0")


def tree_harmonic(trunc: Truncation, rays: RayPair, c: float | None = None) -> VertexFunction:
    """Harmonic function following ``h`` along the rays, locally constant elsewhere."""
    c = tree_c(trunc.base) if c is None else c
    _require_transient(c)
    rays.validate(trunc.base)
    ray_values = {z: harmonic_value(c, n) for z, n in rays.labels().items()}
    return VertexFunction(trunc, _extend_from_rays(trunc, ray_values))


def tree_defect(trunc: Truncation, rays: RayPair, c: float | None = None, f1: float = 1.0):
    """Defect recurrence along the rays, extended locally constant off them.

    Returns ``(f, report)`` with the largest ``|Lf + f|`` over inner ray
    vertices and over inner off-ray vertices.  The constant extension is only
    a candidate: off the rays ``Lf = 0`` while ``f != 0``, and those
    residuals are reported rather than hidden.
    """
    c = tree_c(trunc.base) if c is None else c
    rays.validate(trunc.base)
    n = max(len(rays.plus), len(rays.minus))
    seq = _defect_sequence(c, n, f1)
    # antisymmetric, as on the integers: f(-k) = -f(k)
    ray_values = {z: np.sign(k) * seq[abs(k)] for z, k in rays.labels().items()}
    f = VertexFunction(trunc, _extend_from_rays(trunc, ray_values))
    res = np.abs(laplacian_apply(trunc, f).values + f.values)
    inner = set(trunc.inner_vertices())
    on, off = [0.0], [0.0]
    for x, i in trunc.index.items():
        if x in inner:
            (on if x in ray_values else off).append(res[i])
    return f, {"ray_residual": max(on), "offray_residual": max(off)}


# -- Royden decomposition --------------------------------------------------

def royden_decompose(trunc: Truncation, u) -> tuple[VertexFunction, VertexFunction]:
    """Split ``u`` into its finite part and harmonic part.

    The finite part is the energy-orthogonal projection onto the span of
    point masses at inner vertices (those with no neighbor outside the
    interior); the remainder is harmonic at every inner vertex.  When the
    inner vertices make up the whole free network the point masses also
    span the constants, so the origin is pinned: ``u_fin(o) = 0``.
    """
    uu = values_of(trunc, u)
    inner = trunc.inner_vertices()
    if not trunc.wired and len(inner) == trunc.n:
        inner = [x for x in inner if x != trunc.origin]
    basis = [trunc.index[x] for x in inner]
    fin = np.zeros(trunc.n)
    if basis:
        L = assemble_laplacian(trunc).matrix
        eye = np.eye(trunc.n)[:, basis]
        G = energy_gram(trunc, eye)
        rhs = (L @ uu)[basis]  # E(delta_x, u) = (Lu)(x)
        try:
            coef = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), rhs)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(f"point-mass Gram matrix is singular: {exc}") from exc
        fin[basis] = coef
    return VertexFunction(trunc, fin), VertexFunction(trunc, uu - fin)


# -- defect vectors on the geometric integers --------------------------------

def _defect_sequence(c: float, N: int, f1: float) -> np.ndarray:
    """``f(0..N)`` from the forward recurrence with ``f(0) = 0``, ``f(1) = f1``."""
    f = np.zeros(N + 1)
    if N >= 1:
        f[1] = f1
    c = float(c)
    for n in range(1, N):
        f[n + 1] = (c + 1) / c * (1 + 1 / (c**n * (c + 1))) * f[n] - f[n - 1] / c
    return f


@dataclass
class DefectVector:
    f: VertexFunction
    partial_energies: np.ndarray
    c: float
    f1: float = 1.0
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.f, self.partial_energies))


def defect_vector_Z(c: float, N: int, f1: float = 1.0) -> DefectVector:
    """Solution of ``Lf = -f`` on the geometric integers with ``f(0) = 0``.

    The positive half follows the recurrence outward from ``f(1) = f1``.
    The point equation at 0 forces ``f(-1) = -f1``; the negative half then
    runs the mirrored recurrence outward from ``-1``.  ``partial_energies[k]``
    is the energy of the edges inside ``[-k, k]``.

    ``f`` lives on the free ball of radius ``N`` in a network one step
    longer, so the equation is asserted at ``|n| < N`` only.
    """
    if N < 2:
        raise DomainError("N must be at least 2")
    if f1 == 0:
        raise DomainError("f(1) must be nonzero")
    c = float(c)
    pos = _defect_sequence(c, N, f1)
    # equation at 0: c (f0 - f1) + c (f0 - f(-1)) = -f0 with f0 = 0
    neg = np.zeros(N + 1)  # neg[k] = f(-k)
    neg[1] = -pos[1]
    for k in range(1, N):
        # vertex -k: edge to -k+1 weighs c^k, edge to -k-1 weighs c^(k+1)
        neg[k + 1] = (c + 1) / c * (1 + 1 / (c**k * (c + 1))) * neg[k] - neg[k - 1] / c
    trunc = truncate(make_geometric_integers(c, N + 1), 0, N, Mode.FREE)
    f = VertexFunction.from_callable(trunc, lambda n: pos[n] if n >= 0 else neg[-n])
    terms = np.array(
        [c**k * ((pos[k] - pos[k - 1]) ** 2 + (neg[k] - neg[k - 1]) ** 2) for k in range(1, N + 1)]
    )
    partial = np.concatenate([[0.0], np.cumsum(terms)])
    return DefectVector(f, partial, c, f1)


def defect_residual(trunc: Truncation, f, vertices=None) -> float:
    """Largest ``|Lf + f| / (c(x) |f|_inf)`` over ``vertices`` (default: inner vertices)."""
    ff = values_of(trunc, f)
    vertices = trunc.inner_vertices() if vertices is None else vertices
    res = laplacian_apply(trunc, ff).values + ff
    scale = np.abs(ff).max() or 1.0
    return max((abs(res[trunc.index[x]]) / (trunc.degree(x) * scale) for x in vertices), default=0.0)


@dataclass
class DefectScan:
    max_residual: float
    max_relative_residual: float
    satisfies_identity: bool
    local_maxima: list
    contradictions: list

    @property
    def is_defect(self) -> bool:
        return self.satisfies_identity and not self.contradictions


def c0_defect_scan(trunc: Truncation, f, tol: float = 1e-9) -> DefectScan:
    """Check ``(Pf)(x) = (1 + 1/c(x)) f(x)`` at inner vertices.

    A function satisfying this identity cannot have a positive local
    maximum (or negative local minimum) at such a vertex, because the
    neighbor average ``Pf(x)`` would exceed the maximum.  Extrema found
    where the identity holds are reported as contradictions.
    """
    ff = values_of(trunc, f)
    if not np.any(ff):
        raise DomainError("f must be nonzero")
    P = assemble_transition(trunc).matrix
    Pf = P @ ff
    scale = np.abs(ff).max()
    inner = trunc.inner_vertices()
    max_res = max_rel = 0.0
    holds = {}
    extrema, contra = [], []
    for x in inner:
        i = trunc.index[x]
        cx = trunc.degree(x)
        r = abs(Pf[i] - (1 + 1 / cx) * ff[i])
        rel = r / ((1 + 1 / cx) * scale)
        max_res, max_rel = max(max_res, r), max(max_rel, rel)
        holds[x] = rel <= tol
        nb = [ff[trunc.index[y]] for y, _ in trunc.neighbors(x)]
        if (ff[i] > 0 and all(ff[i] >= v for v in nb)) or (ff[i] < 0 and all(ff[i] <= v for v in nb)):
            extrema.append(x)
            if holds[x]:
                contra.append(x)
    return DefectScan(max_res, max_rel, bool(inner) and all(holds.values()), extrema, contra)
