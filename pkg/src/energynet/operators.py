"""Laplacian, energy form, inner products and transition operator on truncations."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from energynet.errors import DomainError, NumericalError
from energynet.functions import VertexFunction, values_of
from energynet.graph_core import Truncation

DENSE_LIMIT = 4000
DEFAULT_RTOL = 1e-10


@dataclass(frozen=True)
class VertexMatrix:
    """Sparse matrix whose rows and columns are indexed by ``vertices``."""

    matrix: sp.csr_matrix
    vertices: tuple

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, x):
        return self.matrix @ x

    def to_csv(self, path):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "col", "value"])
            for k in order:
                w.writerow([self.vertices[coo.row[k]], self.vertices[coo.col[k]], fmt(coo.data[k])])


class SymmetricOperator(VertexMatrix):
    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1] or (m != m.T).nnz:
            raise NumericalError("operator entries are not exactly symmetric")

    def norm(self) -> float:
        """Operator 2-norm (largest absolute eigenvalue)."""
        ev = dense_eigvalsh(self.dense())
        return float(max(abs(ev[0]), abs(ev[-1]))) if ev.size else 0.0


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- pointwise formulas ----------------------------------------------------

def laplacian_apply(trunc: Truncation, u) -> VertexFunction:
    """``(Lu)(x) = sum_y c_xy (u(x) - u(y))`` at every interior ``x``."""
    vals = values_of(trunc, u)
    idx = trunc.index
    out = np.empty(trunc.n)
    for i, x in enumerate(trunc.interior):
        ux = vals[i]
        acc = 0.0
        for y, w in trunc.neighbors(x):
            j = idx.get(y)
            acc += w * (ux - (vals[j] if j is not None else 0.0))
        out[i] = acc
    return VertexFunction(trunc, out)


def assemble_laplacian(trunc: Truncation) -> SymmetricOperator:
    """Sparse Laplacian: degree on the diagonal, ``-c_xy`` off it.

    Wired truncations count edges to the grounded boundary in the degree.
    """
    cached = _cache(trunc).get("laplacian")
    if cached is not None:
        return cached
    idx = trunc.index
    rows, cols, data = [], [], []
    for i, x in enumerate(trunc.interior):
        deg = 0.0
        for y, w in trunc.neighbors(x):
            # same summation order as laplacian_apply on a point mass
            deg += w * (1.0 - 0.0)
            j = idx.get(y)
            if j is not None:
                rows.append(i)
                cols.append(j)
                data.append(w * (0.0 - 1.0))
        rows.append(i)
        cols.append(i)
        data.append(deg)
    n = trunc.n
    m = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    op = SymmetricOperator(m, trunc.interior)
    _cache(trunc)["laplacian"] = op
    return op


def _cache(trunc) -> dict:
    try:
        return trunc._cache
    except AttributeError:
        object.__setattr__(trunc, "_cache", {})
        return trunc._cache


def edge_arrays(trunc: Truncation):
    """Edges of the truncation as index arrays ``(head, tail, weight)``.

    ``tail == -1`` marks an edge into the grounded boundary.
    """
    store = _cache(trunc)
    if "edges" not in store:
        idx = trunc.index
        head, tail, wt = [], [], []
        for i, x in enumerate(trunc.interior):
            for y, w in trunc.neighbors(x):
                j = idx.get(y, -1)
                if j == -1 or i < j:
                    head.append(i)
                    tail.append(j)
                    wt.append(w)
        store["edges"] = (np.array(head, dtype=int), np.array(tail, dtype=int), np.array(wt, dtype=float))
    return store["edges"]


def incidence(trunc: Truncation) -> tuple[sp.csr_matrix, np.ndarray]:
    """Signed edge-vertex incidence ``B`` and edge weights ``w``.

    ``energy(u, v) == (B u) . (w * B v)``.
    """
    head, tail, wt = edge_arrays(trunc)
    m = len(wt)
    inner = tail >= 0
    rows = np.concatenate([np.arange(m), np.arange(m)[inner]])
    cols = np.concatenate([head, tail[inner]])
    data = np.concatenate([np.ones(m), -np.ones(inner.sum())])
    return sp.csr_matrix((data, (rows, cols)), shape=(m, trunc.n)), wt


def energy(trunc: Truncation, u, v=None) -> float:
    """Energy form ``sum over edges c_xy (u(x)-u(y)) (v(x)-v(y))``.

    Exterior values read as 0 on wired truncations.
    """
    a = values_of(trunc, u)
    b = a if v is None else values_of(trunc, v)
    head, tail, wt = edge_arrays(trunc)
    ta = np.where(tail >= 0, a[tail], 0.0)
    tb = np.where(tail >= 0, b[tail], 0.0)
    return float(np.dot(wt * (a[head] - ta), b[head] - tb))


def energy_gram(trunc: Truncation, family) -> np.ndarray:
    """Energy Gram matrix ``E(f_i, f_j)`` of a family of vertex functions.

    ``family`` is a sequence of functions or a 2-d array whose columns are
    coordinate vectors.
    """
    if isinstance(family, np.ndarray):
        cols = family
    else:
        cols = np.column_stack([values_of(trunc, f) for f in family])
    B, wt = incidence(trunc)
    D = B @ cols
    G = D.T @ (wt[:, None] * D)
    return 0.5 * (G + G.T)


def ell2_inner(u, v) -> float:
    if isinstance(u, VertexFunction):
        a, b = u.values, values_of(u.trunc, v)
    elif isinstance(v, VertexFunction):
        a, b = values_of(v.trunc, u), v.values
    else:
        a, b = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        if a.shape != b.shape:
            raise DomainError("vectors differ in length")
    return float(np.dot(a, b))


def assemble_transition(trunc: Truncation) -> VertexMatrix:
    """Random-walk matrix ``p(x, y) = c_xy / c(x)`` restricted to the interior.

    Rows of vertices next to a wired boundary lose the mass that walks into
    the ground, so they sum to less than 1.
    """
    idx = trunc.index
    rows, cols, data = [], [], []
    for i, x in enumerate(trunc.interior):
        deg = trunc.degree(x)
        if deg <= 0:
            raise DomainError(f"vertex {x!r} is isolated in this truncation")
        for y, w in trunc.neighbors(x):
            j = idx.get(y)
            if j is not None:
                rows.append(i)
                cols.append(j)
                data.append(w / deg)
    n = trunc.n
    return VertexMatrix(sp.csr_matrix((data, (rows, cols)), shape=(n, n)), trunc.interior)


def degrees(trunc: Truncation) -> np.ndarray:
    return np.array([trunc.degree(x) for x in trunc.interior])


# -- spectra ---------------------------------------------------------------

def _check_dense(n):
    if n > DENSE_LIMIT:
        raise NumericalError(f"dimension {n} exceeds dense eigensolver limit {DENSE_LIMIT}")


def dense_eigvalsh(A: np.ndarray) -> np.ndarray:
    _check_dense(A.shape[0])
    try:
        return scipy.linalg.eigvalsh(A)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolve failed: {exc}") from exc


def dense_eigh(A: np.ndarray):
    _check_dense(A.shape[0])
    try:
        return scipy.linalg.eigh(A)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolve failed: {exc}") from exc


def generalized_eigh(S: np.ndarray, G: np.ndarray, cond_limit: float = 1e12):
    """Solve ``S c = lam G c`` with ``G`` symmetric positive definite.

    Reduces to a standard problem with the Cholesky factor ``G = C C^T``.
    Returns ``(lam, vecs, cond)`` where the columns of ``vecs`` are
    ``G``-orthonormal and ``cond`` is the 2-norm condition number of ``G``.
    """
    _check_dense(G.shape[0])
    gev = scipy.linalg.eigvalsh(G)
    if gev[0] <= 0:
        raise NumericalError("Gram matrix is not positive definite")
    cond = float(gev[-1] / gev[0])
    if cond > cond_limit:
        raise NumericalError(f"Gram matrix condition number {cond:.3g} exceeds {cond_limit:.3g}")
    try:
        C = scipy.linalg.cholesky(G, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky failed: {exc}") from exc
    X = scipy.linalg.solve_triangular(C, S, lower=True)
    R = scipy.linalg.solve_triangular(C, X.T, lower=True)  # C^-1 S C^-T
    R = 0.5 * (R + R.T)
    lam, Y = dense_eigh(R)
    vecs = scipy.linalg.solve_triangular(C.T, Y, lower=False)
    return lam, vecs, cond


@dataclass(frozen=True)
class SpectralMeasure:
    """Atoms ``(lambda_i, weight_i)`` sorted by ``lambda``."""

    lambdas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        order = np.argsort(self.lambdas, kind="stable")
        object.__setattr__(self, "lambdas", np.asarray(self.lambdas, dtype=float)[order])
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float)[order])

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.lambdas.tolist(), self.weights.tolist()))

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def moment(self, k: int) -> float:
        return float(np.dot(self.lambdas**k, self.weights))

    def merged(self, rtol: float = 1e-9) -> "SpectralMeasure":
        """Combine atoms whose eigenvalues agree to ``rtol`` of the spectral radius.

        A merged atom sits at the weight-averaged eigenvalue of its cluster,
        which keeps the first moment unchanged.
        """
        if self.lambdas.size == 0:
            return self
        scale = max(abs(self.lambdas[0]), abs(self.lambdas[-1])) or 1.0
        groups = [[0]]
        for i in range(1, self.lambdas.size):
            if self.lambdas[i] - self.lambdas[groups[-1][0]] <= rtol * scale:
                groups[-1].append(i)
            else:
                groups.append([i])
        lams = np.array([
            np.average(self.lambdas[g], weights=self.weights[g]) if self.weights[g].sum() > 0 else self.lambdas[g].mean()
            for g in groups
        ])
        wts = np.array([self.weights[g].sum() for g in groups])
        return SpectralMeasure(lams, wts)

    def to_rows(self):
        return [(fmt(a), fmt(b)) for a, b in self.atoms]


CLUSTER_RTOL = 1e-8


def spectral_measure(A, xi, gram: np.ndarray | None = None, cluster_rtol: float = CLUSTER_RTOL) -> SpectralMeasure:
    """Spectral measure of ``A`` at the vector ``xi``.

    With ``gram=None`` the inner product is the standard one and ``A`` must
    be symmetric.  Otherwise ``A`` is self-adjoint for ``<a, b> = a^T gram b``
    (so ``gram @ A`` is symmetric) and the atoms come from a
    ``gram``-orthonormal eigenbasis.  Weights are ``<e_i, xi>^2``.

    Eigenvalues closer than ``cluster_rtol`` times the spectral radius are
    treated as one eigenvalue: inside such a cluster the individual
    eigenvectors are not determined at working precision, only the
    projection onto their span is.
    """
    M = A.dense() if isinstance(A, VertexMatrix) else (A.toarray() if sp.issparse(A) else np.asarray(A, float))
    x = xi.values if isinstance(xi, VertexFunction) else np.asarray(xi, dtype=float)
    if gram is None:
        if not np.allclose(M, M.T, rtol=0, atol=1e-14 * max(np.abs(M).max(), 1.0)):
            raise NumericalError("operator is not symmetric")
        lam, vecs = dense_eigh(0.5 * (M + M.T))
        coef = vecs.T @ x
    else:
        S = gram @ M
        S = 0.5 * (S + S.T)
        lam, vecs, _ = generalized_eigh(S, gram)
        coef = vecs.T @ (gram @ x)
    return SpectralMeasure(lam, coef**2).merged(cluster_rtol)


def write_measure_csv(path, measure: SpectralMeasure, side: str | None = None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "weight"] if side is None else ["side", "lambda", "weight"])
        for row in measure.to_rows():
            w.writerow(row if side is None else (side, *row))
