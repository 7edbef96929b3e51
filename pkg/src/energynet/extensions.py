"""The inclusion J of l2 into the energy space, the Krein and Friedrichs sides.

On a truncation ``J`` is the identity on coordinates; what changes is the
inner product.  ``J*`` is the Laplacian read as a map into l2, ``J*J`` is the
l2 Laplacian and ``JJ*`` (the Krein extension) is represented in the
reproducing-kernel basis of the energy space: dipoles ``v_x`` (x != o) on
free truncations, monopoles ``w_x`` on wired ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from energynet.errors import DomainError, NumericalError
from energynet.functions import VertexFunction, values_of
from energynet.graph_core import Truncation
from energynet.kernels import KernelFamily, MonopoleFamily, energy_kernel, monopoles
from energynet.operators import (
    SpectralMeasure,
    SymmetricOperator,
    assemble_laplacian,
    dense_eigh,
    dense_eigvalsh,
    energy,
    energy_gram,
    generalized_eigh,
    incidence,
    laplacian_apply,
    spectral_measure,
)

GRAM_COND_LIMIT = 1e12
SINGULAR_CUTOFF = 1e-12


def apply_J(trunc: Truncation, xi) -> VertexFunction:
    """``J xi``: the same coordinates, now an element of the energy space."""
    return VertexFunction(trunc, np.array(values_of(trunc, xi), copy=True))


def apply_Jstar(trunc: Truncation, u) -> np.ndarray:
    """``J* u = Lu`` as an l2 vector (well defined on classes mod constants)."""
    return laplacian_apply(trunc, u).values


def krein_apply(trunc: Truncation, u, vertices=None) -> VertexFunction:
    """``JJ* u``, optionally kept only on ``vertices``."""
    out = apply_J(trunc, apply_Jstar(trunc, u))
    return out if vertices is None else out.restrict(vertices)


# -- Q kernel / J*J ------------------------------------------------------------

def q_kernel(trunc: Truncation) -> SymmetricOperator:
    """``Q(x, y) = <J delta_x, J delta_y>_E``, assembled from the energy form."""
    G = energy_gram(trunc, np.eye(trunc.n))
    return SymmetricOperator(sp.csr_matrix(G), trunc.interior)


def rkhs_norm(trunc: Truncation, xi, Q: SymmetricOperator | None = None) -> float:
    """``sqrt(sum xi(x) xi(y) Q(x, y))``."""
    Q = q_kernel(trunc) if Q is None else Q
    x = values_of(trunc, xi)
    val = float(x @ (Q.matrix @ x))
    scale = float(abs(Q.matrix).sum(axis=1).max()) * float(x @ x)
    if val < -1e-10 * max(scale, 1.0):
        raise NumericalError(f"negative quadratic form {val:.3g}: assembly bug")
    return float(np.sqrt(max(val, 0.0)))


def jstarj_check(trunc: Truncation) -> float:
    """Largest entrywise gap between ``J*J`` (energy Gram of point masses) and L."""
    Q = q_kernel(trunc).dense()
    L = assemble_laplacian(trunc).dense()
    return float(np.abs(Q - L).max()) if trunc.n else 0.0


# -- Krein operator ------------------------------------------------------------

@dataclass
class KreinOperator:
    """``JJ*`` in a reproducing-kernel basis ``k_x``.

    ``gram[i, j] = E(k_i, k_j)``, ``stiffness[i, j] = <J* k_i, J* k_j>_2``
    and ``matrix = gram^-1 stiffness`` is the matrix of ``JJ*`` acting on
    basis coefficients.
    """

    trunc: Truncation
    vertices: tuple
    basis: np.ndarray
    gram: np.ndarray
    stiffness: np.ndarray
    matrix: np.ndarray
    cond: float
    _eig: tuple | None = field(default=None, repr=False)

    def eig(self):
        if self._eig is None:
            lam, vecs, _ = generalized_eigh(self.stiffness, self.gram, GRAM_COND_LIMIT)
            self._eig = (lam, vecs)
        return self._eig

    def eigenvalues(self) -> np.ndarray:
        return self.eig()[0]

    def norm(self) -> float:
        lam = self.eigenvalues()
        return float(lam[-1]) if lam.size else 0.0

    def apply_to_basis(self, x) -> VertexFunction:
        """``JJ* k_x`` as a vertex function."""
        i = self.vertices.index(x)
        return krein_apply(self.trunc, self.basis[:, i])

    def coefficients(self, u) -> np.ndarray:
        """Coordinates of ``u`` in the kernel basis."""
        b = energy_products(self.trunc, self.basis, u)
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(self.gram), b)


def energy_products(trunc: Truncation, cols: np.ndarray, u) -> np.ndarray:
    """``E(col_i, u)`` for each column."""
    B, wt = incidence(trunc)
    return (B @ cols).T @ (wt * (B @ values_of(trunc, u)))


def default_kernel(trunc: Truncation):
    return monopoles(trunc) if trunc.wired else energy_kernel(trunc)


def krein_matrix(trunc: Truncation, kernel: KernelFamily | MonopoleFamily | None = None) -> KreinOperator:
    kernel = default_kernel(trunc) if kernel is None else kernel
    if isinstance(kernel, KernelFamily) == trunc.wired:
        raise DomainError("use dipoles on free truncations and monopoles on wired ones")
    verts = kernel.basis_vertices()
    cols = np.column_stack([kernel.matrix[:, trunc.index[x]] for x in verts]) if verts else np.zeros((trunc.n, 0))
    K = energy_gram(trunc, cols)
    L = assemble_laplacian(trunc).matrix
    Jstar = L @ cols
    S = Jstar.T @ Jstar
    S = 0.5 * (S + S.T)
    if not verts:
        return KreinOperator(trunc, verts, cols, K, S, np.zeros((0, 0)), 1.0)
    gev = scipy.linalg.eigvalsh(K)
    if gev[0] <= 0:
        raise NumericalError("kernel Gram matrix is not positive definite")
    cond = float(gev[-1] / gev[0])
    if cond > GRAM_COND_LIMIT:
        raise NumericalError(f"kernel Gram condition number {cond:.3g} exceeds {GRAM_COND_LIMIT:.0e}")
    M = scipy.linalg.cho_solve(scipy.linalg.cho_factor(K), S)
    return KreinOperator(trunc, verts, cols, K, S, M, cond)


# -- spectra -------------------------------------------------------------------

def _nonzero(lam, scale, rtol):
    return lam[np.abs(lam) > rtol * scale]


def multiset_rel_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Largest ``|a_i - b_i| / max(|a_i|, |b_i|)`` after sorting; inf on count mismatch."""
    a, b = np.sort(a), np.sort(b)
    if a.shape != b.shape:
        return float("inf")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)))


@dataclass
class SpectrumReport:
    ell2: np.ndarray
    krein: np.ndarray
    ell2_zero_count: int
    krein_zero_count: int
    max_rel_deviation: float
    gram_cond: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_deviation <= self.tol


def spectrum_compare(trunc: Truncation, kernel=None, tol: float = 1e-8, zero_rtol: float = 1e-10) -> SpectrumReport:
    """Nonzero spectra of ``J*J`` (= L on l2) and ``JJ*`` (energy geometry)."""
    lam_l2 = dense_eigvalsh(assemble_laplacian(trunc).dense())
    kr = krein_matrix(trunc, kernel)
    lam_kr = kr.eigenvalues()
    scale = max(float(np.abs(lam_l2).max(initial=0.0)), 1e-300)
    nz_l2 = _nonzero(lam_l2, scale, zero_rtol)
    nz_kr = _nonzero(lam_kr, scale, zero_rtol)
    return SpectrumReport(
        nz_l2, nz_kr, lam_l2.size - nz_l2.size, lam_kr.size - nz_kr.size,
        multiset_rel_deviation(nz_l2, nz_kr), kr.cond, tol,
    )


def norm_equivalence_check(trunc: Truncation, kernel=None) -> tuple[float, float, float]:
    """``(|L|, |J|^2, |JJ*|)`` computed along three separate routes.

    ``|L|`` from the assembled Laplacian, ``|J|^2`` as the top eigenvalue of
    the energy Gram matrix of point masses (``sup |J xi|_E^2 / |xi|_2^2``),
    ``|JJ*|`` from the Cholesky-reduced kernel-basis problem.
    """
    norm_L = float(dense_eigvalsh(assemble_laplacian(trunc).dense())[-1]) if trunc.n else 0.0
    norm_J2 = float(dense_eigvalsh(q_kernel(trunc).dense())[-1]) if trunc.n else 0.0
    norm_K = krein_matrix(trunc, kernel).norm()
    return norm_L, norm_J2, norm_K


# -- polar isometry U and spectral measures --------------------------------------

@dataclass
class PolarIsometry:
    """``U = J (J*J)^{-1/2}`` on the span of eigenvectors of L with nonzero eigenvalue."""

    trunc: Truncation
    lambdas: np.ndarray
    vectors: np.ndarray
    kept: np.ndarray

    @property
    def excluded(self) -> int:
        return int((~self.kept).sum())

    def project(self, xi) -> np.ndarray:
        """Part of ``xi`` in the domain of U."""
        x = values_of(self.trunc, xi)
        E = self.vectors[:, self.kept]
        return E @ (E.T @ x)

    def __call__(self, xi) -> VertexFunction:
        x = values_of(self.trunc, xi)
        E = self.vectors[:, self.kept]
        coef = (E.T @ x) / np.sqrt(self.lambdas[self.kept])
        return apply_J(self.trunc, E @ coef)


def polar_isometry(trunc: Truncation) -> PolarIsometry:
    """Build U from the polar decomposition ``J = U (J*J)^{1/2}``.

    Singular values of J below ``SINGULAR_CUTOFF`` times the largest are left
    out of U's domain; on free truncations that removes the constants.
    """
    lam, vecs = dense_eigh(assemble_laplacian(trunc).dense())
    top = max(float(lam[-1]), 0.0) if lam.size else 0.0
    sv = np.sqrt(np.clip(lam, 0.0, None))
    kept = sv > SINGULAR_CUTOFF * max(np.sqrt(top), 1e-300)
    return PolarIsometry(trunc, lam, vecs, kept)


@dataclass
class MeasurePair:
    krein: SpectralMeasure
    ell2: SpectralMeasure
    excluded_modes: int
    excluded_mass: float

    def deviation(self) -> tuple[float, float]:
        """``(max eigenvalue rel. gap, max weight gap)`` between atoms with nonzero eigenvalue."""
        return compare_measures(self.krein, self.ell2)


def compare_measures(a: SpectralMeasure, b: SpectralMeasure, zero_rtol: float = SINGULAR_CUTOFF) -> tuple[float, float]:
    """Pair up atoms of two measures (ignoring atoms at 0) and return the worst gaps."""
    scale = max(np.abs(a.lambdas).max(initial=0.0), np.abs(b.lambdas).max(initial=0.0), 1e-300)
    ka = np.abs(a.lambdas) > zero_rtol * scale
    kb = np.abs(b.lambdas) > zero_rtol * scale
    la, wa = a.lambdas[ka], a.weights[ka]
    lb, wb = b.lambdas[kb], b.weights[kb]
    if la.size != lb.size:
        return float("inf"), float("inf")
    return multiset_rel_deviation(la, lb), float(np.abs(wa - wb).max(initial=0.0))


def krein_spectral_measures(trunc: Truncation, xi, kernel=None) -> MeasurePair:
    """``mu_Kr`` at ``U xi`` and ``mu_l2`` at ``xi``.

    The l2 measure uses the Laplacian's orthonormal eigenbasis.  The Krein
    measure takes U xi, expands it in the kernel basis, and uses a
    Gram-orthonormal eigenbasis of ``JJ*``.
    """
    x = values_of(trunc, xi)
    U = polar_isometry(trunc)
    kr = krein_matrix(trunc, kernel)
    u = U(x)
    mu_kr = spectral_measure(kr.matrix, kr.coefficients(u), gram=kr.gram)
    mu_l2 = spectral_measure(assemble_laplacian(trunc), x)
    dropped = x - U.project(x)
    return MeasurePair(mu_kr, mu_l2, U.excluded, float(dropped @ dropped))


# -- Friedrichs side -------------------------------------------------------------

def friedrichs_map(trunc: Truncation, monos: MonopoleFamily, xi) -> VertexFunction:
    """``Phi xi = sum_x xi(x) w_x``."""
    if monos.trunc is not trunc and monos.trunc.interior != trunc.interior:
        raise DomainError("monopoles belong to another truncation")
    return VertexFunction(trunc, monos.matrix @ values_of(trunc, xi))


@dataclass
class FriedrichsReport:
    moment_identity: float  # E(Phi xi, L Phi xi)
    ell2_mass: float  # |xi|^2
    friedrichs: SpectralMeasure
    ell2: SpectralMeasure
    moments: list  # [(int lam^(k+1) dmu_F, int lam^k dmu_l2) for k = 0, 1, 2]
    atomwise: float  # max |lam w_F - w_l2|
    krein_atomwise: float  # max |lam w_F(Phi xi) - w_Kr(U xi)|


def friedrichs_compare(trunc: Truncation, xi, monos: MonopoleFamily | None = None) -> FriedrichsReport:
    """Compare ``lam dmu_F(Phi xi)`` against ``dmu_l2(xi)`` on a wired truncation.

    The Friedrichs operator here is the wired Laplacian acting in the energy
    space, whose Gram matrix in point-mass coordinates is built from the
    energy form.
    """
    if not trunc.wired:
        raise DomainError("the Friedrichs map needs a wired truncation")
    monos = monopoles(trunc) if monos is None else monos
    x = values_of(trunc, xi)
    phi = friedrichs_map(trunc, monos, x)
    moment = energy(trunc, phi, laplacian_apply(trunc, phi))
    L = assemble_laplacian(trunc)
    Q = q_kernel(trunc).dense()
    mu_f = spectral_measure(L, phi, gram=Q)
    mu_l2 = spectral_measure(L, x)
    # moments from unclustered atoms so cluster averaging cannot shift them
    raw_f = spectral_measure(L, phi, gram=Q, cluster_rtol=0.0)
    raw_l2 = spectral_measure(L, x, cluster_rtol=0.0)
    moments = [(raw_f.moment(k + 1), raw_l2.moment(k)) for k in range(3)]
    if mu_f.lambdas.size == mu_l2.lambdas.size:
        atomwise = float(np.abs(mu_f.lambdas * mu_f.weights - mu_l2.weights).max(initial=0.0))
    else:
        atomwise = float("inf")
    mu_kr = krein_spectral_measures(trunc, x).krein
    if mu_f.lambdas.size == mu_kr.lambdas.size:
        kr_atomwise = float(np.abs(mu_f.lambdas * mu_f.weights - mu_kr.weights).max(initial=0.0))
    else:
        kr_atomwise = float("inf")
    return FriedrichsReport(moment, float(x @ x), mu_f, mu_l2, moments, atomwise, kr_atomwise)
