import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_laplacian
from energynet import (
    DomainError,
    Network,
    VertexFunction,
    make_geometric_integers,
    make_path,
    make_random_network,
    truncate,
    whole,
)
from energynet.extensions import (
    apply_J,
    apply_Jstar,
    compare_measures,
    friedrichs_compare,
    friedrichs_map,
    jstarj_check,
    krein_apply,
    krein_matrix,
    krein_spectral_measures,
    multiset_rel_deviation,
    norm_equivalence_check,
    polar_isometry,
    q_kernel,
    rkhs_norm,
    spectrum_compare,
)
from energynet.harmonics import geometric_harmonic, royden_decompose
from energynet.kernels import energy_kernel, monopoles
from energynet.operators import assemble_laplacian, energy


# -- J and J* ---------------------------------------------------------------------

def test_J_of_point_mass_has_energy_degree(zgeom_free, zgeom_wired):
    for t in (zgeom_free, zgeom_wired):
        for x in t.interior:
            assert energy(t, apply_J(t, VertexFunction.delta(t, x))) == pytest.approx(t.degree(x), rel=1e-15)


def test_J_energy_is_laplacian_form(random20, rng):
    L = dense_laplacian(random20)
    xi = rng.normal(size=random20.n)
    assert energy(random20, apply_J(random20, xi)) == pytest.approx(xi @ L @ xi, rel=1e-12)
    assert np.all(apply_J(random20, np.zeros(random20.n)).values == 0)


def test_Jstar_of_dipole(zgeom_free):
    t = zgeom_free
    K = energy_kernel(t)
    for x in (1, -4, 7):
        expect = (VertexFunction.delta(t, x) - VertexFunction.delta(t, 0)).values
        assert np.abs(apply_Jstar(t, K[x]) - expect).max() <= 1e-9


def test_Jstar_annihilates_harmonic_part(zgeom_free):
    t = zgeom_free
    h = geometric_harmonic(2, trunc=t)
    ls = apply_Jstar(t, h)
    for x in t.inner_vertices():
        assert abs(ls[t.index[x]]) <= 1e-12 * t.degree(x)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**32 - 1), st.booleans())
def test_adjointness(n, seed, wired):
    rng = np.random.default_rng(seed)
    net = make_random_network(n, rng)
    t = truncate(net, net.origin, 2, "wired" if wired else "free")
    xi, u = rng.normal(size=(2, t.n))
    lhs = energy(t, apply_J(t, xi), u)
    rhs = float(xi @ apply_Jstar(t, u))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10 * np.abs(dense_laplacian(t)).max() * (xi @ xi + u @ u))


def test_adjointness_on_basis_pairs(zgeom_wired):
    t = zgeom_wired
    for x in t.interior:
        for y in t.interior:
            d = VertexFunction.delta(t, x)
            e = VertexFunction.delta(t, y)
            assert energy(t, apply_J(t, d), e) == pytest.approx(apply_Jstar(t, e)[t.index[x]], abs=1e-12)


# -- Q kernel ---------------------------------------------------------------------

def test_q_kernel_equals_laplacian(zgeom_free, zgeom_wired, random20):
    for t in (zgeom_free, zgeom_wired, random20):
        assert jstarj_check(t) == 0.0


def test_rkhs_norms(zgeom_free):
    t = zgeom_free
    Q = q_kernel(t)
    for x in t.interior:
        assert rkhs_norm(t, VertexFunction.delta(t, x), Q) ** 2 == pytest.approx(t.degree(x), rel=1e-14)
    assert rkhs_norm(t, np.ones(t.n), Q) == 0.0


# -- Krein operator ---------------------------------------------------------------

def test_krein_two_vertex_path():
    t = whole(make_path(2))
    kr = krein_matrix(t)
    assert kr.vertices == (1,)
    assert kr.matrix == pytest.approx(np.array([[2.0]]), rel=1e-14)
    assert kr.norm() == pytest.approx(2.0, rel=1e-14)


def test_krein_on_dipole(zgeom_free):
    t = zgeom_free
    K = energy_kernel(t)
    kr = krein_matrix(t, K)
    for x in (1, 5, -8):
        expect = (VertexFunction.delta(t, x) - VertexFunction.delta(t, 0)).values
        assert np.abs(kr.apply_to_basis(x).values - expect).max() <= 1e-9


def test_krein_matrix_reproduces_apply(zgeom_wired, rng):
    t = zgeom_wired
    kr = krein_matrix(t)
    a = rng.normal(size=len(kr.vertices))
    direct = krein_apply(t, kr.basis @ a).values
    assert np.allclose(kr.basis @ (kr.matrix @ a), direct, rtol=1e-9, atol=1e-9 * np.abs(direct).max())


def test_krein_kills_harmonic_part_in_deep_interior(rng):
    t = truncate(make_geometric_integers(2, 12), 0, 10, "free")
    u = rng.normal(size=t.n)
    _, harm = royden_decompose(t, u)
    inner = t.inner_vertices()
    out = krein_apply(t, harm, vertices=inner)
    assert np.abs(out.values).max() <= 1e-8 * max(t.degree(x) for x in inner) * np.abs(u).max()


def test_krein_basis_kind_must_match_mode(zgeom_free, zgeom_wired):
    with pytest.raises(DomainError):
        krein_matrix(zgeom_free, monopoles(zgeom_wired))
    with pytest.raises(DomainError):
        krein_matrix(zgeom_wired, energy_kernel(zgeom_free))


# -- spectra ---------------------------------------------------------------------

def test_random_matrix_products_share_nonzero_spectrum(rng):
    # sanity check on the comparison helper with a generic A
    A = rng.normal(size=(10, 10))
    a = np.linalg.eigvalsh(A @ A.T)
    b = np.linalg.eigvalsh(A.T @ A)
    assert multiset_rel_deviation(a, b) <= 1e-10
    assert multiset_rel_deviation(a, b[1:]) == float("inf")


@pytest.mark.parametrize(
    "make",
    [
        lambda: truncate(make_geometric_integers(2, 12), 0, 10, "wired"),
        lambda: truncate(make_geometric_integers(2, 12), 0, 10, "free"),
        lambda: whole(make_path(50)),
        lambda: whole(make_random_network(20, np.random.default_rng(42))),
    ],
)
def test_spectra_agree(make):
    t = make()
    rep = spectrum_compare(t)
    assert rep.passed and rep.max_rel_deviation <= 1e-8
    assert rep.gram_cond <= 1e12
    # independent dense oracle for the l2 side
    lam = np.linalg.eigvalsh(dense_laplacian(t))
    lam = lam[np.abs(lam) > 1e-10 * lam.max()]
    assert multiset_rel_deviation(lam, rep.krein) <= 1e-8


def test_zero_counts():
    rep = spectrum_compare(whole(make_path(12)))
    assert rep.ell2_zero_count == 1 and rep.krein_zero_count == 0
    rep = spectrum_compare(truncate(make_geometric_integers(2, 6), 0, 4, "wired"))
    assert rep.ell2_zero_count == 0 and rep.krein_zero_count == 0


@pytest.mark.parametrize(
    "t,expect",
    [
        (whole(make_path(2)), 2.0),
        (truncate(Network("a", [("a", "b", 1.0), ("a", "c", 2.0)]), "a", 0, "wired"), 3.0),
    ],
)
def test_norm_examples(t, expect):
    assert norm_equivalence_check(t) == pytest.approx((expect, expect, expect), rel=1e-12)


def test_norm_equivalence(random20, zgeom_wired):
    for t in (random20, zgeom_wired):
        nL, nJ, nK = norm_equivalence_check(t)
        assert nJ == pytest.approx(nL, rel=1e-8) and nK == pytest.approx(nL, rel=1e-8)


# -- measures ---------------------------------------------------------------------

def test_polar_isometry_excludes_constants(zgeom_free, zgeom_wired):
    assert polar_isometry(zgeom_free).excluded == 1
    assert polar_isometry(zgeom_wired).excluded == 0


def test_polar_isometry_is_isometric(zgeom_free, rng):
    t = zgeom_free
    U = polar_isometry(t)
    for _ in range(100):
        xi = rng.normal(size=t.n)
        p = U.project(xi)
        assert energy(t, U(xi)) == pytest.approx(p @ p, rel=1e-9)


def test_measure_at_eigenvector(zgeom_wired):
    t = zgeom_wired
    lam, vecs = np.linalg.eigh(dense_laplacian(t))
    pair = krein_spectral_measures(t, vecs[:, 3])
    # all mass on one atom; the rest is roundoff
    (l2, w2), (lk, wk) = (max(m.atoms, key=lambda a: a[1]) for m in (pair.ell2, pair.krein))
    for m in (pair.ell2, pair.krein):
        assert m.total_mass() - max(m.weights) <= 1e-12
    assert l2 == pytest.approx(lam[3], rel=1e-10) and lk == pytest.approx(lam[3], rel=1e-10)
    assert w2 == pytest.approx(1.0, rel=1e-10) and wk == pytest.approx(1.0, rel=1e-10)


def test_measures_at_point_masses(zgeom_wired):
    t = zgeom_wired
    for x in t.interior:
        pair = krein_spectral_measures(t, VertexFunction.delta(t, x))
        dl, dw = pair.deviation()
        assert dl <= 1e-8 and dw <= 1e-8
        assert pair.krein.total_mass() == pytest.approx(1.0, rel=1e-9)


def test_measures_random_xi_free(zgeom_free, rng):
    t = zgeom_free
    xi = rng.normal(size=t.n)
    pair = krein_spectral_measures(t, xi)
    assert pair.excluded_modes == 1
    mean = xi.mean()
    assert pair.excluded_mass == pytest.approx(t.n * mean**2, rel=1e-9)
    dl, dw = pair.deviation()
    assert dl <= 1e-8 and dw <= 1e-8 * (xi @ xi)


def test_compare_measures_count_mismatch():
    from energynet.operators import SpectralMeasure

    a = SpectralMeasure(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
    b = SpectralMeasure(np.array([1.0]), np.array([1.0]))
    assert compare_measures(a, b) == (float("inf"), float("inf"))


# -- Friedrichs -----------------------------------------------------------------

def test_friedrichs_map_of_point_mass(zgeom_wired):
    t = zgeom_wired
    W = monopoles(t)
    for x in t.interior:
        assert np.array_equal(friedrichs_map(t, W, VertexFunction.delta(t, x)).values, W[x].values)


def test_friedrichs_moments(zgeom_wired, rng):
    t = zgeom_wired
    for _ in range(5):
        xi = rng.normal(size=t.n)
        rep = friedrichs_compare(t, xi)
        assert rep.moment_identity == pytest.approx(rep.ell2_mass, rel=1e-9)
        for lhs, rhs in rep.moments:
            assert lhs == pytest.approx(rhs, rel=1e-8)
        assert rep.atomwise <= 1e-8 * rep.ell2_mass
        assert rep.krein_atomwise <= 1e-8 * rep.ell2_mass


def test_friedrichs_requires_wired(zgeom_free):
    with pytest.raises(DomainError):
        friedrichs_compare(zgeom_free, np.ones(zgeom_free.n))


def test_friedrichs_against_dense_inverse(zgeom_wired, rng):
    t = zgeom_wired
    xi = rng.normal(size=t.n)
    phi = friedrichs_map(t, monopoles(t), xi).values
    assert np.allclose(phi, np.linalg.solve(dense_laplacian(t), xi), rtol=1e-9, atol=1e-12)
