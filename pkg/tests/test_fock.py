from math import factorial, gamma, pi, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from ftkl.errors import ConfigurationError, UnsupportedWeightError
from ftkl.fock import (
    ELLIPTIC_EXAMPLE,
    HomogeneousWeight,
    Perturbation,
    bergman_eval,
    cubic_perturbation,
    fock_basis,
    gram_matrix,
    model_constant_c0,
    neumann_corrected_kernel,
    orthonormalize,
    polar_grid,
    radial_norms,
    reproducing_defect,
    scaling_deviation,
)

ELLIPTIC = HomogeneousWeight.from_poly(ELLIPTIC_EXAMPLE)


def radial_norm_oracle(r, t, n):
    return 2 * pi * quad(lambda s: s ** (2 * n + 1) * np.exp(-2 * t * s**r), 0, np.inf, epsabs=0, epsrel=1e-13)[0]


def elliptic_gram_oracle(m, n, t=1.0):
    def g(th):
        return np.cos(th) ** 2 * np.sin(th) ** 2 + 0.1

    def radial(th):
        return quad(lambda s: s ** (m + n + 1) * np.exp(-2 * t * s**4 * g(th)), 0, np.inf, epsabs=0, epsrel=1e-13)[0]

    return quad(lambda th: np.cos((m - n) * th) * radial(th), 0, 2 * pi, epsabs=0, epsrel=1e-13, limit=200)[0]


# --- radial norms and Gram matrices


@pytest.mark.parametrize(
    "r, t, n, want",
    [(2, 1.0, 0, pi / 2), (2, 1.0, 1, pi / 4), (4, 1.0, 0, pi**1.5 / (2 * sqrt(2)))],
)
def test_radial_norm_examples(r, t, n, want):
    assert radial_norms(r, t, n)[n] == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("r", [2, 3, 4, 6])
@pytest.mark.parametrize("t", [0.5, 1.0, 7.0])
def test_radial_norms_against_quadrature(r, t):
    got = radial_norms(r, t, 6)
    want = [radial_norm_oracle(r, t, n) for n in range(7)]
    np.testing.assert_allclose(got, want, rtol=1e-11)


def test_gaussian_gram_diagonal():
    G = gram_matrix(HomogeneousWeight.from_poly("p1**2 + p2**2"), 1.0, 12).dense()
    want = np.array([pi * factorial(n) / 2 ** (n + 1) for n in range(13)])
    np.testing.assert_allclose(np.diag(G).real, want, rtol=1e-12)
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() < 1e-12 * want.max()


def test_elliptic_gram_couples_modes_and_is_hermitian():
    G = gram_matrix(ELLIPTIC, 1.0, 8).dense()
    assert abs(G[0, 4]) > 1.0
    assert np.abs(G - G.conj().T).max() < 1e-14 * np.abs(G).max()
    # frozen from an independent polar quad() evaluation
    assert G[0, 0].real == pytest.approx(4.442418278947818, rel=1e-12)
    assert G[0, 4].real == pytest.approx(2.870528391956584, rel=1e-12)
    for m, n in [(2, 2), (1, 5)]:
        assert G[m, n].real == pytest.approx(elliptic_gram_oracle(m, n), rel=1e-10)
    # the weight is invariant under quarter turns, so only m = n mod 4 couple
    m = np.arange(9)
    d = np.sqrt(np.diag(G).real)
    S = G / np.outer(d, d)
    assert np.abs(S[(m[:, None] - m[None, :]) % 4 != 0]).max() < 1e-14


@pytest.mark.parametrize("t", [0.25, 3.0, 100.0])
def test_gram_scales_exactly_in_t(t):
    G1 = gram_matrix(ELLIPTIC, 1.0, 10).dense()
    Gt = gram_matrix(ELLIPTIC, t, 10).dense()
    m = np.arange(11)
    factor = t ** (-(m[:, None] + m[None, :] + 2) / 4)
    mask = np.abs(G1) > 1e-12 * np.abs(G1).max()
    np.testing.assert_allclose(Gt[mask], (factor * G1)[mask], rtol=1e-10)


# --- orthonormalization


def test_orthonormalize_identity_and_diagonal():
    assert np.allclose(orthonormalize(np.eye(4)).transform, np.eye(4), atol=0)
    d = np.array([2.0, 0.5, 9.0])
    assert np.allclose(orthonormalize(np.diag(d)).transform, np.diag(d**-0.5), rtol=1e-15)


def test_orthonormalize_two_by_two():
    T = orthonormalize(np.array([[1.0, 0.5], [0.5, 1.0]])).transform
    np.testing.assert_allclose(T, [[1.0, 0.0], [-1 / sqrt(3), 2 / sqrt(3)]], atol=1e-15)


@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_orthonormalize_whitens_random_gram(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    G = A @ A.conj().T + n * np.eye(n)
    T = orthonormalize(G).transform
    np.testing.assert_allclose(T @ G @ T.conj().T, np.eye(n), atol=1e-10)
    assert np.allclose(np.triu(T, 1), 0)


# --- kernel values


def test_gaussian_origin_value():
    b = fock_basis(HomogeneousWeight.radial_weight(2), 1.0, 40)
    kv = bergman_eval(b, None, 1.0, (0, 0), (0, 0))
    assert kv.value.real == pytest.approx(2 / pi, rel=1e-14)
    assert kv.warning is None


def test_gaussian_kernel_closed_form():
    t = 1.0
    b = fock_basis(HomogeneousWeight.radial_weight(2), t, 40)
    rng = np.random.default_rng(7)
    P = rng.uniform(-0.7, 0.7, size=(6, 2))
    Q = rng.uniform(-0.7, 0.7, size=(6, 2))
    z, w = P[:, 0] + 1j * P[:, 1], Q[:, 0] + 1j * Q[:, 1]
    K = b.kernel(P, Q)
    want = (2 * t / pi) * np.exp(2 * t * z[:, None] * w.conj()[None, :] - t * np.abs(z)[:, None] ** 2 - t * np.abs(w)[None, :] ** 2)
    np.testing.assert_allclose(K, want, atol=1e-13)
    # modulus form of the strongly pseudoconvex model
    np.testing.assert_allclose(np.abs(K), (2 * t / pi) * np.exp(-t * np.abs(z[:, None] - w[None, :]) ** 2), rtol=1e-12)


@pytest.mark.parametrize("weight", [HomogeneousWeight.radial_weight(4), ELLIPTIC])
def test_origin_value_is_inverse_gram_corner(weight):
    nmax = 30
    G = gram_matrix(weight, 2.0, nmax).dense()
    b = fock_basis(weight, 2.0, nmax)
    B00 = b.kernel([[0.0, 0.0]], [[0.0, 0.0]])[0, 0].real
    assert B00 == pytest.approx(np.linalg.inv(G)[0, 0].real, rel=1e-9)
    if weight.radial:
        assert B00 == pytest.approx(1 / G[0, 0].real, rel=1e-13)


@pytest.mark.parametrize("r", [2, 4, 6])
def test_radial_model_constants(r):
    want = r * 2 ** (2 / r) / (2 * pi * gamma(2 / r))
    assert model_constant_c0(HomogeneousWeight.radial_weight(r)) == pytest.approx(want, rel=1e-12)


def test_named_model_constants():
    assert model_constant_c0(HomogeneousWeight.radial_weight(2)) == pytest.approx(0.636620, abs=1e-6)
    assert model_constant_c0(HomogeneousWeight.radial_weight(4)) == pytest.approx(2 * sqrt(2) / pi**1.5, rel=1e-12)


def test_elliptic_model_constant_converged():
    c0 = model_constant_c0(ELLIPTIC)
    assert c0 == pytest.approx(0.24094140777, rel=1e-9)
    assert model_constant_c0(ELLIPTIC, nmax=56) == pytest.approx(c0, rel=1e-9)


@pytest.mark.parametrize("weight", [HomogeneousWeight.radial_weight(4), ELLIPTIC])
def test_conjugate_symmetry_and_positive_diagonal(weight):
    b = fock_basis(weight, 1.5, 40)
    grid = polar_grid(0.8)
    K = b.kernel(grid, grid)
    assert np.abs(K - K.conj().T).max() < 1e-13
    assert np.diag(K).real.min() > 0
    assert np.abs(np.diag(K).imag).max() < 1e-15


@pytest.mark.parametrize("weight", [HomogeneousWeight.radial_weight(4), ELLIPTIC])
def test_reproducing_property(weight):
    b = fock_basis(weight, 1.0, 24)
    pts = polar_grid(0.6, n_r=2, n_theta=4)
    for k in (0, 3, 7):
        assert reproducing_defect(b, pts, k) < 1e-11


def test_mismatched_basis_rejected():
    b = fock_basis(HomogeneousWeight.radial_weight(2), 1.0, 8)
    with pytest.raises(ConfigurationError):
        bergman_eval(b, None, 2.0, (0, 0), (0, 0))
    with pytest.raises(ConfigurationError):
        bergman_eval(b, HomogeneousWeight.radial_weight(4), 1.0, (0, 0), (0, 0))


def test_far_evaluation_warns():
    b = fock_basis(HomogeneousWeight.radial_weight(2), 1.0, 8)
    assert bergman_eval(b, None, 1.0, (3.0, 0), (3.0, 0)).warning is not None


def test_nonelliptic_weight_rejected():
    with pytest.raises(UnsupportedWeightError):
        gram_matrix(HomogeneousWeight.from_poly("p1**2*p2**2"), 1.0, 4)


def test_quadrature_doubling_is_stable():
    a = gram_matrix(ELLIPTIC, 1.0, 12)
    b = gram_matrix(ELLIPTIC, 1.0, 12, n_theta=4 * a.n_theta)
    assert np.abs(a.dense() - b.dense()).max() <= max(a.err_est, 1e-15) * np.abs(a.dense()).max() * 10


# --- scaling law


def test_scaling_identity_case():
    assert scaling_deviation(HomogeneousWeight.radial_weight(4), [1]).deviation == 0


@pytest.mark.parametrize("r", [2, 4])
def test_radial_scaling(r):
    assert scaling_deviation(HomogeneousWeight.radial_weight(r), [1, 10, 100]).deviation <= 1e-8


def test_elliptic_scaling_bounded_by_err_est():
    rep = scaling_deviation(ELLIPTIC, [1, 16])
    assert rep.deviation <= 1e-6
    assert rep.deviation <= rep.err_est


@given(st.floats(0.1, 50.0))
def test_scaling_is_exact_for_any_t(t):
    rep = scaling_deviation(HomogeneousWeight.radial_weight(3), [t], nmax=24)
    assert rep.deviation <= max(rep.err_est, 1e-13)


# --- Neumann series


def test_zero_perturbation_gives_unperturbed_kernel():
    t, r = 4.0, 2
    w = HomogeneousWeight.radial_weight(r).with_perturbation(Perturbation.from_poly("0", 3 * t ** (-1 / r)))
    res = neumann_corrected_kernel(w, t, N=3, nmax=24)
    grid = polar_grid(0.4)
    B0 = fock_basis(HomogeneousWeight.radial_weight(r), t, 24).kernel(grid, grid)
    np.testing.assert_allclose(res.corrected(grid, grid), B0, atol=1e-13)
    assert np.abs(res.R(grid, grid)).max() < 1e-15
    assert max(res.defects.values()) < 1e-12


@pytest.fixture(scope="module")
def cubic_result():
    t = 4.0
    w = HomogeneousWeight.radial_weight(2).with_perturbation(cubic_perturbation(0.05, t, 2))
    return neumann_corrected_kernel(w, t, N=5)


def test_neumann_defects_decrease(cubic_result):
    d = cubic_result.defects
    assert d[3] < d[1] and d[3] < 1e-3
    assert all(d[n + 1] < d[n] for n in range(1, 5))


def test_correction_operator_anti_hermitian(cubic_result):
    assert cubic_result.anti_hermitian <= cubic_result.err_est
    assert cubic_result.anti_hermitian_matrix <= cubic_result.err_est


def test_direct_kernel_is_hermitian(cubic_result):
    grid = polar_grid(0.4)
    K = cubic_result.direct(grid, grid)
    assert np.abs(K - K.conj().T).max() < 1e-12


@pytest.mark.parametrize(
    "kwargs",
    [{"N": 0}, {"cutoff_radius": 0.1}],
)
def test_neumann_configuration_errors(kwargs):
    t = 4.0
    cut = kwargs.pop("cutoff_radius", None)
    w = HomogeneousWeight.radial_weight(2).with_perturbation(cubic_perturbation(0.05, t, 2, cut))
    with pytest.raises(ConfigurationError):
        neumann_corrected_kernel(w, t, **kwargs)


def test_neumann_needs_perturbation():
    with pytest.raises(ConfigurationError):
        neumann_corrected_kernel(HomogeneousWeight.radial_weight(2), 4.0)
