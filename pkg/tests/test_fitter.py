import json
from math import pi

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftkl.egg import boundary_samples
from ftkl.errors import DomainError
from ftkl.fitter import basis_labels, design_matrix, estimate_leading_exponent, fit_power_log
from ftkl.fock import HomogeneousWeight, fock_basis

RHO = -np.logspace(-1, -6, 26)


def samples(f, rho=RHO):
    return np.column_stack([rho, f(-rho)])


def test_single_power_recovered():
    F = fit_power_log(samples(lambda x: 5 * x**-3.0), 2)
    assert F.a[0] == pytest.approx(5, rel=1e-12)
    assert F.residual < 1e-12
    assert np.all(np.abs(F.a[1:]) < 1e-8) and np.all(np.abs(F.b) < 1e-8)


def test_egg_coefficient():
    S = boundary_samples(2, "degenerate", RHO)
    F = fit_power_log(S, 4)
    assert F.a[0] == pytest.approx(3 / (2 * pi**2), abs=1e-6)
    assert np.all(np.abs(F.a[1:]) < 1e-6)


def test_log_term_recovered():
    F = fit_power_log(samples(lambda x: x**-3.0 + 2 * np.log(x)), 2)
    assert F.b[0] == pytest.approx(2, abs=1e-8)
    assert F.a[0] == pytest.approx(1, rel=1e-12)


def test_exponent_of_pure_power():
    e = estimate_leading_exponent(samples(lambda x: x**-2.5))
    assert e.value == pytest.approx(2.5, abs=1e-4)


def test_exponent_of_egg_k3():
    e = estimate_leading_exponent(boundary_samples(3, "degenerate", RHO))
    assert e.value == pytest.approx(2 + 1 / 3, abs=1e-3)


def test_exponent_from_fock_scaling():
    w = HomogeneousWeight.radial_weight(4)
    ts = np.array([1.0, 4.0, 16.0, 64.0, 256.0])
    vals = [fock_basis(w, t, 4).kernel([[0, 0]], [[0, 0]])[0, 0].real for t in ts]
    # B_t(0,0) ~ t^{1/2} = x^{-1/2} with x = 1/t
    e = estimate_leading_exponent(np.column_stack([-1 / ts, vals]))
    assert e.value == pytest.approx(0.5, abs=1e-3)


@given(
    st.lists(st.floats(-3, 3), min_size=5, max_size=5),
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    st.sampled_from([2, 4, 6]),
)
def test_round_trip(a, b, r):
    a = [1.0] + a[1:]  # keep the leading term dominant enough for relative weighting
    x = -RHO
    f = design_matrix(x, r, 4, 1) @ np.array(a + b)
    if np.any(f <= 0):
        return
    F = fit_power_log(np.column_stack([RHO, f]), r)
    assert F.condition < 1e14
    tol = 1e-10 * F.condition
    np.testing.assert_allclose(F.a, a, atol=tol)
    np.testing.assert_allclose(F.b, b, atol=tol)


@given(st.floats(1e-3, 1e3), st.floats(0.1, 10.0), st.floats(1.5, 4.0))
def test_exponent_invariances(scale, c, e0):
    def f(x):
        return x**-e0 * (1 + 0.3 * x**0.5)

    base = estimate_leading_exponent(samples(f)).value
    scaled = estimate_leading_exponent(np.column_stack([RHO, scale * f(-RHO)])).value
    stretched = estimate_leading_exponent(np.column_stack([c * RHO, f(-RHO)])).value
    assert scaled == pytest.approx(base, abs=1e-10)
    assert stretched == pytest.approx(base, abs=1e-10)


def test_intervals_bracket_coefficients():
    F = fit_power_log(samples(lambda x: 2 * x**-3.0 + x**-2.5), 2)
    for lab, coef in zip(basis_labels(2, 4, 1), F.a + F.b):
        lo, hi = F.intervals[lab]
        assert lo <= coef <= hi


def test_rank_deficient_basis_flagged():
    # three distinct abscissae cannot resolve seven basis functions
    rho = np.repeat([-1e-1, -1e-2, -1e-3], 3)
    F = fit_power_log(samples(lambda x: x**-3.0, rho), 2)
    assert F.rank_deficient
    assert any(np.isinf(hi - lo) for lo, hi in F.intervals.values())


def test_json_serializable():
    F = fit_power_log(samples(lambda x: x**-3.0), 2)
    json.dumps(F.to_json())
    assert F.residual_csv(-RHO).startswith("x,relative_residual\n")


@pytest.mark.parametrize(
    "data",
    [
        np.column_stack([np.full(8, 0.1), np.ones(8)]),  # rho positive
        np.column_stack([-np.logspace(-1, -2, 8), np.ones(8)]),  # one decade only
        np.column_stack([-np.logspace(-1, -4, 3), np.ones(3)]),  # too few samples
    ],
)
def test_bad_samples_rejected(data):
    with pytest.raises(DomainError):
        fit_power_log(data, 2)


def test_nonmonotone_samples_warn():
    data = samples(lambda x: x**-2.0 * (1.05 + np.sin(40 * np.log(x))))
    with pytest.warns(RuntimeWarning):
        e = estimate_leading_exponent(data)
    assert e.warning is not None
