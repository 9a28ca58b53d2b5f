import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spadetect.errors import DegenerateRootWarning
from spadetect.interfero import exact_power_sums
from spadetect.spectrum import (characteristic_coefficients, companion_roots, elementary_symmetric,
                                highprec_dps, lambda_min_sensitivity, min_eigenvalue,
                                newton_spectrum, newton_spectrum_highprec, power_sums_of,
                                project_simplex)

BELL_SPA_SUMS = [1, 7 / 27, 67 / 972, 163 / 8748]


def well_separated(rng, m, gap=0.05):
    while True:
        lam = np.sort(rng.dirichlet(np.ones(m)))
        if np.min(np.diff(lam)) >= gap:
            return lam


def test_bell_spa_power_sums_by_direct_summation():
    lam = np.array([1 / 6, 5 / 18, 5 / 18, 5 / 18])
    np.testing.assert_allclose(power_sums_of(lam), BELL_SPA_SUMS, rtol=0, atol=1e-16)


def test_elementary_symmetric_small_case():
    lam = np.array([0.5, 0.3, 0.2])
    e = elementary_symmetric(power_sums_of(lam))
    np.testing.assert_allclose(e, [1, 1.0, 0.5 * 0.3 + 0.5 * 0.2 + 0.3 * 0.2, 0.03], atol=1e-15)
    np.testing.assert_allclose(characteristic_coefficients(power_sums_of(lam)), np.poly(lam), atol=1e-15)


def test_companion_roots():
    np.testing.assert_allclose(np.sort(companion_roots([1, -3, 2]).real), [1, 2])
    assert companion_roots([1.0]).size == 0


@pytest.mark.parametrize("sums, expected", [
    ([1, 0.5], [0.5, 0.5]),
    ([1, 1, 1], [0, 0, 1]),
])
def test_simple_examples(sums, expected):
    est = newton_spectrum(sums)
    np.testing.assert_allclose(est.eigenvalues, expected, atol=1e-7)


def test_bell_spa_spectrum_recovered():
    est = newton_spectrum(BELL_SPA_SUMS)
    assert abs(est.lambda_min - 1 / 6) <= 1e-12
    assert est.lambda_min_std_error == 0
    # the triple root 5/18 splits by ~eps^(1/3) under rounding
    np.testing.assert_allclose(est.eigenvalues, [1 / 6, 5 / 18, 5 / 18, 5 / 18], atol=1e-5)
    assert abs(np.sum(est.eigenvalues) - 1) <= 1e-10


def test_maximally_mixed_flags_degenerate_root():
    est = newton_spectrum([1, 1 / 4, 1 / 16, 1 / 64])
    assert est.degenerate
    with pytest.warns(DegenerateRootWarning):
        lam, se = min_eigenvalue(est)
    assert abs(lam - 0.25) < 1e-4
    assert se == 0


def test_pure_state_m4():
    est = newton_spectrum([1, 1, 1, 1])
    assert abs(est.lambda_min) < 1e-4
    assert abs(est.eigenvalues[-1] - 1) < 1e-12


def test_simple_root_no_warning():
    est = newton_spectrum(power_sums_of([0.1, 0.2, 0.3, 0.4]))
    assert not est.degenerate and est.consistent
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        min_eigenvalue(est)


def test_round_trip_random_simplex():
    rng = np.random.default_rng(11)
    worst = 0.0
    for i in range(1000):
        m = (2, 3, 4)[i % 3]
        lam = np.sort(rng.dirichlet(np.ones(m)))
        est = newton_spectrum(power_sums_of(lam))
        worst = max(worst, np.max(np.abs(est.eigenvalues - lam)))
    assert worst <= 1e-8


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 1.0))
def test_two_level_closed_form(p2):
    p1 = 1.0
    closed = (p1 - np.sqrt(2 * p2 - p1 ** 2)) / 2
    assert abs(newton_spectrum([p1, p2]).lambda_min - closed) <= 1e-12


def test_sum_rule_under_noise():
    rng = np.random.default_rng(12)
    for _ in range(500):
        m = int(rng.integers(2, 5))
        p = power_sums_of(rng.dirichlet(np.ones(m)))
        p[1:] += rng.normal(0, 1e-3, m - 1)
        est = newton_spectrum(p)
        assert abs(np.sum(est.eigenvalues) - p[0]) <= 1e-6


def test_sensitivity_matches_monte_carlo():
    """Finite-difference std agrees with the empirical spread on separated spectra."""
    rng = np.random.default_rng(13)
    sigma = 1e-5
    for _ in range(10):
        lam = well_separated(rng, 4)
        p = power_sums_of(lam)
        err = np.r_[0, np.full(3, sigma)]
        predicted = newton_spectrum(p, errors=err).lambda_min_std_error
        draws = [newton_spectrum(p + err * rng.normal(size=4)).lambda_min for _ in range(2000)]
        assert np.std(draws) == pytest.approx(predicted, rel=0.1)


def test_noise_robustness():
    rng = np.random.default_rng(14)
    sigma = 1e-3
    ok = total = 0
    for _ in range(40):
        m = int(rng.integers(2, 5))
        lam = well_separated(rng, m)
        p = power_sums_of(lam)
        err = np.r_[0, np.full(m - 1, sigma)]
        std = newton_spectrum(p, errors=err).lambda_min_std_error
        for _ in range(25):
            shifted = newton_spectrum(p + err * rng.normal(size=m)).lambda_min
            ok += abs(shifted - lam[0]) <= 10 * std
            total += 1
    assert ok / total >= 0.95


def test_sensitivity_for_exact_inputs_is_finite():
    grad = lambda_min_sensitivity(power_sums_of([0.1, 0.3, 0.6]))
    assert np.all(np.isfinite(grad))


def test_inconsistent_sums_reported_not_corrected():
    est = newton_spectrum([1, 1.2, 1.0])
    assert not est.consistent
    assert est.to_dict()["consistent"] is False


def test_projection():
    est = newton_spectrum([1, 1.2, 1.0], project_to_simplex=True)
    proj = est.eigenvalues_projected
    assert np.all(proj >= 0) and abs(proj.sum() - 1) < 1e-12
    assert "eigenvalues_projected" in est.to_dict()
    np.testing.assert_allclose(project_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    np.testing.assert_allclose(project_simplex([-1.0, 2.0]), [0.0, 1.0])


def test_input_validation():
    with pytest.raises(ValueError):
        newton_spectrum([1, 0.5], m=3)
    with pytest.raises(ValueError):
        newton_spectrum([1, 0.5], errors=[0.1])


def test_highprec_resolves_repeated_roots():
    lam = np.array([0.1, 0.3, 0.3, 0.3])
    est = newton_spectrum_highprec(exact_power_sums(np.diag(lam), 4, highprec_dps(4)))
    np.testing.assert_allclose(est.eigenvalues, lam, atol=1e-15)
    assert est.consistent and not est.degenerate
    est = newton_spectrum_highprec(exact_power_sums(np.eye(9) / 9, 9, highprec_dps(9)))
    np.testing.assert_allclose(est.eigenvalues, np.full(9, 1 / 9), atol=1e-15)


def test_highprec_random_spectra():
    rng = np.random.default_rng(15)
    for m in (2, 4, 9):
        for _ in range(10):
            lam = np.sort(rng.dirichlet(np.ones(m)))
            est = newton_spectrum_highprec(power_sums_of(lam))
            np.testing.assert_allclose(est.eigenvalues, lam, atol=1e-12)


def test_highprec_falls_back_for_non_real_moments():
    est = newton_spectrum_highprec([1, 1.2, 1.0])
    ref = newton_spectrum([1, 1.2, 1.0])
    np.testing.assert_allclose(est.eigenvalues_raw, ref.eigenvalues_raw, atol=1e-12)
    assert not est.consistent
