import math

import numpy as np
import pytest

from polymerlab.disorder import DisorderField, DisorderSpec
from polymerlab.scaling import (
    critical_window_beta,
    field_average,
    g_theta,
    interm_beta,
    lognormal_experiment,
)
from polymerlab.walks import WalkSpec, collision_sum


def test_interm_beta_examples():
    assert interm_beta(100, 0.0) == 0.0
    r = collision_sum(WalkSpec(2, 10_000)).values[-1]
    assert abs(interm_beta(10_000, 1.0) - 1.0 / math.sqrt(r)) <= 1e-15
    with pytest.raises(ValueError):
        interm_beta(100, -0.5)


def test_interm_beta_log_scaling():
    n = 1000
    ratio = interm_beta(n * n, 1.0) / interm_beta(n, 1.0)
    assert abs(ratio - 1.0 / math.sqrt(2.0)) / (1.0 / math.sqrt(2.0)) <= 0.10


def test_critical_window_defining_equation(gaussian_spec):
    from polymerlab.disorder import sigma2
    for theta in (-1.0, 0.0, 1.0):
        res = critical_window_beta(4096, theta)
        assert abs(res.residual) <= 1e-9
        lhs = sigma2(gaussian_spec, res.value) * res.overlap
        assert abs(lhs - 1.0 - theta / math.log(4096)) <= 1e-9


def test_critical_window_monotone_in_theta():
    assert critical_window_beta(10_000, 1.0).value > critical_window_beta(
        10_000, 0.0).value


def test_critical_window_domain_error():
    with pytest.raises(ValueError):
        critical_window_beta(8, -30.0)


def test_lognormal_variance_formula():
    # sigma_hat^2 = log 1/(1 - beta_hat^2)
    res = lognormal_experiment(DisorderSpec.bernoulli(), 0.6, 64, 8, seed=1,
                               box_mult=8.0)
    assert abs(res.sigma2_target - math.log(1.0 / 0.64)) <= 1e-15


def test_lognormal_zero_beta_hat_is_deterministic():
    res = lognormal_experiment(DisorderSpec.bernoulli(), 0.0, 32, 5, seed=2,
                               box_mult=6.0)   # box covers the whole cone
    assert np.abs(res.samples).max() <= 1e-12
    assert res.sigma2_target == 0.0


def test_field_average_zero_test_function(bernoulli_spec):
    fld = DisorderField(bernoulli_spec, 3)
    res = field_average(fld, bernoulli_spec, 0.4, 16, 2,
                        lambda x, y: np.zeros_like(x), "d2_interm")
    assert res.value == 0.0


def test_field_average_zero_beta_exact(bernoulli_spec):
    # pad covers the horizon, so W_n(x) = 1 exactly and the centred sum vanishes
    fld = DisorderField(bernoulli_spec, 4)
    res = field_average(fld, bernoulli_spec, 0.0, 16, 2,
                        lambda x, y: np.exp(-(x ** 2 + y ** 2)), "d2_interm",
                        support_radius=1.0, pad_mult=4.0)
    assert abs(res.value) <= 1e-12


def test_field_average_linear_in_test_function(bernoulli_spec):
    fld = DisorderField(bernoulli_spec, 9)

    def phi(x, y):
        return np.exp(-(x ** 2 + y ** 2))

    def psi(x, y):
        return np.cos(x) * np.exp(-np.abs(y))

    a, b = 1.7, -0.4
    f1 = field_average(fld, bernoulli_spec, 0.3, 32, 2, phi, "d2_interm")
    f2 = field_average(fld, bernoulli_spec, 0.3, 32, 2, psi, "d2_interm")
    f3 = field_average(fld, bernoulli_spec, 0.3, 32, 2,
                       lambda x, y: a * phi(x, y) + b * psi(x, y), "d2_interm")
    assert abs(f3.value - (a * f1.value + b * f2.value)) <= 1e-12 * max(
        1.0, abs(f3.value))


def test_field_average_mode_validation(bernoulli_spec):
    fld = DisorderField(bernoulli_spec, 1)
    with pytest.raises(ValueError):
        field_average(fld, bernoulli_spec, 0.3, 8, 3,
                      lambda x, y, z: np.zeros_like(x), "d2_interm")
    with pytest.raises(ValueError):
        field_average(fld, bernoulli_spec, 0.3, 8, 2,
                      lambda x, y: np.zeros_like(x), "d3_subL2")
    with pytest.raises(ValueError):
        field_average(fld, bernoulli_spec, 0.3, 8, 2,
                      lambda x, y: np.zeros_like(x), "bogus")


def test_field_average_centred_replicas(bernoulli_spec):
    """Unamplified centred field mean is 0 within Monte Carlo error."""
    vals = []
    for r in range(60):
        fld = DisorderField(bernoulli_spec, 500 + r)
        res = field_average(fld, bernoulli_spec, 0.35, 36, 2,
                            lambda x, y: np.exp(-(x ** 2 + y ** 2)), "d2_interm")
        vals.append(res.value)
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean()) <= 5 * se


def test_g_theta_positive_and_monotone():
    vals = [g_theta(th, 0.8) for th in (-1.0, 0.0, 1.0)]
    assert all(v > 0 for v in vals)
    assert vals[0] < vals[1] < vals[2]


def test_g_theta_self_consistency():
    for t in (0.3, 1.0, 4.0):
        coarse = g_theta(0.5, t, eps=1e-6)
        fine = g_theta(0.5, t, eps=1e-7)
        assert abs(coarse - fine) / fine <= 10 * 1e-6


def test_g_theta_domain():
    with pytest.raises(ValueError):
        g_theta(0.0, 0.0)
    with pytest.raises(ValueError):
        g_theta(0.0, -1.0)
