import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymerlab.chaos import (
    chaos_decompose,
    influence,
    influence_by_conditional_variance,
    noise_grid,
    order_variance,
    order_variances,
    polymer_max_influence,
)
from polymerlab.disorder import DisorderField, log_mgf, sigma2
from polymerlab.moments import second_moment_exact


def test_order_zero_total_is_one(gaussian_spec):
    dec = chaos_decompose(DisorderField(gaussian_spec, 1), gaussian_spec, 0.5, 5)
    assert dec.order_totals[0] == 1.0


def test_first_order_hand_expansion(gaussian_spec):
    beta = 0.7
    lam = log_mgf(gaussian_spec, beta)
    sig = math.sqrt(sigma2(gaussian_spec, beta))
    fld = DisorderField(gaussian_spec, 31)
    dec = chaos_decompose(fld, gaussian_spec, beta, 1)
    xi = [(math.exp(beta * fld.values_at(1, [(x,)])[0] - lam) - 1.0) / sig
          for x in (1, -1)]
    assert abs(dec.order_totals[1] - sig * 0.5 * (xi[0] + xi[1])) <= 1e-15
    assert abs(1.0 + dec.order_totals[1] - dec.transfer_value) <= 1e-15


@pytest.mark.parametrize("seed,beta,n,d", [
    (5, 0.8, 6, 1), (6, 1.2, 6, 1), (9, 0.5, 8, 2), (12, 0.3, 10, 1),
])
def test_chaos_sum_equals_transfer_matrix(gaussian_spec, seed, beta, n, d):
    fld = DisorderField(gaussian_spec, seed)
    dec = chaos_decompose(fld, gaussian_spec, beta, n, dimension=d)
    assert dec.rel_error <= 1e-10


def test_zero_beta_degenerate_decomposition(gaussian_spec):
    dec = chaos_decompose(DisorderField(gaussian_spec, 2), gaussian_spec, 0.0, 7)
    assert dec.order_totals[0] == 1.0
    assert np.all(dec.order_totals[1:] == 0.0)
    assert dec.transfer_value == 1.0


def test_order_variance_examples(gaussian_spec):
    assert order_variance(gaussian_spec, 0.9, 4, 0, 1) == 0.0
    expect = sigma2(gaussian_spec, 0.9) * 0.5
    assert abs(order_variance(gaussian_spec, 0.9, 1, 1, 1) - expect) <= 1e-14


@pytest.mark.parametrize("d,beta,n", [(1, 0.8, 10), (2, 0.6, 8), (3, 0.5, 8)])
def test_order_variances_sum_to_second_moment(gaussian_spec, d, beta, n):
    """Chaos orthogonality: 1 + sum_k E[T_k^2] = E[W_n^2]."""
    total = 1.0 + order_variances(gaussian_spec, beta, n, d).sum()
    exact = second_moment_exact(gaussian_spec, beta, n, d)
    assert abs(total - exact) / exact <= 1e-10


def test_order_variance_matches_monte_carlo(bernoulli_spec):
    beta, n, k, reps = 0.8, 6, 2, 4000
    samples = np.empty(reps)
    for r in range(reps):
        dec = chaos_decompose(DisorderField(bernoulli_spec, 5000 + r),
                              bernoulli_spec, beta, n)
        samples[r] = dec.order_totals[k]
    target = order_variance(bernoulli_spec, beta, n, k, 1)
    emp = float((samples ** 2).mean())
    se = float((samples ** 2).std(ddof=1) / math.sqrt(reps))
    assert abs(emp - target) <= 5 * se
    assert abs(samples.mean()) <= 5 * samples.std(ddof=1) / math.sqrt(reps)


def test_order_orthogonality_monte_carlo(bernoulli_spec):
    """Empirical covariance of distinct order totals is consistent with 0."""
    beta, n, reps = 0.7, 8, 10_000
    t2 = np.empty(reps)
    t3 = np.empty(reps)
    for r in range(reps):
        dec = chaos_decompose(DisorderField(bernoulli_spec, 9000 + r),
                              bernoulli_spec, beta, n)
        t2[r], t3[r] = dec.order_totals[2], dec.order_totals[3]
    prod = t2 * t3
    se = prod.std(ddof=1) / math.sqrt(reps)
    assert abs(prod.mean() - t2.mean() * t3.mean()) <= 5 * se


def test_influence_sparse_kernel_examples():
    assert influence({frozenset(["a", "b"]): 1.0}, "a") == 1.0
    assert influence({}, "z") == 0.0
    kern = {("a",): 0.4, ("a", "b"): -1.2, ("b", "c"): 0.7}
    assert abs(influence(kern, "a") - (0.4 ** 2 + 1.2 ** 2)) <= 1e-15


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1,
                max_size=4),
       st.lists(st.floats(-2, 2, allow_nan=False), min_size=4, max_size=4))
@settings(max_examples=30, deadline=None)
def test_influence_equals_conditional_variance(pairs, coeffs):
    kern = {}
    for (a, b), c in zip(pairs, coeffs):
        key = frozenset({a, b})
        kern[key] = kern.get(key, 0.0) + c
    for site in (0, 1, 2):
        closed = influence(kern, site)
        brute = influence_by_conditional_variance(kern, site)
        assert abs(closed - brute) <= 1e-12


def test_polymer_influence_single_step(gaussian_spec):
    res = polymer_max_influence(gaussian_spec, 0.7, 1, 1)
    assert abs(res.max_value - sigma2(gaussian_spec, 0.7) * 0.25) <= 1e-14
    assert res.argmax_time == 1


def test_polymer_influence_matches_brute_force(bernoulli_spec):
    """d=1, n<=3: conditional variance by full disorder enumeration."""
    beta, n = 0.8, 3
    lam = log_mgf(bernoulli_spec, beta)
    sites = [(t, x) for t in range(1, n + 1) for x in range(-t, t + 1, 2)]

    def w_of(omega):
        total = 0.0
        for steps in itertools.product((-1, 1), repeat=n):
            x, e = 0, 0.0
            for t, s in enumerate(steps, 1):
                x += s
                e += beta * omega[(t, x)] - lam
            total += math.exp(e) / 2 ** n
        return total

    def brute_influence(site):
        others = [s for s in sites if s != site]
        acc = 0.0
        for vals in itertools.product((-1.0, 1.0), repeat=len(others)):
            om = dict(zip(others, vals))
            w_pair = []
            for v in (-1.0, 1.0):
                om[site] = v
                w_pair.append(w_of(om))
            mean = 0.5 * sum(w_pair)
            acc += 0.5 * sum((w - mean) ** 2 for w in w_pair)
        return acc / 2 ** len(others)

    res = polymer_max_influence(bernoulli_spec, beta, n, 1)
    brute = max(brute_influence(s) for s in sites)
    assert abs(res.max_value - brute) <= 1e-10


def test_normalized_influence_decreases_in_l2_regime(gaussian_spec):
    vals = [polymer_max_influence(gaussian_spec, 0.3, n, 3).normalized_max
            for n in (4, 8, 16)]
    assert vals[0] > vals[1] > vals[2]


def _xi_excess_kurtosis(spec, beta):
    """Exact excess kurtosis of the normalized noise, from the mgf ladder."""
    lam = [log_mgf(spec, k * beta) for k in range(5)]
    a = [math.exp(lam[k] - k * lam[1]) for k in range(5)]
    m4 = a[4] - 4 * a[3] + 6 * a[2] - 4 * a[0] + 1  # E[(e^{bw-l}-1)^4]
    s2 = a[2] - 1.0
    return m4 / s2 ** 2 - 3.0


def test_fourth_moment_trend_toward_gaussian(gaussian_spec):
    """Order-1 chaos totals approach gaussian kurtosis as the horizon grows (d = 2).

    For a multilinear sum T_1 = sigma sum q_t(x) xi_{t,x} the fourth moment
    is 3 + kappa_xi * sum psi^4 / (sum psi^2)^2 exactly; in d = 2 the weight
    ratio vanishes with n, which is the fourth-moment route to gaussianity.
    (At fixed beta, d = 3, the endpoint W_n - 1 converges to a non-gaussian
    limit instead, so the probe lives where the theorem is actually applied.)
    """
    from polymerlab.walks import WalkSpec, build_heat_table
    beta = 0.5
    kappa = _xi_excess_kurtosis(gaussian_spec, beta)
    table = build_heat_table(WalkSpec(2, 32))
    q2 = np.array([(table.slices[t] ** 2).sum() for t in range(1, 33)])
    q4 = np.array([(table.slices[t] ** 4).sum() for t in range(1, 33)])

    def excess(n):
        return kappa * q4[:n].sum() / q2[:n].sum() ** 2

    exact = {n: excess(n) for n in (4, 8, 32)}
    assert abs(exact[32]) < abs(exact[8]) < abs(exact[4])

    # empirical validation of the kurtosis at n = 8 (direct T_1 sampling)
    from polymerlab import _bits
    from polymerlab.disorder import _uniform_to_value
    n, reps = 8, 30_000
    sig = math.sqrt(sigma2(gaussian_spec, beta))
    lam = log_mgf(gaussian_spec, beta)
    t1 = np.zeros(reps)
    rep_ids = np.arange(reps, dtype=np.int64).reshape(-1, 1, 1)
    for t in range(1, n + 1):
        xs = np.arange(-t, t + 1, dtype=np.int64)
        u = _bits.uniform_sites(60_001, _bits.TAG_SITE, t,
                                [rep_ids, xs.reshape(-1, 1), xs])
        xi = (np.exp(beta * _uniform_to_value(gaussian_spec, u) - lam) - 1.0) / sig
        t1 += sig * (table.slices[t][None, :, :] * xi).sum(axis=(1, 2))
    z = (t1 - t1.mean()) / t1.std(ddof=1)
    m4 = float((z ** 4).mean())
    se = float((z ** 4).std(ddof=1) / math.sqrt(reps))
    assert abs(m4 - (3.0 + exact[n])) <= 5 * se


def test_noise_grid_moments(gaussian_spec):
    fld = DisorderField(gaussian_spec, 3)
    xi = noise_grid(fld, gaussian_spec, 0.5, 1, (0,), (200000,))
    se = 1.0 / math.sqrt(xi.size)
    assert abs(xi.mean()) <= 5 * se * xi.std()
    assert abs(xi.var() - 1.0) <= 0.02
