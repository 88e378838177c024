"""Intermediate-disorder scalings and averaged-field experiments.

Temperature is tied to the horizon through the exact replica overlap R_n
(never its logarithmic asymptotic: at desk-scale n the correction terms are
not negligible).  Includes the d = 2 subcritical log-normal experiment, the
critical-window solver, diffusively averaged partition-function fields in
d = 2 and d >= 3, and the scalar kernel G_theta of the critical-window
covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import _bits
from ._parallel import map_replicas
from .disorder import DisorderField, DisorderSpec, sigma2
from .partition import forward_partition, multi_start_values
from .walks import WalkSpec, collision_sum

EULER_GAMMA = float(np.euler_gamma)   # the gamma in G_theta, not an exponent


def interm_beta(n: int, beta_hat: float, d: int = 2,
                overlap: float | None = None) -> float:
    """beta_n = beta_hat / sqrt(R_n) with the exactly summed overlap."""
    if beta_hat < 0:
        raise ValueError("beta_hat must be nonnegative")
    if overlap is None:
        overlap = float(collision_sum(WalkSpec(d, n)).values[-1])
    return beta_hat / math.sqrt(overlap)


@dataclass(frozen=True)
class CriticalWindowBeta:
    value: float
    residual: float     # sigma^2(beta_n) R_n - 1 - theta/log n
    overlap: float


def critical_window_beta(n: int, theta: float,
                         spec: DisorderSpec | None = None) -> CriticalWindowBeta:
    """Solve sigma^2(beta_n) = (1/R_n)(1 + theta/log n) by monotone bracketing."""
    if spec is None:
        spec = DisorderSpec.gaussian()
    r_n = float(collision_sum(WalkSpec(2, n)).values[-1])
    target = (1.0 + theta / math.log(n)) / r_n
    if target <= 0:
        raise ValueError("theta is too negative for this n: target sigma^2 <= 0")
    hi = 1.0
    while sigma2(spec, hi) < target:
        hi *= 2.0
    root = brentq(lambda b: sigma2(spec, b) - target, 0.0, hi, xtol=1e-14, rtol=1e-15)
    residual = sigma2(spec, root) * r_n - 1.0 - theta / math.log(n)
    return CriticalWindowBeta(float(root), float(residual), r_n)


# ------------------------------------------------------- log-normal experiment

def _lognormal_replica(args):
    spec, beta_n, n, rad, seed = args
    fld = DisorderField(spec, seed)
    run = forward_partition(fld, spec, beta_n, n, start=(0, 0),
                            keep_slices=False, box_radius=rad)
    return float(run.log_w[-1])


@dataclass(frozen=True)
class LogNormalResult:
    beta_hat: float
    n: int
    beta_n: float
    samples: np.ndarray = field(repr=False)
    fitted_mean: float
    fitted_var: float
    sigma2_target: float      # log 1/(1 - beta_hat^2)
    ks_distance: float        # reported, not gated: convergence is log-slow


@dataclass(frozen=True)
class MedianTrajectory:
    beta_hat: float
    n_grid: tuple
    medians: np.ndarray
    strictly_decreasing: bool


def lognormal_experiment(spec: DisorderSpec, beta_hat: float, n, replicas: int,
                         seed: int = 0, box_mult: float = 2.5,
                         workers: int = 1):
    """Distribution of log W_n under beta_n = beta_hat / sqrt(R_n) in d = 2.

    For beta_hat < 1 returns the sampled log W with fitted mean/variance
    against the log-normal target (mean -s^2/2, variance s^2 with
    s^2 = log 1/(1-beta_hat^2)).  For beta_hat >= 1 the limit is 0, so ``n``
    is read as a horizon grid and the median trajectory of W_n is returned.
    The spatial window is box_mult diffusive widths (documented truncation).
    """
    if beta_hat < 0:
        raise ValueError("beta_hat must be nonnegative")
    if beta_hat >= 1.0:
        n_grid = tuple(int(v) for v in np.atleast_1d(n))
        medians = []
        for n_i in n_grid:
            beta_n = interm_beta(n_i, beta_hat)
            rad = max(int(box_mult * math.sqrt(n_i)), 8)
            args = [(spec, beta_n, n_i, rad, _bits.scalar_stream(seed, 42, n_i, r))
                    for r in range(replicas)]
            logs = np.array(map_replicas(_lognormal_replica, args, workers))
            medians.append(float(np.exp(np.median(logs))))
        medians = np.array(medians)
        return MedianTrajectory(beta_hat, n_grid, medians,
                                bool(np.all(np.diff(medians) < 0)))
    n = int(n)
    beta_n = interm_beta(n, beta_hat)
    rad = max(int(box_mult * math.sqrt(n)), 8)
    args = [(spec, beta_n, n, rad, _bits.scalar_stream(seed, 42, n, r))
            for r in range(replicas)]
    samples = np.array(map_replicas(_lognormal_replica, args, workers))
    s2 = math.log(1.0 / (1.0 - beta_hat ** 2)) if beta_hat > 0 else 0.0
    if s2 > 0:
        from .harness import ks_statistic
        from scipy.stats import norm
        ks = ks_statistic(samples, lambda x: norm.cdf(x, loc=-s2 / 2.0, scale=math.sqrt(s2)))
    else:
        ks = float(np.max(np.abs(samples)))
    return LogNormalResult(
        beta_hat=beta_hat, n=n, beta_n=beta_n, samples=samples,
        fitted_mean=float(samples.mean()),
        fitted_var=float(samples.var(ddof=1)) if replicas > 1 else 0.0,
        sigma2_target=s2, ks_distance=float(ks),
    )


# ----------------------------------------------------------- averaged fields

@dataclass(frozen=True)
class FieldAverage:
    value: float              # averaged field with its n-dependent amplification
    raw_sum: float            # sum_x phi(x/sqrt n) (W_n(x) - 1)
    mode: str
    n: int
    lo: tuple
    w_values: np.ndarray = field(repr=False)
    phi_values: np.ndarray = field(repr=False)


def field_average(field_: DisorderField, spec: DisorderSpec, beta: float, n: int,
                  d: int, phi, mode: str, support_radius: float = 2.0,
                  pad_mult: float = 4.0) -> FieldAverage:
    """Diffusively averaged, centred partition-function field for one realisation.

    ``phi`` is sampled on the rescaled lattice grid x / sqrt(n) over a box of
    ``support_radius`` diffusive widths; W_n(x) for every start x comes from
    one adjoint sweep whose working window is padded by ``pad_mult`` widths
    (paths beyond it are dropped; exact when pad covers the whole horizon).

    Modes: ``d2_interm`` applies sqrt(R_n)/n; ``d3_subL2`` applies the
    n^((d-2)/4) amplification on top of the n^(-d/2) lattice normalization.
    """
    if mode not in ("d2_interm", "d3_subL2"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "d2_interm" and d != 2:
        raise ValueError("d2_interm needs d = 2")
    if mode == "d3_subL2" and d < 3:
        raise ValueError("d3_subL2 needs d >= 3")
    half = int(math.ceil(support_radius * math.sqrt(n)))
    shape = (2 * half + 1,) * d
    lo = (-half,) * d
    pad = min(n, int(pad_mult * math.sqrt(n)) + 1)
    w_vals = multi_start_values(field_, spec, beta, n, lo, shape, pad=pad)
    axes = [np.arange(-half, half + 1) / math.sqrt(n)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    phi_vals = np.asarray(phi(*mesh), dtype=float)
    raw = float((phi_vals * (w_vals - 1.0)).sum())
    if mode == "d2_interm":
        r_n = float(collision_sum(WalkSpec(2, n)).values[-1])
        value = math.sqrt(r_n) / n * raw
    else:
        value = n ** ((d - 2) / 4.0) * n ** (-d / 2.0) * raw
    return FieldAverage(value=value, raw_sum=raw, mode=mode, n=n, lo=lo,
                        w_values=w_vals, phi_values=phi_vals)


def g_theta(theta: float, t: float, eps: float = 1e-8) -> float:
    """Scalar critical-window kernel: int_0^inf e^{(theta-gamma)s} s t^{s-1} / Gamma(s+1) ds.

    Adaptive quadrature after truncating where the integrand falls below
    eps times its peak (the integrand decays super-exponentially through
    1/Gamma(s+1)); relative target eps.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    from scipy.special import gammaln

    def integrand(s):
        if s <= 0:
            return 0.0
        return math.exp((theta - EULER_GAMMA) * s + (s - 1.0) * math.log(t)
                        + math.log(s) - gammaln(s + 1.0))

    s_grid = np.linspace(1e-9, 10.0, 2001)
    vals = np.array([integrand(s) for s in s_grid])
    peak = float(vals.max())
    s_peak = float(s_grid[int(np.argmax(vals))])
    hi = max(s_peak * 2.0, 10.0)
    while integrand(hi) > eps * peak:
        hi *= 2.0
    val, _err = quad(integrand, 0.0, hi, epsabs=eps * peak, epsrel=eps, limit=400)
    return float(val)
