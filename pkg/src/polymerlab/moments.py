"""Moment machinery for the weak/strong disorder dichotomy.

Exact second moments via the two-replica difference walk, the L2 threshold
beta_2, exhaustive small-system disorder enumeration (fractional moments,
martingale mean), the fractional-moment decay coefficient r(gamma), the
first-meeting criterion for weak disorder, growth diagnostics for higher
moments, maximal-inequality tail checks, and the coarse-graining block
functional used in change-of-measure arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.signal import convolve

from . import _bits
from .chaos import noise_grid
from .disorder import DisorderField, DisorderSpec, lambda2, log_mgf, sigma2
from .partition import _conv_neighbors, forward_partition
from .walks import WalkSpec, collision_sum, escape_probability_info, return_probabilities


def _difference_step_kernel(d: int) -> np.ndarray:
    """Law of delta - delta' for two independent simple-walk steps: (5,)^d array."""
    q1 = np.zeros((3,) * d)
    for axis in range(d):
        idx = [1] * d
        idx[axis] = 0
        q1[tuple(idx)] = 1.0 / (2 * d)
        idx[axis] = 2
        q1[tuple(idx)] = 1.0 / (2 * d)
    return convolve(q1, q1[tuple(slice(None, None, -1) for _ in range(d))], method="direct")


def second_moment_exact(spec: DisorderSpec, beta: float, n: int, d: int,
                        method: str = "difference_walk") -> float:
    """E[(W_n)^2] = E over two replicas of exp(lambda_2 * #collisions).

    ``difference_walk`` runs the spatial transfer matrix of S - S' with a
    multiplicative boost at the origin; ``collision_series`` sums the
    collision-chain expansion (scales to n ~ 10^4 and is the independent
    cross-check).  Both are exact.
    """
    lam2 = lambda2(spec, beta)
    if method == "difference_walk":
        boost = math.exp(lam2)
        kd = _difference_step_kernel(d)
        rho = np.ones((1,) * d)
        for _ in range(n):
            rho = convolve(rho, kd, method="direct" if rho.size < 40000 else "auto")
            centre = tuple(s // 2 for s in rho.shape)
            rho[centre] *= boost
        return float(rho.sum())
    if method == "collision_series":
        s2 = math.expm1(lam2)
        r = return_probabilities(d, n)
        c = np.zeros(n + 1)
        for t in range(1, n + 1):
            prev = float(np.dot(c[1:t], r[t - 2::-1])) if t >= 2 else 0.0
            c[t] = s2 * (r[t - 1] + prev)
        return 1.0 + float(c[1:].sum())
    raise ValueError(f"unknown method {method!r}")


def second_moment_sup(spec: DisorderSpec, beta: float, d: int) -> float:
    """sup_n E[(W_n)^2] = 1 / (1 - sigma^2 (1-pi_d)/pi_d), +inf past beta_2."""
    if d <= 2:
        return math.inf if beta != 0.0 else 1.0
    pi_d = escape_probability_info(d, 1e-8).value
    x = sigma2(spec, beta) * (1.0 - pi_d) / pi_d
    return math.inf if x >= 1.0 else 1.0 / (1.0 - x)


@dataclass(frozen=True)
class L2Threshold:
    value: float
    degenerate: bool      # True in d <= 2 where any beta > 0 is strong disorder
    escape: float


def l2_threshold(spec: DisorderSpec, d: int, tol: float = 1e-6) -> L2Threshold:
    """beta_2: the root of sigma^2(beta) (1 - pi_d)/pi_d = 1.

    The map beta -> sigma^2(beta) is increasing on beta >= 0, so a bracketed
    root-find is sharp; d <= 2 returns 0 with the recurrence flag.
    """
    if d <= 2:
        return L2Threshold(0.0, True, 0.0)
    pi_d = escape_probability_info(d, min(tol, 1e-8)).value
    target = pi_d / (1.0 - pi_d)

    def g(beta):
        return sigma2(spec, beta) - target

    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("sigma^2 never reaches the threshold")
    root = brentq(g, 0.0, hi, xtol=tol)
    return L2Threshold(float(root), False, pi_d)


# ---------------------------------------------------------------- enumeration

def _cone_sites_1d(n: int) -> list[tuple[int, int]]:
    return [(t, x) for t in range(1, n + 1) for x in range(-t, t + 1, 2)]


def exact_enumeration_moment(spec: DisorderSpec, beta: float, n: int,
                             transform=None, weight_mode: str = "normalized",
                             max_sites: int = 28, chunk: int = 1 << 16) -> float:
    """E[f(W_n)] by exhausting every disorder configuration (d = 1).

    Exact for finite-support families; the cone for horizon n has n(n+3)/2
    sites, so the default budget allows n <= 6 for coin disorder.  Configs
    are evaluated in vectorised chunks: one forward sweep per chunk with a
    (configs, sites) value table.
    """
    values, probs = spec.finite_support()
    sites = _cone_sites_1d(n)
    m = len(sites)
    if m > max_sites:
        raise ValueError(f"{m} disorder sites exceed the enumeration budget {max_sites}")
    q = len(values)
    total_configs = q ** m
    lam = log_mgf(spec, beta) if weight_mode == "normalized" else 0.0
    if weight_mode == "normalized":
        wtab = np.exp(beta * values - lam)
    elif weight_mode == "raw":
        wtab = np.exp(beta * values)
    elif weight_mode == "product":
        wtab = 1.0 + beta * values
    else:
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    site_index = {s: j for j, s in enumerate(sites)}

    acc = 0.0
    for lo_cfg in range(0, total_configs, chunk):
        idx = np.arange(lo_cfg, min(lo_cfg + chunk, total_configs), dtype=np.int64)
        digits = np.empty((idx.size, m), dtype=np.int8)
        rem = idx.copy()
        for j in range(m):
            digits[:, j] = rem % q
            rem //= q
        cfg_prob = np.prod(probs[digits], axis=1)
        # column j at time t holds position x = -t + 2j; a +-1 step maps
        # column i at t-1 to columns i+1 / i at t
        u = np.ones((idx.size, 1))
        for t in range(1, n + 1):
            v = np.zeros((idx.size, t + 1))
            v[:, 1:] += 0.5 * u
            v[:, :t] += 0.5 * u
            w = np.empty((idx.size, t + 1))
            for j in range(t + 1):
                w[:, j] = wtab[digits[:, site_index[(t, -t + 2 * j)]]]
            v *= w
            u = v
        w_n = u.sum(axis=1)
        vals = w_n if transform is None else transform(w_n)
        acc += float(np.dot(vals, cfg_prob))
    return acc


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float | None
    mode: str
    replicas: int | None = None


def fractional_moment(spec: DisorderSpec, beta: float, gamma: float, n: int,
                      d: int = 1, mode: str = "mc", replicas: int = 2000,
                      seed: int = 0) -> MomentEstimate:
    """E[(W_n)^gamma] for gamma in (0, 1), exact or Monte Carlo."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if mode == "exact_enum":
        if d != 1:
            raise ValueError("exact enumeration is implemented for d = 1")
        val = exact_enumeration_moment(spec, beta, n, transform=lambda w: w ** gamma)
        return MomentEstimate(val, None, mode)
    if mode == "mc":
        out = np.empty(replicas)
        for r in range(replicas):
            fld = DisorderField(spec, _bits.scalar_stream(seed, 101, r))
            run = forward_partition(fld, spec, beta, n, start=(0,) * d, keep_slices=False)
            out[r] = math.exp(gamma * run.log_w[-1])
        return MomentEstimate(float(out.mean()),
                              float(out.std(ddof=1) / math.sqrt(replicas)),
                              mode, replicas)
    raise ValueError(f"unknown mode {mode!r}")


# --------------------------------------------------- fractional-decay checks

@dataclass(frozen=True)
class StrongDisorderCheck:
    holds: bool
    best_gamma: float
    r_min: float
    headline_lhs: float      # beta lambda'(beta) - lambda(beta)
    headline_rhs: float      # log(2d)
    headline_holds: bool
    gammas: np.ndarray
    r_values: np.ndarray


def strong_disorder_sufficient(spec: DisorderSpec, beta: float, d: int,
                               grid: int = 1000) -> StrongDisorderCheck:
    """Fractional-decay coefficient r(gamma) = (2d)^(1-gamma) e^(lambda(g b) - g lambda(b)).

    If min over gamma in (0,1) of r is < 1, E[(W_n)^gamma] decays
    geometrically and strong disorder holds.  The headline sufficient
    condition beta lambda'(beta) - lambda(beta) > log(2d) is evaluated with a
    central-difference derivative; r is log-convex in gamma, so the grid
    minimum plus golden-section refinement is reliable.
    """
    lam_b = log_mgf(spec, beta)

    def r_of(g: float) -> float:
        return (2 * d) ** (1.0 - g) * math.exp(log_mgf(spec, g * beta) - g * lam_b)

    gammas = np.linspace(1e-4, 1.0 - 1e-4, grid)
    r_values = np.array([r_of(g) for g in gammas])
    j = int(np.argmin(r_values))
    lo = gammas[max(j - 1, 0)]
    hi = gammas[min(j + 1, grid - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, bb = lo, hi
    c1 = bb - phi * (bb - a)
    c2 = a + phi * (bb - a)
    f1, f2 = r_of(c1), r_of(c2)
    for _ in range(60):
        if f1 < f2:
            bb, c2, f2 = c2, c1, f1
            c1 = bb - phi * (bb - a)
            f1 = r_of(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + phi * (bb - a)
            f2 = r_of(c2)
    g_best = 0.5 * (a + bb)
    r_best = r_of(g_best)
    h = 1e-5
    lam_prime = (log_mgf(spec, beta + h) - log_mgf(spec, beta - h)) / (2 * h)
    lhs = beta * lam_prime - lam_b
    rhs = math.log(2 * d)
    return StrongDisorderCheck(r_best < 1.0, g_best, r_best, lhs, rhs,
                               lhs > rhs, gammas, r_values)


# ------------------------------------------------------ first-meeting masses

def first_meeting_time_masses(d: int, n_max: int) -> np.ndarray:
    """P(two independent walks first meet at time n), n = 1..n_max.

    The difference walk returns to 0 with the renewal structure
    r(n) = sum_k f(k) r(n-k), and r(n) = p_{2n}(0); inverting gives the
    first-return (= first-meeting) masses exactly.
    """
    r = return_probabilities(d, n_max)
    f = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        prev = float(np.dot(f[1:n], r[n - 2::-1])) if n >= 2 else 0.0
        f[n] = r[n - 1] - prev
    return f[1:]


def first_meeting_masses_spatial(d: int, n_max: int) -> list[np.ndarray]:
    """P(first meeting happens at (n, x)) for n = 1..n_max, exact.

    Spatially resolved renewal inversion: with R_n(theta) =
    sum_x q_n(x)^2 e^{i theta x} (the meeting-point transform), the
    first-meeting transform satisfies V_n = R_n - sum_{k<n} V_k R_{n-k};
    inverse FFTs recover the masses.  Slice n is a (2n+1)^d array.
    """
    from .walks import build_heat_table
    grid = tuple(2 * n_max + 1 for _ in range(d))
    table = build_heat_table(WalkSpec(d, n_max))
    r_hat = []
    for n in range(1, n_max + 1):
        padded = np.zeros(grid)
        sl = tuple(slice(0, 2 * n + 1) for _ in range(d))
        padded[sl] = table.slices[n] ** 2
        padded = np.roll(padded, shift=tuple(-n for _ in range(d)),
                         axis=tuple(range(d)))
        r_hat.append(np.fft.fftn(padded))
    v_hat = []
    for n in range(1, n_max + 1):
        acc = r_hat[n - 1].copy()
        for k in range(1, n):
            acc -= v_hat[k - 1] * r_hat[n - k - 1]
        v_hat.append(acc)
    out = []
    for n in range(1, n_max + 1):
        full = np.fft.ifftn(v_hat[n - 1]).real
        full = np.roll(full, shift=tuple(n for _ in range(d)), axis=tuple(range(d)))
        sl = tuple(slice(0, 2 * n + 1) for _ in range(d))
        out.append(np.clip(full[sl], 0.0, None))
    return out


@dataclass(frozen=True)
class FirstMeetingCheck:
    value: float              # prefactor * truncated sum
    prefactor: float
    partial_sum: float        # sum_{n<=N, x} mass^gamma
    per_time_terms: np.ndarray
    tail_estimate: float      # power-law extrapolation, not a proof
    tail_exponent: float
    terms_decreasing: bool
    holds: bool
    truncation: int


def evans_derrida_check(spec: DisorderSpec, beta: float, gamma: float, d: int,
                        truncation: int = 16) -> FirstMeetingCheck:
    """Weak-disorder sufficient condition from fractional first-meeting sums.

    Evaluates e^{lambda(2 gamma beta) - 2 gamma lambda(beta)} *
    sum_{n <= N, x} P(first meeting at (n, x))^gamma with exact masses, and
    closes the series with a fitted power-law tail (reported as an estimate,
    flagged by per-term monotonicity, never as a certified bound).
    """
    if d < 3:
        raise ValueError("the first-meeting criterion is a d >= 3 diagnostic")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    masses = first_meeting_masses_spatial(d, truncation)
    terms = np.array([(m ** gamma).sum() for m in masses])
    pref = math.exp(log_mgf(spec, 2.0 * gamma * beta) - 2.0 * gamma * log_mgf(spec, beta))
    partial = float(terms.sum())
    dec = bool(np.all(np.diff(terms[truncation // 2:]) <= 0))
    half = terms[truncation // 2 - 1]
    last = terms[-1]
    if last > 0 and half > last:
        p = math.log(half / last) / math.log(2.0)
        tail = last * truncation / (p - 1.0) if p > 1.0 else math.inf
    else:
        p = 0.0
        tail = math.inf
    value = pref * (partial + max(tail, 0.0)) if math.isfinite(tail) else math.inf
    return FirstMeetingCheck(
        value=value, prefactor=pref, partial_sum=partial, per_time_terms=terms,
        tail_estimate=tail, tail_exponent=p, terms_decreasing=dec,
        holds=bool(math.isfinite(value) and value < 1.0), truncation=truncation,
    )


# ------------------------------------------------------------- growth probes

@dataclass(frozen=True)
class GrowthRow:
    p: float
    n_values: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    rate: float               # fitted per-step exponential growth of E[W^p]
    rate_stderr: float
    classification: str       # flat | growing | inconclusive


@dataclass(frozen=True)
class GrowthTable:
    rows: list
    p_hat: float              # largest grid p classified flat


def pstar_probe(spec: DisorderSpec, beta: float, p_grid, n_grid, replicas: int,
                seed: int = 0, d: int = 1, box_radius: int | None = None) -> GrowthTable:
    """Empirical E[W_n^p] growth table with per-p exponential-rate fits.

    p_hat is a diagnostic (largest p whose growth is statistically flat),
    never a certified moment threshold: bounded E over a finite n window is
    not boundedness in n.  Deep in strong disorder the estimator of E[W^p]
    is dominated by rare large realisations, so keep the n window short
    enough that log W fluctuations stay O(1) at the chosen replica count.
    """
    n_grid = np.asarray(sorted(n_grid), dtype=int)
    p_grid = np.asarray(sorted(p_grid), dtype=float)
    n_max = int(n_grid[-1])
    logw = np.empty((replicas, n_grid.size))
    for rep in range(replicas):
        fld = DisorderField(spec, _bits.scalar_stream(seed, 7001, rep))
        run = forward_partition(fld, spec, beta, n_max, start=(0,) * d,
                                keep_slices=False, box_radius=box_radius)
        logw[rep] = run.log_w[n_grid]
    rows = []
    p_hat = 1.0
    for p in p_grid:
        wp = np.exp(p * logw)
        means = wp.mean(axis=0)
        serrs = wp.std(axis=0, ddof=1) / math.sqrt(replicas)
        # straight-line fit of log mean against n gives the growth rate
        y = np.log(means)
        x = n_grid.astype(float)
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        dof = max(x.size - 2, 1)
        sxx = ((x - x.mean()) ** 2).sum()
        rate_se = math.sqrt(max(float(resid @ resid), 1e-300) / dof / sxx)
        # propagate the Monte Carlo errors into the rate as well
        mc_se = float(np.sqrt(((serrs / means) ** 2).sum()) / math.sqrt(sxx))
        rate_se = max(rate_se, mc_se)
        if slope > 2.0 * rate_se and means[-1] > 1.2 * means[0]:
            cls = "growing"
        elif abs(slope) <= 2.0 * rate_se or abs(means[-1] / means[0] - 1.0) < 0.2:
            cls = "flat"
        else:
            cls = "inconclusive"
        rows.append(GrowthRow(float(p), n_grid.copy(), means, serrs,
                              float(slope), float(rate_se), cls))
        if cls == "flat":
            p_hat = float(p)
    return GrowthTable(rows, p_hat)


@dataclass(frozen=True)
class TailComparison:
    t_values: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    k_const: float
    holds_at_95: np.ndarray


def sup_martingale_tail(spec: DisorderSpec, beta: float, t_grid, n_max: int,
                        replicas: int, seed: int = 0, d: int = 1,
                        box_radius: int | None = None) -> TailComparison:
    """Empirical P(max_k W_k > t) against the strong-disorder floor 1/(4 K^2 t).

    K = e^{beta M} bounds the one-step multiplicative jump of the martingale
    for disorder capped at M; the floor applies when the martingale limit
    vanishes.  ``holds_at_95`` uses the lower edge of the one-sided normal CI.
    """
    m_bound = spec.upper_bound
    if not math.isfinite(m_bound):
        raise ValueError("maximal-inequality tails require bounded disorder")
    k_const = math.exp(beta * m_bound)
    t_grid = np.asarray(t_grid, dtype=float)
    sup_w = np.empty(replicas)
    for rep in range(replicas):
        fld = DisorderField(spec, _bits.scalar_stream(seed, 7007, rep))
        run = forward_partition(fld, spec, beta, n_max, start=(0,) * d,
                                keep_slices=False, box_radius=box_radius)
        sup_w[rep] = math.exp(run.log_w.max())
    emp = np.array([(sup_w > t).mean() for t in t_grid])
    se = np.sqrt(np.clip(emp * (1.0 - emp), 1e-12, None) / replicas)
    bound = 1.0 / (4.0 * k_const ** 2 * t_grid)
    holds = (emp - 1.645 * se) >= bound
    return TailComparison(t_grid, emp, se, bound, k_const, holds)


# ------------------------------------------------------ block change of measure

@dataclass(frozen=True)
class BlockFunctionalSpec:
    """Space-time block and chaos order for the change-of-measure functional.

    The block spans times 1..length and the centred box of halfwidth
    radius_mult * sqrt(length); the functional sums order-k noise chains
    whose insertion sites stay in the box, started uniformly from the box's
    time-zero slice, normalised by sqrt(lattice volume) * R_length^(k/2).
    """

    length: int
    order: int
    radius_mult: float
    dimension: int = 1
    time_offset: int = 0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("chaos order k must be >= 1")
        if self.length < 1:
            raise ValueError("block length must be >= 1")

    @property
    def halfwidth(self) -> int:
        return max(int(self.radius_mult * math.sqrt(self.length)), 0)


def block_functional_X(field_: DisorderField, bspec: BlockFunctionalSpec,
                       spec: DisorderSpec, beta: float) -> float:
    """Order-k multilinear block sum in the normalized noise xi.

    Same stepwise recursion as the chaos decomposition, restricted so every
    noise insertion lands inside the block window; free-walk propagation
    happens between insertions and completed chains are collected at their
    final insertion (no trailing propagation weight).  Centred noise makes
    E[X] = 0 exactly, and the sqrt(Vol) R_l^{k/2} normalization keeps
    E[X^2] <= 1 (it is where the collision-chain bound saturates).
    """
    if beta == 0.0:
        raise ValueError("the block functional needs beta != 0 (noise undefined)")
    ell, k, d = bspec.length, bspec.order, bspec.dimension
    rad = bspec.halfwidth
    pad = ell
    h = rad + pad
    shape = (2 * h + 1,) * d
    lo = (-h,) * d
    axes_idx = np.indices(shape)
    inside = np.ones(shape, dtype=bool)
    for a in range(d):
        inside &= np.abs(axes_idx[a] - h) <= rad
    g = [np.zeros(shape) for _ in range(k)]
    g[0][inside] = 1.0
    buf = np.empty(shape)
    total = 0.0
    r_ell = collision_sum(WalkSpec(d, ell)).values[-1]
    for t_rel in range(1, ell + 1):
        xi = noise_grid(field_, spec, beta, bspec.time_offset + t_rel, lo, shape)
        xi[~inside] = 0.0
        conv_prev = None
        for j in range(k):
            conv_j = _conv_neighbors(g[j], buf).copy()
            if j == 0:
                g[0] = conv_j
            else:
                g[j] = conv_j + xi * conv_prev
            conv_prev = conv_j
        total += float((xi * conv_prev).sum())
    vol = ell * int(inside.sum())
    return total / (math.sqrt(vol) * r_ell ** (k / 2.0))
