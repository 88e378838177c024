"""Multilinear (high-temperature) expansion of the partition function.

W_n is rewritten exactly as sum_k T_k where T_k is the order-k multilinear
polynomial in the centred, variance-one noise
xi = (exp(beta w - lambda) - 1) / sigma(beta).  The per-order slices share
one forward sweep; agreement of sum_k T_k with the independent transfer
matrix is the strongest exactness oracle in the package.

Also houses influence computations: the generic sparse-kernel evaluator, the
brute-force conditional-variance reference, and the pair-replica
factorisation for the polymer kernel itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve

from .disorder import DisorderField, DisorderSpec, log_mgf, sigma2
from .partition import _conv_grow, forward_partition
from .walks import WalkSpec, build_heat_table, return_probabilities


@dataclass
class ChaosDecomposition:
    """Per-order totals T_k (k = 0..n) and the independent transfer value."""

    beta: float
    sigma: float
    horizon: int
    order_totals: np.ndarray
    transfer_value: float
    final_slices: list | None = field(default=None, repr=False)

    @property
    def chaos_sum(self) -> float:
        return float(self.order_totals.sum())

    @property
    def rel_error(self) -> float:
        return abs(self.chaos_sum - self.transfer_value) / abs(self.transfer_value)

    def dump_csv(self, path) -> None:
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["order", "total"])
            for k, t in enumerate(self.order_totals):
                w.writerow([k, repr(float(t))])


def noise_grid(field_: DisorderField, spec: DisorderSpec, beta: float,
               t: int, lo, shape) -> np.ndarray:
    """Normalized noise xi on a box (centred, unit variance)."""
    sig = math.sqrt(sigma2(spec, beta))
    lam = log_mgf(spec, beta)
    w = field_.gibbs_weights(t, lo, shape, beta, lam, "normalized")
    return (w - 1.0) / sig


def chaos_decompose(field_: DisorderField, spec: DisorderSpec, beta: float,
                    n: int, dimension: int = 1, keep_slices: bool = False) -> ChaosDecomposition:
    """All chaos orders of W_n in one stepwise sweep over the exact cone.

    Order slices obey F_k(t+1) = q_1 * F_k(t) + sigma xi_{t+1} (q_1 * F_{k-1}(t));
    beta = 0 degenerates to the single constant term T_0 = 1.
    """
    d = dimension
    if beta == 0.0:
        totals = np.zeros(n + 1)
        totals[0] = 1.0
        return ChaosDecomposition(beta, 0.0, n, totals, 1.0,
                                  [np.ones((1,) * d)] if keep_slices else None)
    sig = math.sqrt(sigma2(spec, beta))
    lam = log_mgf(spec, beta)
    slices = [np.ones((1,) * d)]         # orders 0..current, common support
    lo = np.zeros(d, dtype=np.int64)
    for t in range(1, n + 1):
        lo = lo - 1
        w = field_.gibbs_weights(t, tuple(lo), tuple(2 * t + 1 for _ in range(d)),
                                 beta, lam, "normalized")
        xi_sig = w - 1.0                 # sigma * xi, exactly the weight surplus
        convs = [_conv_grow(s) for s in slices]
        new = [convs[0]]
        for k in range(1, len(slices)):
            new.append(convs[k] + xi_sig * convs[k - 1])
        if len(slices) <= n:
            new.append(xi_sig * convs[-1])
        slices = new
    totals = np.zeros(n + 1)
    for k, s in enumerate(slices):
        totals[k] = s.sum()
    run = forward_partition(field_, spec, beta, n, start=(0,) * d, keep_slices=False)
    return ChaosDecomposition(beta, sig, n, totals, run.w(n),
                              slices if keep_slices else None)


def order_variances(spec: DisorderSpec, beta: float, n: int, d: int) -> np.ndarray:
    """Exact E[T_k^2] for every order k = 0..n.

    Orthogonality of the chaos orders reduces the second moment to collision
    chains: E[T_k^2] = sigma^{2k} sum over 0 < i_1 < .. < i_k <= n of
    prod p_{2(i_j - i_{j-1})}(0), evaluated by a cumulative convolution.
    """
    r = return_probabilities(d, n)
    s2 = sigma2(spec, beta)
    out = np.zeros(n + 1)
    out[0] = 0.0
    chain = r.copy()                      # chains with last collision at t
    for k in range(1, n + 1):
        out[k] = (s2 ** k) * chain.sum()
        if k == n:
            break
        nxt = np.zeros(n)
        for t in range(1, n):             # next collision strictly later
            nxt[t:] += chain[t - 1] * r[: n - t]
        chain = nxt
    return out


def order_variance(spec: DisorderSpec, beta: float, n: int, k: int, d: int) -> float:
    if not 0 <= k <= n:
        raise ValueError("order k must lie in 0..n")
    return float(order_variances(spec, beta, n, d)[k])


def _as_kernel(kernel) -> dict:
    return {frozenset(key): float(val) for key, val in kernel.items()}


def influence(kernel, site) -> float:
    """Influence of one input on a multilinear polynomial: sum_{I containing site} psi(I)^2."""
    return sum(v * v for key, v in _as_kernel(kernel).items() if site in key)


def influence_by_conditional_variance(kernel, site) -> float:
    """Reference evaluation E[Var(Psi | all other inputs)] for +-1 inputs.

    Exponential in the number of variables; exists to pin the closed form.
    """
    kern = _as_kernel(kernel)
    variables = sorted({x for key in kern for x in key})
    if site not in variables:
        return 0.0
    others = [x for x in variables if x != site]
    total = 0.0
    for mask in range(2 ** len(others)):
        assign = {x: (1.0 if mask >> j & 1 else -1.0) for j, x in enumerate(others)}
        # Psi is linear in xi_site given the others: Psi = a + b xi_site
        b = sum(v * np.prod([assign[x] for x in key if x != site])
                for key, v in kern.items() if site in key)
        total += b * b          # Var(a + b xi) = b^2 for unit-variance xi
    return total / 2 ** len(others)


@dataclass(frozen=True)
class PolymerInfluence:
    max_value: float
    argmax_time: int
    argmax_site: tuple
    per_time_max: np.ndarray
    total_variance: float     # Var(W_n) = E[W_n^2] - 1

    @property
    def normalized_max(self) -> float:
        """Max influence of the unit-variance kernel (W_n - 1)/sd(W_n).

        This is the quantity a Lindeberg-type error bound consumes; the raw
        maximum converges upward with n (longer suffixes through the early
        sites), while the normalized one decays as the total variance
        accumulates.
        """
        return self.max_value / self.total_variance


def polymer_max_influence(spec: DisorderSpec, beta: float, n: int, d: int) -> PolymerInfluence:
    """max over sites (t,x) of the influence on the chaos kernel of W_n.

    Influence factorises into sigma^2 A(t,x) B(t): A sums squared-kernel
    collision chains from the origin into (t,x) (weight sigma^2 per interior
    noise, none at (t,x)); B counts the chains that continue after time t,
    which is spatially homogeneous.  Both come from pair-replica transfer
    recursions with the squared heat kernel, so no explicit kernel is ever
    materialised.
    """
    if beta == 0.0:
        raise ValueError("influence of the polymer kernel needs beta != 0")
    s2 = sigma2(spec, beta)
    table = build_heat_table(WalkSpec(d, n))
    ker = [None] + [table.slices[i] ** 2 for i in range(1, n + 1)]
    r = np.array([k.sum() for k in ker[1:]])

    # backward suffix factor B[t] = 1 + sum_m sigma^2 r[m] B[t+m]
    b = np.ones(n + 1)
    for t in range(n - 1, -1, -1):
        gaps = np.arange(1, n - t + 1)
        b[t] = 1.0 + s2 * float((r[gaps - 1] * b[t + gaps]).sum())

    method = "direct" if (2 * n + 1) ** d <= 4096 else "auto"
    chains = [None] * (n + 1)   # chains ending with a noise at (s, .), sigma^2 included
    for s in range(1, n + 1):
        acc = s2 * ker[s]
        for sp in range(1, s):
            acc = acc + s2 * convolve(chains[sp], ker[s - sp], method=method)
        chains[s] = acc

    best = -1.0
    best_site = None
    best_t = 0
    per_time = np.zeros(n + 1)
    for t in range(1, n + 1):
        a = ker[t].copy()
        for s in range(1, t):
            a = a + convolve(chains[s], ker[t - s], method=method)
        inf_t = s2 * a * b[t]
        per_time[t] = float(inf_t.max())
        if per_time[t] > best:
            best = per_time[t]
            best_t = t
            idx = np.unravel_index(int(np.argmax(inf_t)), inf_t.shape)
            best_site = tuple(int(c) - t for c in idx)
    return PolymerInfluence(best, best_t, best_site, per_time, b[0] - 1.0)
