"""Exact per-realization partition-function machinery on Z^d.

One forward transfer-matrix sweep computes the endpoint slices u_k(x) and the
scalar sequence W_k; everything is propagated as a normalized endpoint law
plus a running log W_k offset, so horizons of 10^4..10^5 in strong disorder
never underflow.  An adjoint (time-reversed) sweep produces the whole field
of starting-point partition functions in one pass.

Two spatial modes:

* cone mode (``box_radius=None``): arrays grow with the exact reachable cone,
  nothing is truncated, and every identity holds to rounding;
* box mode: a fixed window around the start absorbs at its boundary.  Paths
  leaving the window are dropped, which undercounts W_n by the weight of
  those paths; with a box of several diffusive widths the relative loss is
  negligible and this is what makes the large Monte Carlo sweeps affordable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .disorder import DisorderField, DisorderSpec, log_mgf

ORIGIN_START = None


class DegenerateMassError(ZeroDivisionError):
    """All endpoint mass vanished (only possible through truncation)."""


def _conv_neighbors(u: np.ndarray, out: np.ndarray) -> np.ndarray:
    """out = nearest-neighbour average of u, same shape, absorbing boundary."""
    d = u.ndim
    out.fill(0.0)
    full = (slice(None),) * d
    for axis in range(d):
        lo = list(full)
        hi = list(full)
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        out[tuple(lo)] += u[tuple(hi)]
        out[tuple(hi)] += u[tuple(lo)]
    out *= 1.0 / (2 * d)
    return out


def _conv_grow(u: np.ndarray) -> np.ndarray:
    """Nearest-neighbour average onto an array grown by one site per side."""
    d = u.ndim
    out = np.zeros(tuple(s + 2 for s in u.shape))
    full = tuple(slice(1, -1) for _ in range(d))
    for axis in range(d):
        lo = list(full)
        hi = list(full)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        out[tuple(lo)] += u
        out[tuple(hi)] += u
    out *= 1.0 / (2 * d)
    return out


@dataclass
class PartitionRun:
    """Result of one forward sweep: log W_k plus (optionally) endpoint laws."""

    dimension: int
    horizon: int
    beta: float
    weight_mode: str
    start: tuple
    start_time: int
    seed: int
    log_w: np.ndarray                     # index k = 0..horizon
    laws: list | None = field(default=None, repr=False)   # (lo, normalized law)
    final_lo: tuple | None = None
    final_law: np.ndarray | None = field(default=None, repr=False)

    @property
    def w_values(self) -> np.ndarray:
        return np.exp(self.log_w)

    def w(self, k: int) -> float:
        return float(math.exp(self.log_w[k]))

    def unnormalized_final(self) -> tuple[tuple, np.ndarray]:
        """u_n(x) = W_n * law_n(x) with its box offset."""
        return self.final_lo, self.final_law * math.exp(self.log_w[-1])

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "log_w", "w"])
            for k, lw in enumerate(self.log_w):
                writer.writerow([k, repr(float(lw)), repr(float(math.exp(lw)))])


def forward_partition(field_: DisorderField, spec: DisorderSpec, beta: float,
                      horizon: int, start=ORIGIN_START, weight_mode: str = "normalized",
                      keep_slices: bool = True, box_radius: int | None = None,
                      start_time: int = 0, dimension: int | None = None) -> PartitionRun:
    """Transfer-matrix sweep u_{k+1}(y) = weight(k+1, y) * (q_1 * u_k)(y).

    ``weight_mode``: ``normalized`` uses exp(beta w - lambda(beta)) (mean-one
    weights, W_k is the martingale), ``raw`` uses exp(beta w), ``product``
    uses 1 + beta w (requires weights >= 0, i.e. beta w >= -1 a.s.).
    """
    if start is None:
        if dimension is None:
            dimension = field_.window.dimension if field_.window is not None else 1
        start = (0,) * dimension
    start = tuple(int(c) for c in start)
    dim = len(start)
    if weight_mode == "normalized":
        lam = log_mgf(spec, beta)   # raises for heavy tails
    else:
        lam = 0.0
    if weight_mode == "product":
        lower = -spec.upper_bound   # symmetric supports
        if not math.isfinite(lower) or 1.0 + beta * lower < 0.0:
            raise ValueError("product weights 1 + beta*omega must stay nonnegative")

    cone = box_radius is None
    if cone:
        u = np.ones((1,) * dim)
        lo = np.asarray(start, dtype=np.int64)
    else:
        shape = (2 * box_radius + 1,) * dim
        u = np.zeros(shape)
        u[(box_radius,) * dim] = 1.0
        lo = np.asarray(start, dtype=np.int64) - box_radius
        buf = np.empty(shape)
        wbuf = np.empty(shape)

    log_w = np.zeros(horizon + 1)
    laws = [(tuple(lo), u.copy())] if keep_slices else None
    log_scale = 0.0   # divisions are deferred until the running sum drifts

    for k in range(1, horizon + 1):
        t = start_time + k
        if cone:
            v = _conv_grow(u)
            lo = lo - 1
            w = field_.gibbs_weights(t, tuple(lo), v.shape, beta, lam, weight_mode)
            v *= w
        else:
            v = _conv_neighbors(u, buf)
            field_.gibbs_weights(t, tuple(lo), v.shape, beta, lam, weight_mode, out=wbuf)
            v *= wbuf
        s = float(v.sum())
        if not s > 0.0:
            raise DegenerateMassError(f"endpoint mass vanished at step {k}")
        log_w[k] = log_scale + math.log(s)
        if keep_slices:
            laws.append((tuple(lo), v / s))
        if not 1e-120 < s < 1e120:
            v *= 1.0 / s
            log_scale += math.log(s)
        if cone:
            u = v
        else:
            u, buf = v, u

    final = u / u.sum()
    return PartitionRun(
        dimension=dim, horizon=horizon, beta=beta, weight_mode=weight_mode,
        start=start, start_time=start_time, seed=field_.seed, log_w=log_w,
        laws=laws, final_lo=tuple(lo), final_law=final,
    )


def forward_partition_batch(spec: DisorderSpec, beta: float, horizon: int,
                            replicas: int, master_seed: int, box_radius: int,
                            weight_mode: str = "normalized",
                            replica_offset: int = 0,
                            chunk: int = 512) -> np.ndarray:
    """log W_k for a block of independent d = 1 replicas, vectorised.

    Replica r reads the disorder stream keyed by (master_seed, t, r, x): the
    replica index is one more hash coordinate, so any block decomposition or
    execution order reproduces identical numbers.  Returns an array of shape
    (replicas, horizon + 1).  This is the fast path for the 10^3..10^5-replica
    Monte Carlo experiments, where per-run Python overhead would dominate.
    """
    from . import _bits
    if weight_mode == "normalized":
        lam = log_mgf(spec, beta)
    elif weight_mode == "raw":
        lam = 0.0
    else:
        raise ValueError("batched sweeps support normalized/raw weights")
    width = 2 * box_radius + 1
    out = np.empty((replicas, horizon + 1))
    out[:, 0] = 0.0
    cells = np.arange(-box_radius, box_radius + 1, dtype=np.int64)
    shift = lam if weight_mode == "normalized" else 0.0
    w_plus = math.exp(beta - shift)
    w_minus = math.exp(-beta - shift)
    for lo_rep in range(0, replicas, chunk):
        block = min(chunk, replicas - lo_rep)
        reps = np.arange(replica_offset + lo_rep,
                         replica_offset + lo_rep + block, dtype=np.int64)
        u = np.zeros((block, width))
        u[:, box_radius] = 1.0
        v = np.empty_like(u)
        log_scale = np.zeros(block)
        for t in range(1, horizon + 1):
            v.fill(0.0)
            v[:, :-1] += u[:, 1:]
            v[:, 1:] += u[:, :-1]
            v *= 0.5
            if spec.family == "bernoulli":
                bits = _bits.packed_bit_row(master_seed, t, [reps],
                                            -box_radius, width)
                v *= bits * (w_plus - w_minus) + w_minus
            else:
                omega = _bits.uniform_sites(master_seed, _bits.TAG_SITE, t,
                                            [reps.reshape(-1, 1), cells])
                from .disorder import _uniform_to_value
                v *= np.exp(beta * _uniform_to_value(spec, omega) - shift)
            s = v.sum(axis=1)
            if np.any(s <= 0.0):
                raise DegenerateMassError(f"endpoint mass vanished at step {t}")
            out[lo_rep:lo_rep + block, t] = log_scale + np.log(s)
            smin, smax = float(s.min()), float(s.max())
            if smin < 1e-120 or smax > 1e120:
                v /= s[:, None]
                log_scale += np.log(s)
            u, v = v, u
    return out


def endpoint_law(run: PartitionRun, k: int) -> tuple[tuple, np.ndarray]:
    """mu_k(x) = u_k(x) / W_k as (box offset, probability array)."""
    if k > run.horizon:
        raise ValueError("k exceeds the run horizon")
    if k == run.horizon:
        return run.final_lo, run.final_law
    if run.laws is None:
        raise ValueError("run was built with keep_slices=False")
    return run.laws[k]


def dump_endpoint_law_csv(run: PartitionRun, k: int, path) -> None:
    """Endpoint mass per site at time k (coordinates + mass columns)."""
    lo, law = endpoint_law(run, k)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{a + 1}" for a in range(run.dimension)] + ["mass"])
        for idx in np.argwhere(law > 0):
            coords = [int(c) + l for c, l in zip(idx, lo)]
            writer.writerow(coords + [repr(float(law[tuple(idx)]))])


@dataclass(frozen=True)
class PointToPointSlice:
    """Both point-to-point conventions for one (m, x) -> (n, y) pair.

    ``half_open`` carries the disorder weights at times m+1..n and ``open``
    at m+1..n-1; they differ exactly by the weight factor at time n.
    """

    m: int
    n: int
    x: tuple
    y: tuple
    half_open: float
    open: float


def point_to_point(field_: DisorderField, spec: DisorderSpec, beta: float,
                   m: int, n: int, x, y) -> PointToPointSlice:
    """One forward sweep from (m, x) with the endpoint read off at (n, y)."""
    if m >= n:
        raise ValueError("need m < n")
    x = tuple(int(c) for c in np.atleast_1d(x))
    y = tuple(int(c) for c in np.atleast_1d(y))
    steps = n - m
    if (sum(abs(a - b) for a, b in zip(x, y)) - steps) % 2 != 0 or \
       sum(abs(a - b) for a, b in zip(x, y)) > steps:
        return PointToPointSlice(m, n, x, y, 0.0, 0.0)
    lam = log_mgf(spec, beta)
    u = np.ones((1,) * len(x))
    lo = np.asarray(x, dtype=np.int64)
    log_scale = 0.0
    for k in range(1, steps):
        u = _conv_grow(u)
        lo = lo - 1
        u *= field_.gibbs_weights(m + k, tuple(lo), u.shape, beta, lam, "normalized")
        s = float(u.sum())
        if s > 0.0:
            log_scale += math.log(s)
            u *= 1.0 / s
    u = _conv_grow(u)
    lo = lo - 1
    idx = tuple(int(c - l) for c, l in zip(y, lo))
    open_value = float(u[idx]) * math.exp(log_scale)
    w_n = float(field_.gibbs_weights(n, y, (1,) * len(y), beta, lam, "normalized").ravel()[0])
    return PointToPointSlice(m, n, x, y, open_value * w_n, open_value)


def adjoint_partition(field_: DisorderField, spec: DisorderSpec, beta: float,
                      t0: int, t1: int, lo, shape, pad: int | None = None,
                      weight_mode: str = "normalized") -> np.ndarray:
    """W_{(t0, t1]}(x) for every start x in a box, via one reversed sweep.

    ``pad`` widens the working window around the target box; ``pad = t1 - t0``
    is exact, smaller values absorb paths at the padded boundary (documented
    truncation, same caveat as box mode in the forward sweep).
    """
    if t0 >= t1:
        raise ValueError("need t0 < t1")
    lo = np.asarray(lo, dtype=np.int64)
    shape = tuple(int(s) for s in shape)
    steps = t1 - t0
    if pad is None:
        pad = steps
    lam = log_mgf(spec, beta) if weight_mode == "normalized" else 0.0
    work_lo = lo - pad
    work_shape = tuple(s + 2 * pad for s in shape)
    h = np.ones(work_shape)
    buf = np.empty(work_shape)
    log_scale = 0.0
    for t in range(t1, t0, -1):
        w = field_.gibbs_weights(t, tuple(work_lo), work_shape, beta, lam, weight_mode)
        h *= w
        h, buf = _conv_neighbors(h, buf), h
        m = float(h.max())
        if m > 0 and not (1e-100 < m < 1e100):
            log_scale += math.log(m)
            h *= 1.0 / m
    centre = tuple(slice(pad, pad + s) for s in shape)
    return h[centre] * math.exp(log_scale)


def multi_start_values(field_: DisorderField, spec: DisorderSpec, beta: float,
                       n: int, lo, shape, pad: int | None = None,
                       weight_mode: str = "normalized") -> np.ndarray:
    """The field x -> W_n(x) of horizon-n partition functions on a box."""
    return adjoint_partition(field_, spec, beta, 0, n, lo, shape, pad, weight_mode)


def check_linearity(field_: DisorderField, spec: DisorderSpec, beta: float,
                    n: int, m: int) -> float:
    """Relative residual of W_{n+m} = sum_x W_n(0, x) W_{(n, n+m]}(x).

    Both sides are evaluated on the exact cone, so the residual is pure
    floating-point noise (<= 1e-10 by contract).
    """
    run = forward_partition(field_, spec, beta, n + m, keep_slices=False)
    w_total = math.exp(run.log_w[-1])
    head = forward_partition(field_, spec, beta, n, keep_slices=False)
    lo, u_n = head.unnormalized_final()
    tails = adjoint_partition(field_, spec, beta, n, n + m, lo, u_n.shape, pad=m)
    combined = float((u_n * tails).sum())
    return abs(w_total - combined) / w_total


@dataclass(frozen=True)
class OverlapResult:
    value: float          # sum_x rho(x)^2 with rho = q_1 * mu_{n-1}
    two_replica: float    # P(two independent replicas meet at time n)

    @property
    def difference(self) -> float:
        return abs(self.value - self.two_replica)


def overlap_In(field_: DisorderField, spec: DisorderSpec, beta: float, n: int,
               dimension: int | None = None,
               box_radius: int | None = None) -> OverlapResult:
    """Probability that two independent polymers in the same disorder meet at time n.

    Computed two structurally different ways: the squared one-step-forward
    endpoint density, and the autocorrelation of mu_{n-1} contracted with the
    two-walk difference kernel.  They must agree to 1e-12.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if dimension is None:
        dimension = field_.window.dimension if field_.window is not None else 1
    d = dimension
    if n == 1:
        mu = np.ones((1,) * d)
    else:
        run = forward_partition(field_, spec, beta, n - 1, keep_slices=False,
                                box_radius=box_radius, dimension=d)
        mu = run.final_law

    rho = _conv_grow(mu)
    value = float((rho ** 2).sum())

    # second route: I_n = sum_z A(z) K2(z), A the autocorrelation of mu and
    # K2 the law of the one-step difference of two independent walks
    q1 = np.zeros((3,) * d)
    for axis in range(d):
        idx = [1] * d
        idx[axis] = 0
        q1[tuple(idx)] = 1.0 / (2 * d)
        idx[axis] = 2
        q1[tuple(idx)] = 1.0 / (2 * d)
    two_rep = 0.0
    for z_idx in np.ndindex(*(5,) * d):
        z = np.array(z_idx) - 2
        k2 = 0.0
        for s_idx in np.ndindex(*(3,) * d):
            s = np.array(s_idx) - 1
            r = s + z
            if np.all(np.abs(r) <= 1):
                k2 += q1[tuple(s + 1)] * q1[tuple(r + 1)]
        if k2 == 0.0:
            continue
        # A(z) = sum_y mu(y) mu(y + z)
        src = [slice(max(0, -zc), min(sh, sh - zc)) for zc, sh in zip(z, mu.shape)]
        dst = [slice(max(0, zc), min(sh, sh + zc)) for zc, sh in zip(z, mu.shape)]
        a_z = float((mu[tuple(src)] * mu[tuple(dst)]).sum())
        two_rep += k2 * a_z
    result = OverlapResult(value=value, two_replica=two_rep)
    if result.difference > 1e-12:
        raise RuntimeError(f"overlap routes disagree by {result.difference}")
    return result


def pinning_partition(fixed_path: np.ndarray, spec: DisorderSpec, beta: float,
                      n: int | None = None) -> float:
    """Random-walk pinning partition for a frozen trajectory.

    E over a fresh walk of exp(lambda_2(beta) * #collisions with the given
    path up to time n); the multiplicative weight exp(lambda_2) sits on the
    coincidence sites of the transfer sweep.
    """
    path = np.atleast_2d(np.asarray(fixed_path, dtype=np.int64))
    if path.ndim != 2:
        raise ValueError("fixed_path must be an (n, d) trajectory")
    if n is None:
        n = path.shape[0]
    lam2 = log_mgf(spec, 2.0 * beta) - 2.0 * log_mgf(spec, beta)
    boost = math.exp(lam2)
    d = path.shape[1]
    u = np.ones((1,) * d)
    lo = np.zeros(d, dtype=np.int64)
    for k in range(1, n + 1):
        u = _conv_grow(u)
        lo = lo - 1
        idx = tuple(int(c - l) for c, l in zip(path[k - 1], lo))
        if all(0 <= i < s for i, s in zip(idx, u.shape)):
            u[idx] *= boost
    return float(u.sum())


def free_energy_estimate(field_: DisorderField, spec: DisorderSpec, beta: float,
                         n: int, box_radius: int | None = None) -> float:
    """(1/n) log W_n for one disorder realisation (log-space throughout)."""
    run = forward_partition(field_, spec, beta, n, keep_slices=False,
                            box_radius=box_radius)
    return float(run.log_w[-1] / n)
