"""Disorder families and reproducible site-keyed disorder fields.

Families with exponential moments (gaussian, bernoulli, bounded three-point)
expose the log-moment-generating function lambda(beta) in closed form; the
heavy-tailed family is an exact Pareto tail F(x > u) = u^-alpha for u >= 1,
optionally mirrored to the negative axis with relative mass c_minus.

Fields are never materialised: the value at (t, x) is a pure function of
(seed, t, x), so arbitrarily large windows cost nothing and any query order
or replica layout reproduces identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import _bits

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"
BOUNDED = "bounded"
PARETO = "pareto_tail"


class HeavyTailError(ValueError):
    """Operation requires exponential moments the family does not have."""


@dataclass(frozen=True)
class DisorderSpec:
    """One i.i.d. disorder family.

    gaussian / bernoulli / bounded all have mean 0 and variance 1.  The
    bounded family is the symmetric three-point law on {-M, 0, +M} with
    P(+-M) = 1/(2M^2); M = 1 recovers the fair +-1 coin.
    """

    family: str
    bound: float = 1.0        # bounded family: support radius M >= 1
    alpha: float = 0.0        # pareto tail exponent
    c_minus: float = 0.0      # pareto left-tail mass relative to the right

    def __post_init__(self):
        if self.family not in (GAUSSIAN, BERNOULLI, BOUNDED, PARETO):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == BOUNDED and self.bound < 1.0:
            raise ValueError("bounded family needs M >= 1 to have unit variance")
        if self.family == PARETO:
            if self.alpha <= 0:
                raise ValueError("pareto tail exponent must be positive")
            if self.c_minus < 0:
                raise ValueError("c_minus must be nonnegative")

    @staticmethod
    def gaussian() -> "DisorderSpec":
        return DisorderSpec(GAUSSIAN)

    @staticmethod
    def bernoulli() -> "DisorderSpec":
        return DisorderSpec(BERNOULLI)

    @staticmethod
    def bounded(m: float) -> "DisorderSpec":
        return DisorderSpec(BOUNDED, bound=m)

    @staticmethod
    def pareto(alpha: float, c_minus: float = 0.0) -> "DisorderSpec":
        return DisorderSpec(PARETO, alpha=alpha, c_minus=c_minus)

    @property
    def has_exponential_moments(self) -> bool:
        return self.family != PARETO

    @property
    def upper_bound(self) -> float:
        """Smallest M with P(omega > M) = 0 (inf for unbounded families)."""
        if self.family == BERNOULLI:
            return 1.0
        if self.family == BOUNDED:
            return self.bound
        return math.inf

    def finite_support(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, probabilities) for exhaustive disorder enumeration."""
        if self.family == BERNOULLI:
            return np.array([1.0, -1.0]), np.array([0.5, 0.5])
        if self.family == BOUNDED:
            m = self.bound
            pm = 1.0 / (2.0 * m * m)
            return np.array([-m, 0.0, m]), np.array([pm, 1.0 - 2.0 * pm, pm])
        raise ValueError(f"family {self.family!r} has no finite support")


def log_mgf(spec: DisorderSpec, beta: float) -> float:
    """lambda(beta) = log E[exp(beta omega)], exact per family."""
    if spec.family == GAUSSIAN:
        return 0.5 * beta * beta
    if spec.family == BERNOULLI:
        # log cosh via the stable form for large arguments
        return abs(beta) + math.log1p(math.exp(-2.0 * abs(beta))) - math.log(2.0)
    if spec.family == BOUNDED:
        m = spec.bound
        return math.log1p((math.cosh(beta * m) - 1.0) / (m * m))
    raise HeavyTailError("log-mgf undefined: pareto tails have no exponential moments")


def sigma2(spec: DisorderSpec, beta: float) -> float:
    """Variance of the normalized Gibbs weight: exp(lambda(2b)-2lambda(b)) - 1."""
    return math.expm1(log_mgf(spec, 2.0 * beta) - 2.0 * log_mgf(spec, beta))


def lambda2(spec: DisorderSpec, beta: float) -> float:
    """Pair-collision exponent lambda(2 beta) - 2 lambda(beta)."""
    return log_mgf(spec, 2.0 * beta) - 2.0 * log_mgf(spec, beta)


def quantile_scale(spec: DisorderSpec, t: float) -> float:
    """Upper-quantile scale m(t): the level with tail mass 1/t.

    For the exact Pareto tail this is t^(1/alpha); t = 1 sits on the boundary
    (the whole right tail) and returns 1.
    """
    if spec.family != PARETO:
        raise ValueError("quantile scale is defined for the heavy-tailed family")
    if t < 1.0:
        raise ValueError("t must be >= 1")
    return t ** (1.0 / spec.alpha)


@dataclass(frozen=True)
class Window:
    """Space-time window: times 1..horizon, box [lo, hi] per axis."""

    horizon: int
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if self.horizon < 1 or any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError("window is empty")

    @property
    def dimension(self) -> int:
        return len(self.lo)


def _uniform_to_value(spec: DisorderSpec, u: np.ndarray) -> np.ndarray:
    if spec.family == GAUSSIAN:
        return ndtri(u)
    if spec.family == BERNOULLI:
        return np.where(u < 0.5, 1.0, -1.0)
    if spec.family == BOUNDED:
        m = spec.bound
        pm = 1.0 / (2.0 * m * m)
        return np.where(u < pm, -m, np.where(u < 1.0 - pm, 0.0, m))
    # two-sided pareto: negative branch first, then the right tail
    w_minus = spec.c_minus / (1.0 + spec.c_minus)
    out = np.empty_like(u)
    neg = u < w_minus
    if w_minus > 0:
        out[neg] = -((u[neg] / w_minus) ** (-1.0 / spec.alpha))
    pos = ~neg
    out[pos] = (((1.0 - u[pos]) * (1.0 + spec.c_minus)) ** (-1.0 / spec.alpha))
    return out


class DisorderField:
    """Immutable seed-keyed realisation of an i.i.d. disorder family."""

    def __init__(self, spec: DisorderSpec, seed: int, window: Window | None = None):
        self.spec = spec
        self.seed = int(seed)
        self.window = window

    def _grid_coords(self, lo, shape):
        axes = [np.arange(l, l + s, dtype=np.int64) for l, s in zip(lo, shape)]
        return [a.reshape((1,) * i + (-1,) + (1,) * (len(shape) - i - 1)) for i, a in enumerate(axes)]

    def values_grid(self, t: int, lo, shape) -> np.ndarray:
        """Disorder on the box prod_a [lo_a, lo_a + shape_a) at time t."""
        if self.spec.family == BERNOULLI:
            prefix = self._grid_coords(lo[:-1], shape[:-1])
            return _bits.packed_sign_row(self.seed, t, prefix, int(lo[-1]), int(shape[-1]))
        u = _bits.uniform_sites(self.seed, _bits.TAG_SITE, t, self._grid_coords(lo, shape))
        return _uniform_to_value(self.spec, u)

    def values_at(self, t: int, points: np.ndarray) -> np.ndarray:
        """Disorder at an (m, d) array of lattice points, one time slice."""
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        if self.spec.family == BERNOULLI:
            out = np.empty(points.shape[0])
            for j, p in enumerate(points):
                out[j] = _bits.packed_sign_row(
                    self.seed, t, [np.asarray(c) for c in p[:-1]], int(p[-1]), 1
                )[0]
            return out
        coords = [points[:, a] for a in range(points.shape[1])]
        u = _bits.uniform_sites(self.seed, _bits.TAG_SITE, t, coords)
        return _uniform_to_value(self.spec, u)

    def gibbs_weights(self, t: int, lo, shape, beta: float, lam: float,
                      mode: str = "normalized", out: np.ndarray | None = None) -> np.ndarray:
        """Per-site path weights on a box: exp(beta w - lam), exp(beta w), or 1 + beta w.

        The bernoulli family short-circuits the exponentials (two weight
        values), which is what makes horizon-10^4..10^5 sweeps affordable.
        """
        if self.spec.family == BERNOULLI and mode in ("normalized", "raw"):
            prefix = self._grid_coords(lo[:-1], shape[:-1])
            bits = _bits.packed_bit_row(self.seed, t, prefix, int(lo[-1]), int(shape[-1]))
            shift = lam if mode == "normalized" else 0.0
            w_plus = math.exp(beta - shift)
            w_minus = math.exp(-beta - shift)
            if out is None:
                out = np.empty(shape)
            # bit 1 -> +1 -> w_plus; one multiply-add instead of a where()
            np.multiply(bits, w_plus - w_minus, out=out)
            out += w_minus
            return out
        else:
            omega = self.values_grid(t, lo, shape)
            if mode == "normalized":
                res = np.exp(beta * omega - lam)
            elif mode == "raw":
                res = np.exp(beta * omega)
            elif mode == "product":
                res = 1.0 + beta * omega
            else:
                raise ValueError(f"unknown weight mode {mode!r}")
        if out is not None:
            out[...] = res
            return out
        return res


def sample_field(spec: DisorderSpec, window: Window | None, seed: int) -> DisorderField:
    return DisorderField(spec, seed, window)


@dataclass(frozen=True)
class TiltedSampler:
    """Exponential tilt of the disorder along one fixed space-time path.

    At visited sites the single-site law gets density proportional to
    exp(beta omega); everywhere else the base law is untouched.
    """

    spec: DisorderSpec
    path: tuple          # ((t, (x...)), ...)
    beta: float

    def __post_init__(self):
        if not self.spec.has_exponential_moments:
            raise HeavyTailError("exponential tilt needs exponential moments")


class TiltedField(DisorderField):
    """Base field with visited sites redrawn from the exact tilted law.

    Gaussian sites shift by beta (same underlying draw, so beta = 0 is the
    base field pathwise).  Discrete families redraw the visited site from a
    dedicated uniform stream with the reweighted probabilities; unvisited
    sites are bitwise identical to the base field.
    """

    def __init__(self, sampler: TiltedSampler, seed: int):
        super().__init__(sampler.spec, seed)
        self.beta = sampler.beta
        self._visited: dict[int, np.ndarray] = {}
        for t, x in sampler.path:
            pts = self._visited.setdefault(int(t), [])
            pts.append(tuple(int(c) for c in np.atleast_1d(x)))
        self._visited = {t: np.array(sorted(set(v)), dtype=np.int64)
                         for t, v in self._visited.items()}

    def _tilted_values(self, t: int, pts: np.ndarray) -> np.ndarray:
        spec, beta = self.spec, self.beta
        if spec.family == GAUSSIAN:
            base = super().values_at(t, pts)
            return base + beta
        coords = [pts[:, a] for a in range(pts.shape[1])]
        u = _bits.uniform_sites(self.seed, _bits.TAG_TILT, t, coords)
        if spec.family == BERNOULLI:
            p_plus = 1.0 / (1.0 + math.exp(-2.0 * beta))
            return np.where(u < p_plus, 1.0, -1.0)
        m = spec.bound
        z = math.exp(log_mgf(spec, beta))
        p_lo = math.exp(-beta * m) / (2.0 * m * m) / z
        p_mid = (1.0 - 1.0 / (m * m)) / z
        return np.where(u < p_lo, -m, np.where(u < p_lo + p_mid, 0.0, m))

    def values_grid(self, t, lo, shape):
        vals = super().values_grid(t, lo, shape)
        pts = self._visited.get(int(t))
        if pts is not None:
            lo = np.asarray(lo, dtype=np.int64)
            rel = pts - lo
            inside = np.all((rel >= 0) & (rel < np.asarray(shape)), axis=1)
            if inside.any():
                sel = pts[inside]
                vals[tuple(rel[inside].T)] = self._tilted_values(t, sel)
        return vals

    def values_at(self, t, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        vals = super().values_at(t, points)
        pts = self._visited.get(int(t))
        if pts is not None:
            visited_set = {tuple(p) for p in pts}
            mask = np.array([tuple(p) in visited_set for p in points])
            if mask.any():
                vals[mask] = self._tilted_values(t, points[mask])
        return vals

    def gibbs_weights(self, t, lo, shape, beta, lam, mode="normalized", out=None):
        omega = self.values_grid(t, lo, shape)
        if mode == "normalized":
            res = np.exp(beta * omega - lam)
        elif mode == "raw":
            res = np.exp(beta * omega)
        elif mode == "product":
            res = 1.0 + beta * omega
        else:
            raise ValueError(f"unknown weight mode {mode!r}")
        if out is not None:
            out[...] = res
            return out
        return res


def tilt_along_path(sampler: TiltedSampler, field_seed: int) -> TiltedField:
    return TiltedField(sampler, field_seed)
