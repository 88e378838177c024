"""Declarative experiment runner.

A config (JSON file or dict) names a registered experiment, a master seed,
a replica count and parameters; running it is a pure function of the config.
Replica r always works from the stream derived from (seed, experiment name,
r), rows come back sorted by replica id no matter the execution order, and
floats are serialized via repr, so reruns are byte-identical even under a
worker pool.

Outputs: <out>/<experiment>_replicas.csv and <out>/<experiment>_summary.json
(the summary embeds parameters, statistics, and named pass/fail checks).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field as dfield

import numpy as np

from . import _bits
from ._parallel import map_replicas
from .disorder import DisorderSpec

_FAMILIES = {
    "gaussian": DisorderSpec.gaussian,
    "bernoulli": DisorderSpec.bernoulli,
}


class ConfigError(ValueError):
    """The experiment config failed validation."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    replicas: int = 1
    out_dir: str = "."
    workers: int = 1
    params: dict = dfield(default_factory=dict)
    tolerances: dict = dfield(default_factory=dict)

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        return ExperimentConfig(
            experiment=raw.get("experiment", ""),
            seed=int(raw.get("seed", 0)),
            replicas=int(raw.get("replicas", 1)),
            out_dir=raw.get("out_dir", "."),
            workers=int(raw.get("workers", 1)),
            params=dict(raw.get("params", {})),
            tolerances=dict(raw.get("tolerances", {})),
        )

    def replica_seed(self, r: int) -> int:
        return _bits.string_stream(self.seed, self.experiment, r)

    def family(self, default: str = "bernoulli") -> DisorderSpec:
        name = self.params.get("family", default)
        if name not in _FAMILIES:
            raise ConfigError(f"unknown disorder family {name!r}")
        return _FAMILIES[name]()


@dataclass(frozen=True)
class Report:
    experiment: str
    rows: list
    columns: tuple
    summary: dict
    checks: dict
    csv_path: str | None = None
    json_path: str | None = None

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


# -------------------------------------------------------------- statistics

def ks_statistic(sample, cdf) -> float:
    """Sup distance between the empirical cdf of ``sample`` and ``cdf``.

    The reference is probed both at the sample points and one float ulp to
    their left, so step references (e.g. an empirical cdf itself) get their
    true left limits instead of a spurious 1/m gap.
    """
    s = np.sort(np.asarray(sample, dtype=float))
    if s.size == 0:
        raise ValueError("empty sample")
    f_right = np.asarray(cdf(s), dtype=float)
    f_left = np.asarray(cdf(np.nextafter(s, -np.inf)), dtype=float)
    m = s.size
    upper = np.abs(np.arange(1, m + 1) / m - f_right).max()
    lower = np.abs(f_left - np.arange(0, m) / m).max()
    return float(max(upper, lower))


def fit_exponent(pairs) -> tuple[float, float]:
    """Least-squares slope of log value against log n, with its stderr."""
    pts = [(float(n), float(v)) for n, v in pairs]
    if len({p[0] for p in pts}) < 2:
        raise ValueError("need at least two distinct n values")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ValueError("sizes and values must be positive")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(x.size - 2, 1)
    sxx = float(((x - x.mean()) ** 2).sum())
    return float(slope), float(math.sqrt(max(float(resid @ resid), 0.0) / dof / sxx))


def mean_ci(values: np.ndarray, z: float = 1.96) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=float)
    m = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return m, m - z * se, m + z * se


# ------------------------------------------------------------- experiments

def _exp_lognormal2d(cfg: ExperimentConfig):
    from .scaling import lognormal_experiment
    p = cfg.params
    spec = cfg.family()
    beta_hat = float(p.get("beta_hat", 0.3))
    box_mult = float(p.get("box_mult", 2.5))
    if beta_hat >= 1.0:
        n_grid = [int(v) for v in p.get("n_grid", [256, 1024, 4096])]
        res = lognormal_experiment(spec, beta_hat, n_grid, cfg.replicas,
                                   seed=cfg.seed, box_mult=box_mult,
                                   workers=cfg.workers)
        rows = [{"replica": i, "n": n, "median_w": med}
                for i, (n, med) in enumerate(zip(res.n_grid, res.medians))]
        summary = {"beta_hat": beta_hat, "n_grid": list(res.n_grid),
                   "medians": [float(v) for v in res.medians]}
        checks = {"median_strictly_decreasing": bool(res.strictly_decreasing)}
        return rows, ("replica", "n", "median_w"), summary, checks
    n = int(p.get("n", 4096))
    res = lognormal_experiment(spec, beta_hat, n, cfg.replicas, seed=cfg.seed,
                               box_mult=box_mult, workers=cfg.workers)
    rows = [{"replica": i, "log_w": float(v)} for i, v in enumerate(res.samples)]
    var_tol = float(cfg.tolerances.get("var_rel", 0.35))
    mean_tol = float(cfg.tolerances.get("mean_abs", 0.1))
    summary = {
        "beta_hat": beta_hat, "n": n, "beta_n": res.beta_n,
        "fitted_mean": res.fitted_mean, "fitted_var": res.fitted_var,
        "sigma2_target": res.sigma2_target, "mean_target": -res.sigma2_target / 2.0,
        "ks_distance": res.ks_distance,
    }
    checks = {
        "variance_within_rel_tol": abs(res.fitted_var - res.sigma2_target)
        <= var_tol * res.sigma2_target,
        "mean_within_abs_tol": abs(res.fitted_mean + res.sigma2_target / 2.0) <= mean_tol,
    }
    return rows, ("replica", "log_w"), summary, checks


def _exp_free_energy_d1(cfg: ExperimentConfig):
    from .partition import forward_partition_batch
    p = cfg.params
    spec = cfg.family()
    beta = float(p.get("beta", 1.0))
    n = int(p.get("n", 10_000))
    rad = int(p.get("box_radius", 8 * int(round(n ** (2.0 / 3.0)))))
    master = _bits.string_stream(cfg.seed, cfg.experiment)
    log_w = forward_partition_batch(spec, beta, n, cfg.replicas, master, rad)
    vals = log_w[:, -1] / n
    mean, lo, hi = mean_ci(vals)
    rows = [{"replica": r, "free_energy": float(v)} for r, v in enumerate(vals)]
    summary = {"beta": beta, "n": n, "box_radius": rad, "mean": mean,
               "ci_lo": lo, "ci_hi": hi}
    checks = {"free_energy_negative_95": hi < 0.0}
    ratio_target = p.get("beta4_ratio_target")
    if ratio_target is not None:
        ratio = mean / beta ** 4
        factor = float(cfg.tolerances.get("ratio_factor", 3.0))
        summary["beta4_ratio"] = ratio
        summary["beta4_ratio_target"] = float(ratio_target)
        checks["beta4_ratio_within_factor"] = (
            ratio_target * factor <= ratio <= ratio_target / factor
            if ratio_target < 0 else False)
    return rows, ("replica", "free_energy"), summary, checks


def _exp_sup_martingale_tail(cfg: ExperimentConfig):
    from .partition import forward_partition_batch
    p = cfg.params
    spec = cfg.family()
    beta = float(p.get("beta", 1.0))
    n_max = int(p.get("n_max", 1000))
    t_val = float(p.get("t", 4.0))
    rad = int(p.get("box_radius", 8 * int(round(n_max ** (2.0 / 3.0)))))
    if not math.isfinite(spec.upper_bound):
        raise ConfigError("sup-martingale tails need bounded disorder")
    master = _bits.string_stream(cfg.seed, cfg.experiment)
    log_w = forward_partition_batch(spec, beta, n_max, cfg.replicas, master, rad)
    sup_w = np.exp(log_w.max(axis=1))
    k_const = math.exp(beta * spec.upper_bound)
    emp = float((sup_w > t_val).mean())
    se = math.sqrt(max(emp * (1 - emp), 1e-12) / cfg.replicas)
    bound = 1.0 / (4.0 * k_const ** 2 * t_val)
    rows = [{"replica": r, "sup_w": float(v)} for r, v in enumerate(sup_w)]
    summary = {"beta": beta, "t": t_val, "n_max": n_max, "empirical": emp,
               "stderr": se, "bound": bound, "k_const": k_const}
    checks = {"tail_above_bound_95": emp - 1.645 * se >= bound}
    return rows, ("replica", "sup_w"), summary, checks


def _exp_order_statistics(cfg: ExperimentConfig):
    from .heavytail import order_statistics_experiment
    p = cfg.params
    res = order_statistics_experiment(
        float(p.get("alpha", 1.5)), int(p.get("n", 512)), float(p.get("xi", 0.8)),
        int(p.get("k", 3)), cfg.replicas, seed=cfg.seed,
        u_grid=p.get("u_grid", (0.5, 1.0, 2.0)))
    rows = [{"replica": r, "max_rescaled": float(res.top_weights[r, 0]),
             "t1": float(res.top_times[r, 0]), "x1": float(res.top_positions[r, 0])}
            for r in range(cfg.replicas)]
    z = (res.frechet_empirical - res.frechet_target) / res.frechet_stderr
    ks_tol = float(cfg.tolerances.get("location_ks", 0.05))
    summary = {
        "alpha": res.alpha, "n": res.n, "xi": res.xi, "box_size": res.box_size,
        "u_grid": [float(u) for u in res.u_grid],
        "frechet_empirical": [float(v) for v in res.frechet_empirical],
        "frechet_target": [float(v) for v in res.frechet_target],
        "frechet_z": [float(v) for v in z],
        "location_ks_time": res.location_ks_time,
        "location_ks_space": res.location_ks_space,
    }
    checks = {
        "frechet_within_3se": bool(np.all(np.abs(z) <= 3.0)),
        "location_uniform_ks": max(res.location_ks_time, res.location_ks_space) <= ks_tol,
    }
    return rows, ("replica", "max_rescaled", "t1", "x1"), summary, checks


def _exp_tree_dichotomy(cfg: ExperimentConfig):
    from .hierarchy import tree_partition
    p = cfg.params
    spec = cfg.family("gaussian")
    d = int(p.get("d", 2))
    depth = int(p.get("depth", 20))
    beta = float(p.get("beta", 0.8))
    n_pop = int(p.get("n_pop", 100_000))
    res = tree_partition(d, depth, spec, beta, seed=cfg.seed, n_pop=n_pop)
    rows = [{"generation": g, "median_w": float(res.pool_median[g]),
             "mean_w": float(res.pool_mean[g]), "frac_moment": float(res.frac_moment[g])}
            for g in range(depth + 1)]
    beta_c = math.sqrt(2.0 * math.log(d))
    stable = 0.5 <= res.pool_median[depth] / res.pool_median[depth // 2] <= 2.0
    decayed = res.pool_median[depth] <= 0.1
    q10, q50, q90 = res.quantiles()
    summary = {"d": d, "depth": depth, "beta": beta, "beta_c": beta_c,
               "median_final": float(res.pool_median[depth]),
               "median_half": float(res.pool_median[depth // 2]),
               "final_quantiles": {"q10": float(q10), "q50": float(q50),
                                   "q90": float(q90)}}
    checks = {"median_stable": bool(stable)} if beta < beta_c \
        else {"median_decayed_10x": bool(decayed)}
    return rows, ("generation", "median_w", "mean_w", "frac_moment"), summary, checks


def _exp_hier_probe(cfg: ExperimentConfig):
    from .hierarchy import weak_strong_probe
    p = cfg.params
    spec = cfg.family()
    rows_out = []
    betas = [float(v) for v in p.get("betas", [0.5])]
    n_grid = [int(v) for v in p.get("n_grid", [2, 4, 6, 8])]
    trends = weak_strong_probe(
        int(p.get("b", 2)), int(p.get("s", 2)), spec, betas, n_grid,
        replicas=cfg.replicas, gamma=float(p.get("gamma", 0.5)),
        n_pop=int(p.get("n_pop", 50_000)), seed=cfg.seed,
        placement=p.get("placement", "site"))
    summary = {"b": p.get("b", 2), "s": p.get("s", 2),
               "classifications": {}}
    checks = {}
    for tr in trends:
        summary["classifications"][repr(tr.beta)] = tr.classification
        for n, m, se in zip(tr.n_values, tr.frac_means, tr.frac_stderr):
            rows_out.append({"beta": tr.beta, "n": int(n),
                             "frac_mean": float(m), "stderr": float(se)})
        expect = p.get("expect", {}).get(str(tr.beta))
        if expect is not None:
            checks[f"beta_{tr.beta}_{expect}"] = tr.classification == expect
    return rows_out, ("beta", "n", "frac_mean", "stderr"), summary, checks


def _field_avg_replica(args):
    from .disorder import DisorderField
    from .scaling import field_average
    spec, beta, n, d, support, seed = args
    fld = DisorderField(spec, seed)

    def bump(*xs):
        r2 = sum(x ** 2 for x in xs)
        return np.where(r2 < 1.0, np.exp(-1.0 / np.clip(1.0 - r2, 1e-12, None)), 0.0)

    return field_average(fld, spec, beta, n, d, bump, "d3_subL2",
                         support_radius=support).value


def _exp_field_average_d3(cfg: ExperimentConfig):
    p = cfg.params
    spec = cfg.family()
    beta = float(p.get("beta", 0.5))
    n = int(p.get("n", 64))
    d = int(p.get("d", 3))
    support = float(p.get("support_radius", 1.0))
    args = [(spec, beta, n, d, support, cfg.replica_seed(r))
            for r in range(cfg.replicas)]
    vals = np.array(map_replicas(_field_avg_replica, args, cfg.workers))
    mean, lo, hi = mean_ci(vals, z=3.0)
    rows = [{"replica": r, "amplified_average": float(v)} for r, v in enumerate(vals)]
    summary = {"beta": beta, "n": n, "d": d, "mean": mean,
               "ci3_lo": lo, "ci3_hi": hi}
    checks = {"centred_within_3se": lo <= 0.0 <= hi}
    return rows, ("replica", "amplified_average"), summary, checks


def _exp_phase_scan(cfg: ExperimentConfig):
    from .heavytail import classify_region
    p = cfg.params
    alphas = [float(v) for v in p.get("alphas", np.linspace(0.6, 8.0, 20))]
    gammas = [float(v) for v in p.get("gammas", np.linspace(0.0, 1.2, 20))]
    rows = []
    counts: dict[str, int] = {}
    for a in alphas:
        for g in gammas:
            pt = classify_region(a, g)
            counts[pt.region] = counts.get(pt.region, 0) + 1
            rows.append({
                "alpha": a, "gamma": g, "region": pt.region,
                "xi": "" if pt.xi is None else float(pt.xi),
                "chi": "" if pt.chi is None else float(pt.chi),
                "conjectural": int(pt.conjectural),
            })
    summary = {"region_counts": counts}
    return rows, ("alpha", "gamma", "region", "xi", "chi", "conjectural"), summary, {}


def _block_x_replica(args):
    from .disorder import DisorderField, TiltedSampler, tilt_along_path
    from .moments import BlockFunctionalSpec, block_functional_X
    spec, beta, ell, order, radius_mult, d, seed = args
    bspec = BlockFunctionalSpec(ell, order, radius_mult, d)
    plain = block_functional_X(DisorderField(spec, seed), bspec, spec, beta)
    path = []
    pos = np.zeros(d, dtype=int)
    for t in range(1, ell + 1):
        pos = pos.copy()
        pos[0] += 1 if t % 2 == 1 else -1
        path.append((t, tuple(pos)))
    tilted_field = tilt_along_path(TiltedSampler(spec, tuple(path), beta), seed)
    tilted = block_functional_X(tilted_field, bspec, spec, beta)
    return plain, tilted


def _exp_block_x_tilt(cfg: ExperimentConfig):
    p = cfg.params
    spec = cfg.family("gaussian")
    args = [(spec, float(p.get("beta", 0.3)), int(p.get("ell", 64)),
             int(p.get("order", 2)), float(p.get("radius_mult", 2.0)),
             int(p.get("d", 2)), cfg.replica_seed(r))
            for r in range(cfg.replicas)]
    out = map_replicas(_block_x_replica, args, cfg.workers)
    plain = np.array([v[0] for v in out])
    tilted = np.array([v[1] for v in out])
    rows = [{"replica": r, "x_plain": float(a), "x_tilted": float(b)}
            for r, (a, b) in enumerate(zip(plain, tilted))]
    pm, plo, phi = mean_ci(plain, z=5.0)
    diff = tilted - plain          # paired: the tilt only redraws path sites
    dm, dlo, _dhi = mean_ci(diff, z=1.645)
    summary = {
        "plain_mean": pm, "plain_second_moment": float((plain ** 2).mean()),
        "tilted_mean": float(tilted.mean()),
        "plain_ci5": [plo, phi],
        "paired_tilt_gain": dm, "paired_tilt_gain_lo95": dlo,
    }
    checks = {
        "plain_mean_centred_5se": plo <= 0.0 <= phi,
        "second_moment_normalized": summary["plain_second_moment"] <= 1.05,
        "tilted_mean_exceeds_plain_95": dlo > 0.0,
    }
    return rows, ("replica", "x_plain", "x_tilted"), summary, checks


def _exp_pstar_probe(cfg: ExperimentConfig):
    from .moments import pstar_probe
    p = cfg.params
    spec = cfg.family()
    table = pstar_probe(
        spec, float(p.get("beta", 0.5)), p.get("p_grid", [1.0, 1.5, 2.0]),
        p.get("n_grid", [8, 16, 32, 48]), cfg.replicas, seed=cfg.seed,
        d=int(p.get("d", 1)), box_radius=p.get("box_radius"))
    rows = []
    for row in table.rows:
        for n, m, se in zip(row.n_values, row.means, row.stderrs):
            rows.append({"p": row.p, "n": int(n), "mean": float(m), "stderr": float(se)})
    summary = {
        "p_hat": table.p_hat,
        "rates": {repr(r.p): {"rate": r.rate, "stderr": r.rate_stderr,
                              "classification": r.classification}
                  for r in table.rows},
    }
    checks = {}
    for r in table.rows:
        expect = p.get("expect", {}).get(str(r.p))
        if expect is not None:
            checks[f"p_{r.p}_{expect}"] = r.classification == expect
    return rows, ("p", "n", "mean", "stderr"), summary, checks


def _exp_thresholds(cfg: ExperimentConfig):
    from .moments import l2_threshold, strong_disorder_sufficient
    from .walks import escape_probability_info
    p = cfg.params
    spec = cfg.family("gaussian")
    dims = [int(v) for v in p.get("dimensions", [3, 4])]
    tol = float(p.get("tol", 1e-6))
    rows = []
    for d in dims:
        esc = escape_probability_info(d, tol)
        th = l2_threshold(spec, d, tol)
        rows.append({"quantity": f"escape_probability_d{d}", "value": esc.value,
                     "tolerance": tol, "method": "return_series_tail_corrected"})
        rows.append({"quantity": f"l2_threshold_d{d}", "value": th.value,
                     "tolerance": tol, "method": "sigma2_root_bracketing"})
    beta = p.get("beta")
    if beta is not None:
        ck = strong_disorder_sufficient(spec, float(beta), int(p.get("d", 1)))
        rows.append({"quantity": "fractional_decay_r_min", "value": ck.r_min,
                     "tolerance": 0.0, "method": f"gamma={ck.best_gamma}"})
    summary = {r["quantity"]: r["value"] for r in rows}
    return rows, ("quantity", "value", "tolerance", "method"), summary, {}


EXPERIMENTS = {
    "lognormal2d": _exp_lognormal2d,
    "free_energy_d1": _exp_free_energy_d1,
    "sup_martingale_tail": _exp_sup_martingale_tail,
    "order_statistics": _exp_order_statistics,
    "tree_dichotomy": _exp_tree_dichotomy,
    "hier_probe": _exp_hier_probe,
    "field_average_d3": _exp_field_average_d3,
    "phase_scan": _exp_phase_scan,
    "block_x_tilt": _exp_block_x_tilt,
    "pstar_probe": _exp_pstar_probe,
    "thresholds": _exp_thresholds,
}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> Report:
    if cfg.experiment not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {cfg.experiment!r}")
    if cfg.replicas < 1:
        raise ConfigError("replicas must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    rows, columns, summary, checks = EXPERIMENTS[cfg.experiment](cfg)
    checks = {k: bool(v) for k, v in checks.items()}
    rows = sorted(rows, key=lambda r: tuple(repr(r.get(c)) for c in columns))
    csv_path = json_path = None
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        csv_path = os.path.join(cfg.out_dir, f"{cfg.experiment}_replicas.csv")
        json_path = os.path.join(cfg.out_dir, f"{cfg.experiment}_summary.json")
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format_cell(row.get(c)) for c in columns])
        payload = {
            "experiment": cfg.experiment,
            "seed": cfg.seed,
            "replicas": cfg.replicas,
            "parameters": cfg.params,
            "statistics": summary,
            "checks": checks,
            "passed": all(checks.values()),
        }
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    return Report(cfg.experiment, rows, columns, summary, checks, csv_path, json_path)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return "" if value is None else str(value)
