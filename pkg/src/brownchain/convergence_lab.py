"""Monte Carlo verification of the discrete-to-continuum convergence.

Every check produces ``Statistic`` rows (name, d, value, stderr, threshold,
verdict) that end up in a ``ConvergenceReport``. Replications are keyed by
``substream_seed(seed, r)``, so a report is a deterministic function of its
configuration.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache, partial
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .deterministic_field import DeterministicParams, d_continuum_grid, delta_profile
from .errors import ConfigurationError, GridMismatchError
from .grid import FieldGrid
from .stochastic_field import (
    RandomField,
    difference_variance,
    floor_sites,
    s_values,
    sample_coupled_modes,
    sigma_d_values,
    substream_seed,
)

PASS, FAIL, INFO, INSUFFICIENT = "PASS", "FAIL", "INFO", "INSUFFICIENT"

# substream tags, kept apart from replication indices
_VARIANCE_STREAM = 1_000_001
_TAIL_STREAM = 1_000_002


@dataclass
class Statistic:
    name: str
    d: int | None
    value: float
    stderr: float | None = None
    threshold: str = ""
    verdict: str = INFO


@dataclass
class ConvergenceReport:
    config: dict = field(default_factory=dict)
    statistics: list = field(default_factory=list)
    sections: dict = field(default_factory=dict)

    def add(self, *rows: Statistic) -> None:
        self.statistics.extend(rows)

    def merge(self, other: "ConvergenceReport") -> None:
        self.statistics.extend(other.statistics)
        self.sections.update(other.sections)

    @property
    def passed(self) -> bool:
        return all(s.verdict != FAIL for s in self.statistics)

    def failures(self) -> list:
        return [s for s in self.statistics if s.verdict == FAIL]

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "passed": self.passed,
            "statistics": [asdict(s) for s in self.statistics],
            "sections": self.sections,
        }
        return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "d", "value", "stderr", "threshold", "verdict"])
        for s in self.statistics:
            writer.writerow(
                [s.name, "" if s.d is None else s.d, _fmt(s.value), _fmt(s.stderr), s.threshold, s.verdict]
            )
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# distances


def supnorm_distance(field_a, field_b, grid: FieldGrid | None = None) -> float:
    """Largest absolute difference over the nodes shared by two fields."""
    if isinstance(field_a, RandomField) and isinstance(field_b, RandomField):
        if not field_a.grid.same_as(field_b.grid):
            raise GridMismatchError("fields live on different grids")
        if grid is not None and not grid.same_as(field_a.grid):
            raise GridMismatchError("fields do not live on the requested grid")
        a, b = field_a.values, field_b.values
    else:
        a, b = np.asarray(field_a, dtype=float), np.asarray(field_b, dtype=float)
    if a.shape != b.shape:
        raise GridMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b)))


def split_terms(sigma_d: np.ndarray, s: np.ndarray, grid: FieldGrid) -> dict:
    """Sup of the total distance and of the three rounding terms on the dense grid.

    ``sigma_d`` and ``s`` are values on ``grid.times x grid.v``. With left-end
    rounding ``Sigma_d(t, v) = Sigma_d(t, v_hat)``, so

        Sigma_d(t,v) - S(t,v) = [Sigma_d(t,v_hat) - Sigma_d(t_hat,v_hat)]
                              + [Sigma_d(t_hat,v_hat) - S(t_hat,v_hat)]
                              + [S(t_hat,v_hat) - S(t,v)]
    """
    ti, vi = grid.t_hat_index, grid.v_hat_index
    sig_hat = sigma_d[..., :, vi]
    term1 = sig_hat - sig_hat[..., ti, :]
    term2 = sigma_d[..., ti, :][..., :, vi] - s[..., ti, :][..., :, vi]
    term3 = s[..., ti, :][..., :, vi] - s
    axes = (-2, -1)
    return {
        "total": np.max(np.abs(sigma_d - s), axis=axes),
        "term1": np.max(np.abs(term1), axis=axes),
        "term2": np.max(np.abs(term2), axis=axes),
        "term3": np.max(np.abs(term3), axis=axes),
        "pathwise_residual": np.max(np.abs(sigma_d - s - (term1 + term2 + term3)), axis=axes),
    }


def split_distance(modes, d: int, K: int, grid: FieldGrid, sigma: float = 1.0) -> tuple:
    """(term1, term2, term3) sups for one coupled sample whose times are ``grid.times``."""
    if grid.d != d:
        raise GridMismatchError("grid resolution must equal d")
    if len(modes.times) != grid.n_points or not np.allclose(modes.times, grid.times):
        raise GridMismatchError("coupled sample was not drawn on the grid times")
    sig = sigma_d_values(modes.sigma[d], d, grid.v, sigma)
    s = s_values(modes.s[..., :K], grid.v, sigma)
    terms = split_terms(sig, s, grid)
    return terms["term1"], terms["term2"], terms["term3"]


# ---------------------------------------------------------------------------
# fitting helpers


def fit_constant(ratios: Iterable[float]) -> tuple:
    """Least-squares constant on log ratios and the max/min spread of the ratios."""
    r = np.asarray(list(ratios), dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        return float("nan"), float("inf")
    return float(np.exp(np.mean(np.log(r)))), float(r.max() / r.min())


def fit_slope(x: Sequence[float], y: Sequence[float]) -> dict:
    """Log-log slope with a 95% confidence interval."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    res = stats.linregress(lx, ly)
    n = len(lx)
    half = stats.t.ppf(0.975, n - 2) * res.stderr if n > 2 else float("inf")
    return {"slope": res.slope, "stderr": res.stderr, "ci_low": res.slope - half, "ci_high": res.slope + half}


def _summary(samples: np.ndarray) -> dict:
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    return {
        "mean": float(samples.mean()),
        "stderr": float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan"),
        "q05": float(np.quantile(samples, 0.05)),
        "q50": float(np.quantile(samples, 0.5)),
        "q95": float(np.quantile(samples, 0.95)),
    }


def _variance_stderr(var: float, n: int) -> float:
    # Gaussian sample variance: sd = var * sqrt(2 / (n - 1))
    return var * np.sqrt(2.0 / (n - 1))


def monotone_fraction(paths: np.ndarray, slack: float = 0.1) -> float:
    """Fraction of rows with ``x[j+1] <= (1 + slack) x[j]`` for every j."""
    paths = np.asarray(paths, dtype=float)
    ok = np.all(paths[:, 1:] <= (1.0 + slack) * paths[:, :-1], axis=1)
    return float(ok.mean())


# ---------------------------------------------------------------------------
# per-replication simulation


@dataclass(frozen=True)
class LabSettings:
    """The subset of an experiment configuration the lab needs."""

    epsilon: float = 1.0
    sigma: float = 1.0
    T: float = 1.0
    d_list: tuple = (16, 32, 64, 128)
    K: int = 512
    replications: int = 256
    seed: int = 0
    refine: int = 4
    monotone_seeds: int = 100
    slack: float = 0.1
    variance_replications: int = 2000
    tail_replications: int = 10_000
    tail_d: int = 32
    workers: int = 1

    @classmethod
    def from_config(cls, config) -> "LabSettings":
        names = cls.__dataclass_fields__
        values = {k: getattr(config, k) for k in names if hasattr(config, k)}
        values["d_list"] = tuple(values.get("d_list", cls.d_list))
        return cls(**values)


def _time_lattice(settings: LabSettings) -> tuple:
    n = math.lcm(*(settings.refine * d for d in settings.d_list))
    return n, settings.T * np.arange(n + 1) / n


@lru_cache(maxsize=16)
def _deterministic_fields(epsilon: float, T: float, d: int, refine: int, K: int) -> tuple:
    grid = FieldGrid(T, d, refine)
    delta = delta_profile(DeterministicParams(epsilon, d, K), grid.times)[:, floor_sites(grid.v, d)]
    cont = d_continuum_grid(grid.times, grid.v, epsilon, K)
    delta.setflags(write=False)
    cont.setflags(write=False)
    return delta, cont


def simulate_replication(settings: LabSettings, r: int) -> dict:
    """Sup distances of one seed for every d in ``settings.d_list``."""
    n, times = _time_lattice(settings)
    modes = sample_coupled_modes(substream_seed(settings.seed, r), times, settings.K, settings.d_list)
    out = {}
    for d in settings.d_list:
        grid = FieldGrid(settings.T, d, settings.refine)
        rows = np.arange(grid.n_points) * (n // (d * settings.refine))
        sig = sigma_d_values(modes.sigma[d][rows], d, grid.v, settings.sigma)
        s = s_values(modes.s[rows], grid.v, settings.sigma)
        delta, cont = _deterministic_fields(settings.epsilon, settings.T, d, settings.refine, settings.K)
        terms = split_terms(sig, s, grid)
        terms = {k: float(v) for k, v in terms.items()}
        terms["xi_vs_x"] = float(np.max(np.abs(delta + sig - cont - s)))
        terms["xi_vs_x_nodes"] = float(
            np.max(np.abs((delta + sig - cont - s)[np.ix_(grid.node_index, grid.node_index)]))
        )
        out[d] = terms
    return out


def _map_replications(settings: LabSettings, indices: Sequence[int]) -> list:
    work = partial(simulate_replication, settings)
    if settings.workers > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            return list(pool.map(work, indices, chunksize=max(1, len(indices) // (4 * settings.workers))))
    return [work(r) for r in indices]


# ---------------------------------------------------------------------------
# suites


def full_theorem_check(settings: LabSettings, include_suites: bool = True, target: str = "xi") -> ConvergenceReport:
    """Ξ_d = Δ_d + Σ_d against X = D + S on shared noise, over ``settings.d_list``.

    ``target="sigma"`` puts the verdicts on the homogeneous distance
    ``sup |Σ_d - S|`` instead of the full one.
    """
    if target not in ("xi", "sigma"):
        raise ValueError(f"unknown target {target!r}")
    report = ConvergenceReport(config=asdict(settings))
    d_list = list(settings.d_list)
    n_rep = max(settings.replications, settings.monotone_seeds)
    results = _map_replications(settings, range(n_rep))
    table = {key: np.array([[res[d][key] for d in d_list] for res in results]) for key in results[0][d_list[0]]}

    key = "xi_vs_x" if target == "xi" else "total"
    label = "theorem" if target == "xi" else "homogeneous"
    main = table[key][: settings.replications]
    means = main.mean(axis=0)
    section = {"d": d_list, "summary": {}}
    for j, d in enumerate(d_list):
        summ = _summary(main[:, j])
        section["summary"][d] = summ
        if target == "xi":
            report.add(Statistic("theorem.mean_sup_xi_minus_x", d, summ["mean"], summ["stderr"], "", INFO))
            report.add(
                Statistic("theorem.mean_sup_xi_minus_x_nodes", d, float(table["xi_vs_x_nodes"][: settings.replications, j].mean()))
            )
        else:
            report.add(Statistic("homogeneous.mean_sup_sigma_minus_s", d, summ["mean"], summ["stderr"], "", INFO))
    decreasing = bool(np.all(np.diff(means) < 0))
    report.add(
        Statistic(f"{label}.mean_sup_strictly_decreasing", None, float(decreasing), None, "means strictly decreasing in d", PASS if decreasing else FAIL)
    )
    if len(d_list) > 1:
        slope = fit_slope(d_list, means)
        section["slope"] = slope
        report.add(Statistic(f"{label}.loglog_slope", None, slope["slope"], slope["stderr"], "descriptive", INFO))

    seeds = table[key][: settings.monotone_seeds]
    frac = monotone_fraction(seeds, settings.slack)
    report.add(
        Statistic(
            f"{label}.per_seed_monotone_fraction",
            None,
            frac,
            None,
            f">= 0.95 of {len(seeds)} seeds, slack {settings.slack}",
            PASS if frac >= 0.95 else FAIL,
        )
    )

    split = {}
    reps = slice(0, settings.replications)
    residual = float(table["pathwise_residual"][reps].max())
    triangle = bool(
        np.all(table["total"][reps] <= table["term1"][reps] + table["term2"][reps] + table["term3"][reps] + 1e-12)
    )
    report.add(Statistic("split.decomposition_residual", None, residual, None, "<= 1e-12", PASS if residual <= 1e-12 else FAIL))
    report.add(Statistic("split.triangle_inequality", None, float(triangle), None, "every path", PASS if triangle else FAIL))
    for name in ("total", "term1", "term2", "term3"):
        m = table[name][reps].mean(axis=0)
        se = table[name][reps].std(axis=0, ddof=1) / np.sqrt(settings.replications)
        split[name] = {"mean": m, "stderr": se}
        for j, d in enumerate(d_list):
            report.add(Statistic(f"split.mean_sup_{name}", d, float(m[j]), float(se[j])))
        dec = bool(np.all(np.diff(m) < 0))
        report.add(Statistic(f"split.{name}_decreasing", None, float(dec), None, "means decreasing in d", PASS if dec else FAIL))
    stoch_frac = monotone_fraction(table["total"][: settings.monotone_seeds], settings.slack)
    report.add(Statistic("split.per_seed_monotone_fraction", None, stoch_frac, None, "descriptive", INFO))
    section["split"] = split
    section["curves"] = {"d": d_list, "mean_sup": means, "mean_sup_sigma_minus_s": split["total"]["mean"]}
    report.sections[label] = section

    if include_suites:
        report.merge(variance_bound_suite(settings))
        report.merge(sigma_tail_check(settings))
    return report


def _variance_design(settings: LabSettings) -> dict:
    t0 = settings.T / 2.0
    v0 = 0.5
    v_gaps = [2.0**-p for p in range(8, 1, -1)]
    t_gaps = [2.0**-p for p in range(10, 1, -1) if t0 + 2.0**-p <= settings.T]
    return {"t0": t0, "v0": v0, "v_gaps": v_gaps, "t_gaps": t_gaps}


def variance_bound_suite(settings: LabSettings, batch: int = 500) -> ConvergenceReport:
    """Empirical constants for ``Var[Sigma_d - S] <= c/d`` and the two modulus bounds."""
    n = settings.variance_replications
    if n < 1000:
        raise ConfigurationError(f"variance suite needs >= 1000 replications, got {n}")
    report = ConvergenceReport(config=asdict(settings))
    design = _variance_design(settings)
    t0, v0 = design["t0"], design["v0"]
    times = np.array([t0] + [t0 + g for g in design["t_gaps"]])
    v_pts = np.array([v0] + [v0 + g for g in design["v_gaps"]])
    d_list = list(settings.d_list)
    sig_vals = {d: [] for d in d_list}
    s_vals = []
    done = 0
    b = 0
    while done < n:
        m = min(batch, n - done)
        modes = sample_coupled_modes(
            substream_seed(settings.seed, _VARIANCE_STREAM, b), times, settings.K, d_list, n_paths=m
        )
        s_vals.append(s_values(modes.s, v_pts, settings.sigma))
        for d in d_list:
            sig_vals[d].append(sigma_d_values(modes.sigma[d], d, [v0], settings.sigma)[..., 0])
        done += m
        b += 1
    s_all = np.concatenate(s_vals)  # (n, n_t, n_v)
    section = {"design": design, "replications": n}

    # Var[Sigma_d - S] ~ c / d at (t0, v0)
    ratios, exact = [], []
    for d in d_list:
        sig = np.concatenate(sig_vals[d])
        diff = sig[:, 0] - s_all[:, 0, 0]
        var = diff.var(ddof=1)
        ratios.append(d * var)
        exact.append(d * difference_variance(d, t0, v0, settings.K, settings.sigma))
        report.add(Statistic("variance.d_times_var_sigma_minus_s", d, d * var, d * _variance_stderr(var, n), "", INFO))
        sig_vals[d] = sig
    c, spread = fit_constant(ratios)
    report.add(
        Statistic("variance.d_times_var_stability", None, spread, None, "max/min <= 2", PASS if spread <= 2.0 else FAIL),
        Statistic("variance.d_times_var_constant", None, c, None, "fitted", INFO),
    )
    section["d_scaling"] = {"d": d_list, "ratio": ratios, "exact_ratio": exact, "constant": c, "spread": spread}

    # Var[S(t, v) - S(t, v')] <= c |v - v'|
    v_ratios = []
    for j, g in enumerate(design["v_gaps"], start=1):
        var = (s_all[:, 0, j] - s_all[:, 0, 0]).var(ddof=1)
        v_ratios.append(var / g)
        report.add(Statistic(f"variance.v_modulus_ratio[gap={g:g}]", None, var / g, _variance_stderr(var, n) / g))
    c, spread = fit_constant(v_ratios)
    report.add(
        Statistic("variance.v_modulus_stability", None, spread, None, "max/min <= 2", PASS if spread <= 2.0 else FAIL),
        Statistic("variance.v_modulus_constant", None, c, None, "fitted", INFO),
    )
    section["v_modulus"] = {"gap": design["v_gaps"], "ratio": v_ratios, "constant": c, "spread": spread}

    # Var[F(t', v) - F(t, v)] <= c |t' - t|^(1/2) for F = S and every Sigma_d
    t_section = {}
    fields = {"S": s_all[:, :, 0]}
    fields.update({f"Sigma_{d}": sig_vals[d] for d in d_list})
    all_ratios = []
    for name, vals in fields.items():
        rs = []
        for j, g in enumerate(design["t_gaps"], start=1):
            var = (vals[:, j] - vals[:, 0]).var(ddof=1)
            rs.append(var / np.sqrt(g))
            dd = None if name == "S" else int(name.split("_")[1])
            report.add(Statistic(f"variance.t_modulus_ratio_{name.split('_')[0]}[gap={g:g}]", dd, var / np.sqrt(g), _variance_stderr(var, n) / np.sqrt(g)))
        c, spread = fit_constant(rs)
        dd = None if name == "S" else int(name.split("_")[1])
        report.add(
            Statistic(f"variance.t_modulus_stability_{name.split('_')[0]}", dd, spread, None, "max/min <= 2", PASS if spread <= 2.0 else FAIL),
            Statistic(f"variance.t_modulus_constant_{name.split('_')[0]}", dd, c, None, "fitted", INFO),
        )
        t_section[name] = {"gap": design["t_gaps"], "ratio": rs, "constant": c, "spread": spread}
        all_ratios.extend(rs)
    c, spread = fit_constant(all_ratios)
    report.add(Statistic("variance.t_modulus_common_stability", None, spread, None, "max/min <= 2", PASS if spread <= 2.0 else FAIL))
    section["t_modulus"] = t_section
    report.sections["variance"] = section
    return report


def tail_check(samples, scale: float, thresholds: Sequence[float], min_exceedances: int = 10) -> dict:
    """Empirical ``P(sup Y >= r * scale)`` against r^2.

    PASS when ``-log P`` grows at least linearly in ``r^2`` over the
    thresholds with enough exceedances: the least-squares slope of ``-log P``
    on ``r^2`` is positive with its 95% lower confidence bound above zero, and
    ``-log P`` is non-decreasing in r. Fewer than three usable thresholds
    gives ``INSUFFICIENT``.
    """
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    rows = []
    for r in thresholds:
        hits = int(np.sum(samples >= r * scale))
        p = hits / n
        rows.append({"r": float(r), "exceedances": hits, "probability": p, "neg_log_p": -np.log(p) if hits else float("inf")})
    usable = [row for row in rows if row["exceedances"] >= min_exceedances]
    out = {"n": n, "scale": scale, "table": rows}
    if len(usable) < 3:
        out.update(verdict=INSUFFICIENT, slope=float("nan"), slope_low=float("nan"))
        return out
    r2 = np.array([row["r"] ** 2 for row in usable])
    nl = np.array([row["neg_log_p"] for row in usable])
    res = stats.linregress(r2, nl)
    low = res.slope - stats.t.ppf(0.975, len(r2) - 2) * res.stderr if len(r2) > 2 else -np.inf
    monotone = bool(np.all(np.diff(nl) >= 0))
    out.update(slope=float(res.slope), slope_low=float(low), verdict=PASS if (low > 0 and monotone) else FAIL)
    doubling = []
    by_r = {row["r"]: row for row in usable}
    for r, row in by_r.items():
        if 2 * r in by_r:
            doubling.append({"r": r, "log_tail_ratio": by_r[2 * r]["neg_log_p"] / row["neg_log_p"]})
    out["doubling"] = doubling
    return out


def sigma_tail_check(settings: LabSettings, n_sub: int = 64, batch: int = 2000) -> ConvergenceReport:
    """Tail of ``sup_{0<=tau<=T/d} [Sigma_d(t0+tau, v0) - Sigma_d(t0, v0)]`` at ``d = tail_d``."""
    d = settings.tail_d
    n = settings.tail_replications
    window = settings.T / d
    t0 = settings.T / 2.0
    t0 = min(t0, settings.T - window)
    times = t0 + window * np.arange(n_sub + 1) / n_sub
    sups = []
    done, b = 0, 0
    while done < n:
        m = min(batch, n - done)
        modes = sample_coupled_modes(substream_seed(settings.seed, _TAIL_STREAM, b), times, d - 1, [d], n_paths=m)
        sig = sigma_d_values(modes.sigma[d], d, [0.5], settings.sigma)[..., 0]
        sups.append(np.max(sig - sig[:, :1], axis=1))
        done += m
        b += 1
    sups = np.concatenate(sups)
    scale = window**0.25
    sd = float(np.std(sups))
    thresholds = [x * sd / scale for x in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5)]
    result = tail_check(sups, scale, thresholds)
    report = ConvergenceReport(config=asdict(settings))
    report.add(Statistic("tail.neg_log_p_slope_in_r2", d, result["slope"], None, "95% lower bound > 0 and monotone", result["verdict"]))
    for row in result["table"]:
        report.add(Statistic(f"tail.exceedance[r={row['r']:.4g}]", d, row["probability"], np.sqrt(row["probability"] * (1 - row["probability"]) / n)))
    report.sections["tail"] = result
    return report


def deterministic_check(settings: LabSettings) -> ConvergenceReport:
    """sup over the node lattice of |Δ_d - D|, expected to shrink with d."""
    report = ConvergenceReport(config=asdict(settings))
    errs = []
    for d in settings.d_list:
        grid = FieldGrid(settings.T, d)
        delta = delta_profile(DeterministicParams(settings.epsilon, d, settings.K), grid.t_nodes)
        cont = d_continuum_grid(grid.t_nodes, grid.v_nodes, settings.epsilon, settings.K)
        err = float(np.max(np.abs(delta - cont)))
        errs.append(err)
        report.add(Statistic("deterministic.sup_delta_minus_d_nodes", d, err))
    ok = monotone_fraction(np.array([errs]), settings.slack) == 1.0
    report.add(Statistic("deterministic.monotone_in_d", None, float(ok), None, f"non-increasing, slack {settings.slack}", PASS if ok else FAIL))
    report.sections["deterministic"] = {"d": list(settings.d_list), "sup_error": errs}
    return report


def oracle_eligibility(d: int, M: int, d_max: int = 32) -> tuple:
    """Whether the Euler oracle can run at resolution ``M`` steps per unit time, with the reason if not."""
    from .sde_oracle import default_step

    if d > d_max:
        return False, f"d={d} exceeds the oracle cap d <= {d_max}"
    if 1.0 / M > default_step(d):
        return False, f"M={M} gives dt=1/{M} > 1/(8 d^2) = 1/{8 * d * d}; needs M >= {8 * d * d}"
    return True, ""


def coupling_errors(d: int, T: float, M: int, seed: int, n_paths: int = 8, levels: int = 3) -> np.ndarray:
    """Mean over paths of ``sup |Euler - Sigma_d|`` on the node lattice, for dt = 1/M, 1/(2M), ...

    All levels read one driver at the finest step, coarsened by summing
    increments, so every level sees the same Brownian paths.
    """
    from .sde_oracle import ChainConfig, integrate
    from .spectral_core import SpectralBasis
    from .stochastic_field import make_driver, sigma_d_field

    steps = int(round(M * T))
    finest = 2 ** (levels - 1)
    driver = make_driver(seed, d - 1, steps * finest, T, n_paths=n_paths)
    grid = FieldGrid(T, d)
    basis = SpectralBasis(d)
    errs = []
    for level in range(levels):
        coarse = driver.coarsen(finest // 2**level)
        euler = integrate(ChainConfig(d, sigma=1.0, system="homogeneous"), coarse, grid.t_nodes)
        spectral = sigma_d_field(coarse, basis, 1.0, grid).values
        errs.append(np.max(np.abs(euler - spectral), axis=(-2, -1)))
    return np.array(errs)


def coupling_check(settings: LabSettings, M: int, n_paths: int = 8) -> ConvergenceReport:
    """Euler oracle against the spectral Σ_d on shared increments; error should halve with dt."""
    report = ConvergenceReport(config=asdict(settings))
    section = {}
    for d in settings.d_list:
        ok, reason = oracle_eligibility(d, M)
        if not ok:
            report.add(Statistic("coupling.skipped", d, float("nan"), None, reason, INFO))
            section[d] = {"skipped": reason}
            continue
        errs = coupling_errors(d, settings.T, M, substream_seed(settings.seed, 1_000_003, d), n_paths)
        mean = errs.mean(axis=1)
        ratios = mean[:-1] / mean[1:]
        good = bool(np.all((ratios >= 1.7) & (ratios <= 2.3)))
        for level, e in enumerate(mean):
            report.add(Statistic(f"coupling.mean_sup_error[dt=1/{M * 2**level}]", d, float(e), float(errs[level].std(ddof=1) / np.sqrt(n_paths))))
        report.add(Statistic("coupling.halving_ratio_min", d, float(ratios.min()), None, "all ratios in [1.7, 2.3]", PASS if good else FAIL))
        report.add(Statistic("coupling.halving_ratio_max", d, float(ratios.max()), None, "all ratios in [1.7, 2.3]", PASS if good else FAIL))
        section[d] = {"mean_error": mean, "ratios": ratios}
    report.sections["coupling"] = section
    return report


def sample_fields(settings: LabSettings, r: int, d: int) -> dict:
    """Fields of replication ``r`` at resolution ``d`` on the dense grid, for plotting."""
    n, times = _time_lattice(settings)
    modes = sample_coupled_modes(substream_seed(settings.seed, r), times, settings.K, settings.d_list)
    grid = FieldGrid(settings.T, d, settings.refine)
    rows = np.arange(grid.n_points) * (n // (d * settings.refine))
    sig = sigma_d_values(modes.sigma[d][rows], d, grid.v, settings.sigma)
    s = s_values(modes.s[rows], grid.v, settings.sigma)
    delta, cont = _deterministic_fields(settings.epsilon, settings.T, d, settings.refine, settings.K)
    return {"grid": grid, "Sigma_d": sig, "S": s, "Xi_d": delta + sig, "X": cont + s}
