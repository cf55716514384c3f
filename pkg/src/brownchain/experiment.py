"""Experiment orchestration: run a configured study and write its artifacts."""
from __future__ import annotations

import csv
import logging
import os
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .convergence_lab import (
    FAIL,
    INFO,
    PASS,
    ConvergenceReport,
    LabSettings,
    Statistic,
    coupling_check,
    deterministic_check,
    full_theorem_check,
    oracle_eligibility,
    sample_fields,
    sigma_tail_check,
    variance_bound_suite,
)
from .deterministic_field import (
    DeterministicParams,
    d_continuum,
    d_continuum_grid,
    delta_discrete_matrix,
    delta_discrete_spectral,
    delta_profile,
    truncation_bound,
)
from .grid import FieldGrid
from .stochastic_field import floor_sites, s_tail_variance_bound, substream_seed

log = logging.getLogger(__name__)

CHECKS = {
    "deterministic": [
        "D(0, v) = v within the series truncation bound",
        "D(t, 0) = 0 and D(t, 1) = 1 + eps t",
        "matrix and spectral forms of Delta agree to 1e-12",
        "heat-equation residual of D <= 1e-2",
        "sup |Delta_d - D| non-increasing in d (10% slack)",
    ],
    "homogeneous": [
        "E sup |Sigma_d - S| strictly decreasing in d",
        "per-seed monotonicity of sup |Sigma_d - S| for >= 95% of seeds",
        "three-term split: exact decomposition, triangle inequality, decreasing terms",
        "variance suite: d Var[Sigma_d - S], v-modulus and t-modulus constants stable within 2x",
        "Euler oracle vs Sigma_d: error halves with dt (ratios in [1.7, 2.3])",
    ],
    "full": [
        "E sup |Xi_d - X| strictly decreasing in d",
        "per-seed monotonicity of sup |Xi_d - X| for >= 95% of seeds",
        "three-term split: exact decomposition, triangle inequality, decreasing terms",
        "variance suite: d Var[Sigma_d - S], v-modulus and t-modulus constants stable within 2x",
        "tail of Sigma_d time increments: -log P grows at least linearly in r^2",
        "sup |Delta_d - D| non-increasing in d (10% slack)",
    ],
    "variance-suite": [
        "variance suite: d Var[Sigma_d - S], v-modulus and t-modulus constants stable within 2x",
    ],
    "tail-check": [
        "tail of Sigma_d time increments: -log P grows at least linearly in r^2",
    ],
}


def _lab(config: ExperimentConfig) -> LabSettings:
    return LabSettings.from_config(config)


def _profile_checks(config: ExperimentConfig) -> ConvergenceReport:
    report = ConvergenceReport()
    eps, K = config.epsilon, config.K
    bound = max(truncation_bound(eps, K), 1e-15)
    v = np.linspace(0.1, 0.9, 9)
    err0 = float(np.max(np.abs(d_continuum(0.0, v, eps, K) - v)))
    report.add(Statistic("deterministic.D_initial_profile", None, err0, None, f"<= {bound:.3g}", PASS if err0 <= bound else FAIL))
    t = np.linspace(0.0, config.T, 11)
    err_b = float(
        max(np.max(np.abs(d_continuum(t, 0.0, eps, K))), np.max(np.abs(d_continuum(t, 1.0, eps, K) - (1 + eps * t))))
    )
    report.add(Statistic("deterministic.D_boundary", None, err_b, None, "== 0", PASS if err_b == 0.0 else FAIL))

    rng = np.random.default_rng(substream_seed(config.seed, 2_000_001))
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 33))
        params = DeterministicParams(eps, d)
        tt = float(rng.uniform(0, 1))
        i = int(rng.integers(0, d + 1))
        worst = max(worst, abs(delta_discrete_matrix(params, tt, i) - delta_discrete_spectral(params, tt, i)))
    report.add(Statistic("deterministic.representations_agree", None, worst, None, "<= 1e-12", PASS if worst <= 1e-12 else FAIL))

    dt, dv = 1e-5, 1e-3
    ts = np.array([0.05, 0.1, 0.5, 1.0])[:, None]
    vs = np.linspace(0.1, 0.9, 9)[None, :]
    f = lambda tt, vv: d_continuum(tt, vv, eps, 400)  # noqa: E731
    resid = (f(ts + dt, vs) - f(ts, vs)) / dt - (f(ts, vs + dv) - 2 * f(ts, vs) + f(ts, vs - dv)) / dv**2
    r = float(np.max(np.abs(resid)))
    report.add(Statistic("deterministic.heat_residual", None, r, None, "<= 1e-2", PASS if r <= 1e-2 else FAIL))
    return report


def execute(config: ExperimentConfig) -> ConvergenceReport:
    """Run the checks of ``config.kind`` and return the combined report."""
    lab = _lab(config)
    kind = config.kind
    report = ConvergenceReport()
    if kind == "deterministic":
        report.merge(_profile_checks(config))
        report.merge(deterministic_check(lab))
    elif kind == "homogeneous":
        report.merge(full_theorem_check(lab, include_suites=False, target="sigma"))
        report.merge(variance_bound_suite(lab))
        report.merge(coupling_check(lab, config.M))
    elif kind == "full":
        report.merge(full_theorem_check(lab, include_suites=True, target="xi"))
        report.merge(deterministic_check(lab))
    elif kind == "variance-suite":
        report.merge(variance_bound_suite(lab))
    elif kind == "tail-check":
        report.merge(sigma_tail_check(lab))
    else:  # validated earlier
        raise ValueError(kind)
    report.config = {"version": __version__, **config_dict(config)}
    return report


def config_dict(config: ExperimentConfig) -> dict:
    from dataclasses import asdict

    out = asdict(config)
    out["d_list"] = list(config.d_list)
    return out


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_heatmap(path: Path, times, v, values) -> None:
    """Dense CSV matrix: first row holds v, first column holds t."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t\\v", *(repr(float(x)) for x in v)])
        for t, row in zip(times, values):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in row)])


def write_curve(path: Path, x, y, header=("d", "value")) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in zip(x, y):
            w.writerow([a, repr(float(b))])


def _plot_data(config: ExperimentConfig, report: ConvergenceReport, out: Path) -> list:
    """Write plot-data files and return their paths."""
    lab = _lab(config)
    written = []
    d_max = max(config.d_list)
    if config.kind == "deterministic":
        grid = FieldGrid(config.T, d_max, lab.refine)
        delta = delta_profile(DeterministicParams(config.epsilon, d_max, config.K), grid.times)[:, floor_sites(grid.v, d_max)]
        cont = d_continuum_grid(grid.times, grid.v, config.epsilon, config.K)
        for name, values in (("D", cont), (f"Delta_{d_max}", delta)):
            p = out / f"heatmap_{name}.csv"
            write_heatmap(p, grid.times, grid.v, values)
            written.append(p)
        sec = report.sections["deterministic"]
        p = out / "curve_deterministic_sup_error.csv"
        write_curve(p, sec["d"], sec["sup_error"], ("d", "sup_delta_minus_d"))
        written.append(p)
    if config.kind in ("full", "homogeneous"):
        fields = sample_fields(lab, 0, d_max)
        grid = fields["grid"]
        names = ("X", "Xi_d") if config.kind == "full" else ("S", "Sigma_d")
        for name in names:
            p = out / f"heatmap_{name.replace('_d', f'_{d_max}')}.csv"
            write_heatmap(p, grid.times, grid.v, fields[name])
            written.append(p)
        label = "theorem" if config.kind == "full" else "homogeneous"
        curves = report.sections[label]["curves"]
        p = out / "curve_mean_sup.csv"
        write_curve(p, curves["d"], curves["mean_sup"], ("d", "mean_sup"))
        written.append(p)
        for term, stats_ in report.sections[label]["split"].items():
            p = out / f"curve_split_{term}.csv"
            write_curve(p, curves["d"], stats_["mean"], ("d", f"mean_sup_{term}"))
            written.append(p)
    if "variance" in report.sections:
        sec = report.sections["variance"]
        p = out / "curve_d_times_variance.csv"
        write_curve(p, sec["d_scaling"]["d"], sec["d_scaling"]["ratio"], ("d", "d_times_var"))
        written.append(p)
        p = out / "curve_v_modulus.csv"
        write_curve(p, [repr(g) for g in sec["v_modulus"]["gap"]], sec["v_modulus"]["ratio"], ("gap", "var_over_gap"))
        written.append(p)
        p = out / "curve_t_modulus_S.csv"
        tm = sec["t_modulus"]["S"]
        write_curve(p, [repr(g) for g in tm["gap"]], tm["ratio"], ("gap", "var_over_sqrt_gap"))
        written.append(p)
    if "tail" in report.sections:
        tab = report.sections["tail"]["table"]
        p = out / "curve_tail.csv"
        write_curve(p, [repr(row["r"]) for row in tab], [row["probability"] for row in tab], ("r", "exceedance_probability"))
        written.append(p)
    return written


def _render_svg(csv_paths: list, out: Path) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    for p in csv_paths:
        rows = list(csv.reader(open(p, encoding="utf-8")))
        fig, ax = plt.subplots(figsize=(5, 4))
        if p.name.startswith("heatmap_"):
            v = np.array(rows[0][1:], dtype=float)
            t = np.array([r[0] for r in rows[1:]], dtype=float)
            z = np.array([r[1:] for r in rows[1:]], dtype=float)
            mesh = ax.pcolormesh(v, t, z, shading="nearest")
            fig.colorbar(mesh, ax=ax)
            ax.set_xlabel("v")
            ax.set_ylabel("t")
        else:
            x = np.array([r[0] for r in rows[1:]], dtype=float)
            y = np.array([r[1] for r in rows[1:]], dtype=float)
            ax.loglog(x, y, "o-")
            ax.set_xlabel(rows[0][0])
            ax.set_ylabel(rows[0][1])
        ax.set_title(p.stem)
        target = out / (p.stem + ".svg")
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(target)
    return written


def run(config: ExperimentConfig, svg: bool = False) -> tuple:
    """Execute and persist; returns ``(exit_code, report)``. Writes only below ``config.output``."""
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    report = execute(config)
    _write_text(out / "config.resolved.ini", config.to_ini())
    _write_text(out / "report.json", report.to_json())
    _write_text(out / "statistics.csv", report.to_csv())
    plots = _plot_data(config, report, out)
    if svg:
        _render_svg(plots, out)
    for s in report.failures():
        log.warning("FAIL %s (d=%s): value=%s threshold=%s", s.name, s.d, s.value, s.threshold)
    return (0 if report.passed else 1), report


def describe(config: ExperimentConfig) -> str:
    """Dry-run plan: resolved parameters, cost estimates, tail bounds and checks."""
    lab = _lab(config)
    lines = [f"brownchain {__version__} plan for kind = {config.kind}", "", "[resolved configuration]"]
    lines += ["  " + ln for ln in config.to_ini().splitlines() if ln and not ln.startswith("[")]
    lines += ["", "[truncation bounds]"]
    lines.append(f"  S-truncation variance tail (K={config.K}): sigma^2/(pi^2 K) = {s_tail_variance_bound(config.K, config.sigma):.6e}")
    lines.append(f"  D-series tail (K={config.K}): eps/(pi^3 K^2) = {truncation_bound(config.epsilon, config.K):.6e}")

    import math

    n_times = math.lcm(*(lab.refine * d for d in config.d_list)) + 1
    coords = config.K + sum(d - 1 for d in config.d_list)
    mem = n_times * coords * 8 * max(1, config.workers)
    n_rep = max(config.replications, config.monotone_seeds)
    # ~2e-8 s per (time step x coordinate) for sampling and field assembly, measured on one core
    est = 2e-8 * n_times * coords * 6 * n_rep / max(1, config.workers)
    lines += ["", "[cost estimates]"]
    if config.kind in ("full", "homogeneous"):
        lines.append(f"  coupled sample per replication: {n_times} times x {coords} coordinates, ~{mem / 2**20:.1f} MiB")
        lines.append(f"  theorem-check replications: {n_rep}, rough time ~{est:.0f} s")
    if config.kind in ("full", "homogeneous", "variance-suite"):
        lines.append(f"  variance suite: {config.variance_replications} replications")
    if config.kind in ("full", "tail-check"):
        lines.append(f"  tail check: {config.tail_replications} replications at d = {config.tail_d}")

    if config.kind == "homogeneous":
        lines += ["", "[Euler oracle]"]
        for d in config.d_list:
            ok, reason = oracle_eligibility(d, config.M)
            lines.append(f"  d = {d}: " + ("runs at dt = 1/M, 1/2M, 1/4M" if ok else f"skipped ({reason})"))
    if config.kind in ("full", "homogeneous", "variance-suite") and config.K < 256:
        lines.append(f"  warning: K={config.K} cannot resolve the smallest v-gap 2^-8; the v-modulus check needs K >= 256")
    lines += ["", "[checks]"]
    lines += [f"  - {c}" for c in CHECKS[config.kind]]
    lines.append(f"  outputs under {os.fspath(config.output)}")
    return "\n".join(lines) + "\n"
