"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line in the summary."""
import time

import numpy as np
import pytest

from brownchain.cli import main
from brownchain.convergence_lab import (
    FAIL,
    PASS,
    LabSettings,
    coupling_errors,
    full_theorem_check,
    variance_bound_suite,
)
from brownchain.deterministic_field import (
    DeterministicParams,
    d_continuum,
    d_continuum_grid,
    delta_discrete_matrix,
    delta_discrete_spectral,
    delta_profile,
    truncation_bound,
)
from brownchain.grid import FieldGrid
from brownchain.sde_oracle import ChainConfig, integrate, integrate_deterministic
from brownchain.spectral_core import SpectralBasis
from brownchain.stochastic_field import make_driver, ou_exact_variance, sample_coupled_modes

from oracles import dense_eigensystem, rk4_pulled_chain, variance_se


def note(request, text):
    request.node.user_properties.append(("detail", text))


@pytest.mark.criterion(1, "closed-form eigenpairs vs dense eigensolver, Q orthonormal")
def test_spectral_correctness(request):
    start = time.perf_counter()
    worst_val = worst_vec = worst_orth = 0.0
    for d in (3, 8, 16, 64):
        basis = SpectralBasis(d)
        vals, vecs = dense_eigensystem(d)
        worst_val = max(worst_val, np.max(np.abs(basis.eigenvalues - vals)))
        worst_vec = max(worst_vec, np.max(np.abs(np.abs(np.sum(basis.Q * vecs, axis=0)) - 1)))
        worst_orth = max(worst_orth, np.max(np.abs(basis.Q @ basis.Q.T - np.eye(d - 1))))
    elapsed = time.perf_counter() - start
    note(request, f"eig {worst_val:.1e}, vec {worst_vec:.1e}, QQ^T {worst_orth:.1e}, {elapsed:.1f}s")
    assert worst_val <= 1e-10
    assert worst_vec <= 1e-10
    assert worst_orth <= 1e-12
    assert elapsed < 5


@pytest.mark.criterion(2, "matrix and spectral profile forms agree; RK4 oracle at d = 8")
def test_deterministic_representations(request):
    start = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 33))
        t = float(rng.uniform(0, 1))
        i = int(rng.integers(0, d + 1))
        p = DeterministicParams(1.0, d)
        worst = max(worst, abs(delta_discrete_matrix(p, t, i) - delta_discrete_spectral(p, t, i)))
    rk_err = 0.0
    p = DeterministicParams(1.0, 8)
    for t in (0.01, 0.1, 0.5):
        rk_err = max(rk_err, np.max(np.abs(rk4_pulled_chain(8, 1.0, t) - delta_discrete_spectral(p, t, np.arange(9)))))
    elapsed = time.perf_counter() - start
    note(request, f"agreement {worst:.1e}, RK4 {rk_err:.1e}, {elapsed:.1f}s")
    assert worst <= 1e-12
    assert rk_err <= 1e-6
    assert elapsed < 30


@pytest.mark.criterion(3, "continuum profile: initial/boundary values, d = 256 sup error")
def test_continuum_profile(request):
    start = time.perf_counter()
    K = 200
    v = np.linspace(0.1, 0.9, 9)
    init = np.max(np.abs(d_continuum(0.0, v, 1.0, K) - v))
    t = np.linspace(0, 1, 21)
    bnd = max(np.max(np.abs(d_continuum(t, 0.0, 1.0, K))), np.max(np.abs(d_continuum(t, 1.0, 1.0, K) - (1 + t))))
    d = 256
    grid = FieldGrid(1.0, d)
    sup = np.max(np.abs(delta_profile(DeterministicParams(1.0, d), grid.t_nodes) - d_continuum_grid(grid.t_nodes, grid.v_nodes, 1.0, 400)))
    elapsed = time.perf_counter() - start
    note(request, f"D(0,v) {init:.1e} (bound {truncation_bound(1.0, K):.1e}), boundary {bnd:.1e}, d=256 sup {sup:.2e}, {elapsed:.1f}s")
    assert init <= min(1e-5, truncation_bound(1.0, K))
    assert bnd <= truncation_bound(1.0, K)
    assert sup < 5e-3
    assert elapsed < 30


@pytest.mark.criterion(4, "OU Monte Carlo variances within 3 SE at 1e5 replications")
def test_ou_variance_oracle(request):
    start = time.perf_counter()
    d = 32
    times = np.array([0.0, 0.05, 0.1, 0.3, 0.5])  # several transitions composed before each check
    modes = sample_coupled_modes(77, times, d - 1, [d], n_paths=100_000)
    rates_d = SpectralBasis(d).rates
    worst = 0.0
    for k in (1, 4, 16):
        for t in (0.1, 0.5):
            j = int(np.flatnonzero(times == t)[0])
            for sample, rate in ((modes.s[:, j, k - 1], np.pi**2 * k**2), (modes.sigma[d][:, j, k - 1], rates_d[k - 1])):
                z = abs(sample.var(ddof=1) - ou_exact_variance(rate, t)) / variance_se(sample)
                worst = max(worst, z)
    elapsed = time.perf_counter() - start
    note(request, f"max |z| = {worst:.2f} over 12 variances, {elapsed:.1f}s")
    assert worst <= 3.0
    assert elapsed < 120


@pytest.mark.criterion(5, "Euler oracle vs spectral field: error halves with dt at d = 8")
def test_coupling_fidelity(request):
    start = time.perf_counter()
    dt0 = 1 / 512
    errs = coupling_errors(8, 1.0, 512, seed=2024, n_paths=8).mean(axis=1)
    ratios = errs[:-1] / errs[1:]
    constants = errs / (dt0 / 2 ** np.arange(3))
    elapsed = time.perf_counter() - start
    note(request, f"errors {np.array2string(errs, precision=4)}, ratios {np.array2string(ratios, precision=3)}, {elapsed:.1f}s")
    assert np.all((ratios >= 1.7) & (ratios <= 2.3))
    assert constants.max() / constants.min() <= 1.5
    assert elapsed < 300


@pytest.mark.criterion(6, "variance-bound suite with 2000 replications")
def test_variance_bound_suite(request):
    start = time.perf_counter()
    settings = LabSettings(variance_replications=2000)
    rep = variance_bound_suite(settings)
    verdicts = [s for s in rep.statistics if s.verdict in (PASS, FAIL)]
    elapsed = time.perf_counter() - start
    spreads = {s.name.split(".")[1] + ("" if s.d is None else f"[{s.d}]"): round(s.value, 2) for s in verdicts}
    note(request, f"spreads {spreads}, {elapsed:.1f}s")
    assert settings.variance_replications >= 1000
    assert {"variance.d_times_var_stability", "variance.v_modulus_stability", "variance.t_modulus_stability_S"} <= {s.name for s in verdicts}
    assert all(s.verdict == PASS for s in verdicts), [s for s in verdicts if s.verdict != PASS]
    assert elapsed < 900


@pytest.mark.criterion(7, "theorem-level trend at 256 replications, per-seed monotonicity")
def test_theorem_trend(request):
    start = time.perf_counter()
    settings = LabSettings(replications=256, monotone_seeds=100)
    rep = full_theorem_check(settings, include_suites=False, target="xi")
    rows = {s.name: s for s in rep.statistics if s.verdict in (PASS, FAIL)}
    means = [s.value for s in rep.statistics if s.name == "theorem.mean_sup_xi_minus_x"]
    elapsed = time.perf_counter() - start
    note(
        request,
        f"means {np.array2string(np.array(means), precision=3)}, "
        f"monotone seeds {rows['theorem.per_seed_monotone_fraction'].value:.2f}, {elapsed:.0f}s",
    )
    assert rows["theorem.mean_sup_strictly_decreasing"].verdict == PASS
    assert rows["theorem.per_seed_monotone_fraction"].value >= 0.95
    assert all(a > b for a, b in zip(means, means[1:]))
    assert elapsed < 1800


@pytest.mark.criterion(8, "pulled chain = deterministic + homogeneous on shared increments")
def test_superposition(request):
    start = time.perf_counter()
    worst = 0.0
    for d, seed in ((8, 1), (8, 2), (16, 3)):
        M = 8 * d * d
        drv = make_driver(seed, d - 1, M, 1.0, n_paths=4)
        times = drv.times[:: d * 2]
        pulled = integrate(ChainConfig(d, sigma=1.0, epsilon=1.0), drv, times)
        det = integrate_deterministic(ChainConfig(d, epsilon=1.0), drv.dt, times)
        hom = integrate(ChainConfig(d, sigma=1.0, system="homogeneous"), drv, times)
        worst = max(worst, np.max(np.abs(pulled - det - hom)))
    elapsed = time.perf_counter() - start
    note(request, f"max residual {worst:.1e}, {elapsed:.1f}s")
    assert worst <= 1e-12
    assert elapsed < 60


REPRO_CONFIG = """\
[experiment]
kind = {kind}
seed = 31
workers = 1
[discretization]
d_list = 8, 16
K = 256
M = 512
replications = 6
[lab]
refine = 2
monotone_seeds = 6
variance_replications = 1000
tail_replications = 500
tail_d = 8
"""


@pytest.mark.criterion(9, "identical config and seed give byte-identical CSV outputs")
def test_reproducibility(request, tmp_path):
    compared = 0
    for kind in ("deterministic", "homogeneous", "full", "tail-check"):
        cfg = tmp_path / f"{kind}.ini"
        cfg.write_text(REPRO_CONFIG.format(kind=kind))
        outs = [tmp_path / f"{kind}_a", tmp_path / f"{kind}_b"]
        for out in outs:
            main(["run", "--config", str(cfg), "--out", str(out)])
        names = sorted(p.name for p in outs[0].glob("*.csv"))
        assert names and names == sorted(p.name for p in outs[1].glob("*.csv"))
        for name in names:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), f"{kind}/{name}"
            compared += 1
    note(request, f"{compared} CSV files compared across 4 experiment kinds")
