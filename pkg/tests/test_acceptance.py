"""Acceptance criteria, one test and one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary under "acceptance criteria".
"""
import copy
import subprocess
import sys
import time
from pathlib import Path

import pytest

from prequant_lab import cli, suites

U1 = {"group": "U1", "polynomial": {"name": "c1_squared"}, "family": {"name": "u1_exact_plane", "amplitude": 0.3}}
SQRT2 = 2 ** 0.5
ROOT = Path(__file__).resolve().parents[1]


def config(n=32, fd=8, seed=7, scale=None, **extra):
    cfg = copy.deepcopy(cli.DEFAULT_CONFIG)
    cfg.pop("tolerances")
    cfg["model"] = {"id": "T3", "n": n, "fd_order": fd}
    cfg["rng_seed"] = seed
    cfg.update(copy.deepcopy(extra))
    if scale is not None:
        cfg["polynomial"] = dict(cfg["polynomial"], scale=scale)
    cli.validate_config(cfg)
    return cfg


def residual(test_id, cfg):
    row = suites.run_test(test_id, cfg)
    if row["residual"] is None:
        pytest.fail(f"{test_id}: {row['details']}")
    return row["residual"], row["details"]


def test_01_transgression_exactness(criterion):
    t0 = time.perf_counter()
    r16, _ = residual("transgression.exactness", config(n=16, fd=4))
    r32, det = residual("transgression.exactness", config(n=32, fd=4))
    elapsed = time.perf_counter() - t0
    ratio = r16 / r32
    # same draw law, other seeds: the bound must not hinge on one sample
    others = [residual("transgression.exactness", config(n=32, fd=4, seed=s))[0] for s in (11, 19)]
    worst = max([r32] + others)
    ok = worst < 1e-5 and ratio >= 8 and elapsed < 10
    assert criterion(1, "transgression exactness", ok,
                     f"N32 residual {r32:.2e}, worst of 3 seeds {worst:.2e} (< 1e-5), "
                     f"relative {r32 / det['scale']:.1e}, N16/N32 ratio {ratio:.1f} (>= 8), {elapsed:.1f} s (< 10)")


def test_02_chern_simons_quantization(criterion):
    t0 = time.perf_counter()
    worst, signs, jumps = 0.0, set(), []
    for seed in (7, 11, 19):
        res, det = residual("cs.integer_jump", config(n=48, seed=seed))
        worst = max(worst, res)
        signs.update(int(round(j)) // n for j, n in zip(det["jumps"], (1, 2)))
        jumps.extend(det["jumps"])
    control, _ = residual("cs.integer_jump", config(n=48, scale=SQRT2))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-3 and len(signs) == 1 and control > 0.05 and elapsed < 60
    assert criterion(2, "Chern-Simons quantization", ok,
                     f"worst |jump -+ n| {worst:.2e} (< 1e-3), integer signs {sorted(signs)}, "
                     f"sqrt2 control {control:.3f} (> 0.05), {elapsed:.1f} s (< 60)")


@pytest.mark.parametrize("group", ["SU2", "U1"])
def test_03_drho_equals_sigma(criterion, group):
    cfg = config() if group == "SU2" else config(**U1)
    res, det = residual("rho.exterior_derivative", cfg)
    assert criterion(3, f"d rho_c = sigma_c ({group})", res < 1e-6,
                     f"relative {res:.2e} (< 1e-6), plain-FD order estimates {det['fd_order_estimates']}")


@pytest.mark.parametrize("group", ["SU2", "U1"])
def test_04_moment_identity(criterion, group):
    cfg = config() if group == "SU2" else config(**U1)
    res, _ = residual("moment.identity", cfg)
    assert criterion(4, f"moment identity ({group})", res < 1e-6, f"residual {res:.2e} (< 1e-6)")


def test_05_cocycle_law(criterion):
    cfg = config(**U1)
    plain, _ = residual("alpha.cocycle", cfg)
    mixed, _ = residual("alpha.cocycle_mixed", cfg)
    ok = plain < 1e-6 and mixed < 1e-5
    assert criterion(5, "cocycle law (U(1) windings)", ok,
                     f"boundary pair {plain:.2e} (< 1e-6), path/boundary pair {mixed:.2e} (< 1e-5)")


@pytest.mark.parametrize("group", ["SU2", "U1"])
def test_06_path_vs_boundary(criterion, group):
    cfg = config() if group == "SU2" else config(**U1)
    res, det = residual("alpha.path_vs_boundary", cfg)
    assert criterion(6, f"path/boundary alpha as reals ({group})", res < 1e-5,
                     f"|{det['alpha_path']:.6f} - {det['alpha_boundary']:.6f}| = {res:.2e} (< 1e-5)")


def test_07_u_independence(criterion):
    res, _ = residual("alpha.u_independence", config(n=48))
    control, _ = residual("alpha.u_independence", config(n=48, scale=SQRT2))
    ok = res < 1e-4 and control > 0.05
    assert criterion(7, "u-independence mod 1", ok,
                     f"distance to Z {res:.2e} (< 1e-4), sqrt2 control {control:.3f} (> 0.05)")


def test_08_change_of_background(criterion):
    cfg = config()
    shift, _ = residual("background.rho_shift", cfg)
    section, _ = residual("background.section", cfg)
    ok = shift < 1e-5 and section < 1e-6
    assert criterion(8, "change of background", ok,
                     f"rho shift {shift:.2e} (< 1e-5), section transport {section:.2e} (< 1e-6)")


def test_09_section_contract(criterion):
    cfg = config()
    cov, _ = residual("section.covariant", cfg)
    flat, det = residual("section.flat_slice", cfg)
    ok = cov < 1e-6 and flat < 1e-8
    assert criterion(9, "section contract", ok,
                     f"covariant derivative {cov:.2e} (< 1e-6), flat slice {flat:.2e} (< 1e-8)")


def test_10_holonomy_character(criterion):
    cfg = config()
    flux, det = residual("holonomy.flux", cfg)
    reparam, _ = residual("holonomy.reparametrization", cfg)
    disks = len(det["rows"])
    ok = flux < 1e-5 and reparam < 1e-10 and disks >= 5
    assert criterion(10, "holonomy is a differential character", ok,
                     f"{disks} disks worst {flux:.2e} (< 1e-5), reparametrization {reparam:.2e} (< 1e-10)")


def test_11_metrics(criterion):
    cfg = {"version": 1, "suite": "metrics", "rng_seed": 7,
           "metric": {"n": 64, "fd_order": 8, "solid_n": 32, "solid_fd_order": 4}}
    lc, _ = residual("lc.identities", cfg)
    nat, _ = residual("lc.naturality", cfg)
    cs, det = residual("metric.cs_invariance", cfg)
    ok = lc < 1e-6 and nat < 1e-5 and cs < 1e-4
    assert criterion(11, "Levi-Civita and metric Chern-Simons", ok,
                     f"LC identities {lc:.2e} (< 1e-6), naturality {nat:.2e} (< 1e-5), "
                     f"solid torus CS invariance {cs:.2e} (< 1e-4)")


def test_12_determinism(criterion, tmp_path):
    reports = []
    for threads in (1, 2):
        out = tmp_path / f"threads{threads}"
        proc = subprocess.run([sys.executable, "-m", "prequant_lab", "verify", "--config", "configs/default.yaml",
                               "--threads", str(threads), "--out", str(out), "--quiet"],
                              capture_output=True, text=True, cwd=ROOT)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        reports.append((out / "report.json").read_bytes())
    same = reports[0] == reports[1]
    assert criterion(12, "determinism of the default suite", same,
                     f"reports at 1 and 2 threads {'identical' if same else 'differ'} ({len(reports[0])} bytes)")

