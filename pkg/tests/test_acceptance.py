"""End-to-end acceptance criteria.

Each test records a one-line verdict that is printed in the terminal
summary, then asserts it.
"""

import dataclasses
import math
import pathlib
import time

import numpy as np
import pytest

from test_blowup import gronwall_cases, mp_C0, mp_C1_C2, mp_C3, mp_c_mu, random_window_params, rel, saturated_solution
from test_kinetic import l1_error, rk4_errors
from vlasov_spray.blowup import (bounding_curves, constant_C0, constant_C3, constant_c_mu, constants_C1_C2,
                                 gronwall_bound)
from vlasov_spray.cli import EXIT_WINDOW, certify_config, main
from vlasov_spray.config import parse_config
from vlasov_spray.coupled import run
from vlasov_spray.diagnostics import check_identities, series_arrays
from vlasov_spray.grid import PhaseGrid
from vlasov_spray.picard import picard_iterate
from vlasov_spray.presets import make_preset
from vlasov_spray.series import write_series

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"
SHIPPED = sorted(p for p in CONFIGS.glob("*.cfg") if p.stem != "window_violation")


def run_config(path, threads=1, **grid_override):
    cfg = parse_config(path)
    sc = cfg.scenario()
    sc.threads = threads
    for key, value in grid_override.items():
        setattr(sc, key, value)
    t0 = time.perf_counter()
    series = run(sc, meta=cfg.metadata())
    return cfg, series, time.perf_counter() - t0


@pytest.fixture(scope="module")
def shipped_runs(tmp_path_factory):
    """Every shipped scenario at 1, 2 and 8 threads: {stem: {threads: (cfg, series, seconds, csv bytes)}}."""
    out = {}
    base = tmp_path_factory.mktemp("shipped")
    for path in SHIPPED:
        out[path.stem] = {}
        for th in (1, 2, 8):
            cfg, series, seconds = run_config(path, th)
            csv_path = base / f"{path.stem}_{th}.csv"
            write_series(series, csv_path, write_meta=False)
            out[path.stem][th] = (cfg, series, seconds, csv_path.read_bytes())
    return out


def drift(values):
    values = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(values[0])))
    return float(np.max(np.abs(values - values[0]))) / scale if scale > 0 else float(np.max(np.abs(values)))


def momentum_drift(col):
    m = col["M_rho"] + col["M_f"]
    scale = float(col["m_rho"][0] + col["m_f"][0])
    return float(np.max(np.abs(m - m[0]))) / scale


def test_criterion_01_conservation(shipped_runs, verdict):
    _, fluid, t_fluid, _ = shipped_runs["fluid_only_1d"][1]
    _, ref, t_ref, _ = shipped_runs["reference_1d"][1]
    cf, cr = series_arrays(fluid.records), series_arrays(ref.records)
    fluid_drift = max(drift(cf["m_rho"]), momentum_drift(cf))
    ref_mass, ref_f, ref_m = drift(cr["m_rho"]), drift(cr["m_f"]), momentum_drift(cr)
    _, coarse, _ = run_config(CONFIGS / "reference_1d.cfg", grid=PhaseGrid(1, 64, 64, 8.0, 4.0), n_steps=250,
                              output_every=5)
    cc = series_arrays(coarse.records)
    coarse_drift = max(drift(cc["m_f"]), momentum_drift(cc))
    fine_drift = max(ref_f, ref_m)
    # both drifts sit at round-off, where a refinement order carries no information
    roundoff = max(coarse_drift, fine_drift) < 1e-12
    ok = (fluid_drift < 1e-11 and ref_mass < 1e-11 and ref_f < 1e-6 and ref_m < 1e-6 and roundoff
          and t_fluid + t_ref < 60.0)
    verdict(1, "mass/momentum conservation", ok,
            f"fluid-only {fluid_drift:.2e}; coupled m_rho {ref_mass:.2e}, m_f {ref_f:.2e}, M {ref_m:.2e}; "
            f"drift at 64^2 {coarse_drift:.1e} and 128^2 {fine_drift:.1e} (round-off, so the order test is "
            f"vacuous); {t_fluid + t_ref:.1f} s")
    assert ok


def test_criterion_02_energy_dissipation(shipped_runs, verdict):
    cfg, ref, _, _ = shipped_runs["reference_1d"][1]
    col = series_arrays(ref.records)
    energy = col["E_k"] + col["E_i"] + col["E_f"]
    rise = float(np.max(np.diff(energy)))
    res = check_identities(ref.records, 1e-6, params=cfg.params)["b"].residual
    _, coarse, _ = run_config(CONFIGS / "reference_1d.cfg", grid=PhaseGrid(1, 64, 64, 8.0, 4.0), n_steps=250,
                              output_every=5)
    res_coarse = check_identities(coarse.records, 1e-6, params=cfg.params)["b"].residual
    ok = cfg.params.beta >= 0.0 and rise <= 1e-8 and res < 0.05 and res_coarse / res >= 2.0
    verdict(2, "energy dissipation", ok,
            f"max record-to-record rise {rise:.2e}; dE/dt residual {res:.2%} at 128^2, {res_coarse:.2%} at 64^2 "
            f"(ratio {res_coarse / res:.2f})")
    assert ok


def test_criterion_03_virial_identity(shipped_runs, verdict):
    cfg, ref, _, _ = shipped_runs["reference_1d"][1]
    cfg_eq, eq, _, _ = shipped_runs["equilibrium_1d"][1]
    res = check_identities(ref.records, 1e-6, params=cfg.params)["c"].residual
    res_eq = check_identities(eq.records, params=cfg_eq.params)["c"].residual
    ok = res < 0.02 and res_eq < 1e-10
    verdict(3, "dI/dt = W", ok, f"reference residual {res:.2e}, equilibrium {res_eq:.1e}")
    assert ok


def test_criterion_04_momentum_bound(shipped_runs, verdict):
    violations, worst = 0, -math.inf
    for stem, runs in shipped_runs.items():
        col = series_arrays(runs[1][1].records)
        m = col["M_rho"] + col["M_f"]
        gap = np.sum(m * m, axis=1) - (4.0 * np.maximum(col["m_rho"], col["m_f"]) * (col["E_k"] + col["E_f"]) + 1e-12)
        violations += int(np.sum(gap > 0.0))
        worst = max(worst, float(np.max(gap)))
    ok = violations == 0
    verdict(4, "momentum bound", ok, f"{violations} violations over {len(shipped_runs)} scenarios")
    assert ok


def test_criterion_05_j_inequality(shipped_runs, verdict):
    violations, total = 0, 0
    for stem, runs in shipped_runs.items():
        col = series_arrays(runs[1][1].records)
        s = col["t"] + 1.0
        violations += int(np.sum(col["J"] < s * s * col["E_i"] - 1e-12 * np.abs(col["J"])))
        total += len(col["t"])
    ok = violations == 0
    verdict(5, "J >= (t+1)^2 E_i", ok, f"{violations} violations in {total} records")
    assert ok


def test_criterion_06_exact_solution_oracles(verdict):
    t0 = time.perf_counter()
    errs = [l1_error(n, 0.0) for n in (32, 64, 128, 256)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
    rk = rk4_errors()
    rk_orders = [math.log2(rk[i] / rk[i + 1]) for i in range(len(rk) - 1)]
    seconds = time.perf_counter() - t0
    ok = all(1.8 <= o <= 2.3 for o in orders) and min(rk_orders) >= 3.8 and seconds < 30.0
    verdict(6, "exact-solution oracles", ok,
            f"transport orders {', '.join(f'{o:.2f}' for o in orders)}; RK4 orders "
            f"{', '.join(f'{o:.2f}' for o in rk_orders)}; {seconds:.1f} s")
    assert ok


def test_criterion_07_constants(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        p = random_window_params(rng)
        m, e0, j0 = (10 ** rng.uniform(-2, 2) for _ in range(3))
        w0 = rng.uniform(-1, 1) * e0
        g, d = p.gamma, p.delta
        c1, c2 = constants_C1_C2(w0, e0, m, p)
        o1, o2 = mp_C1_C2(w0, e0, m, g, d, p.alpha, p.beta)
        scale = abs(w0) + abs(float(o1) - w0)
        worst = max(worst, rel(constant_C0(m, g), mp_C0(m, g)), rel(constant_c_mu(m, e0, g, d), mp_c_mu(m, e0, g, d)),
                    rel(c2, o2), rel(constant_C3(j0, m, p), mp_C3(j0, m, g, d, p.alpha, p.beta)),
                    abs(c1 - float(o1)) / scale)
    reductions = 0
    for _ in range(20):
        p = random_window_params(rng)
        # alpha = 9 * 2^-k and beta = -2 * 2^-k make 2 alpha + 9 beta vanish exactly in binary
        k = int(rng.integers(-3, 6))
        p = dataclasses.replace(p, alpha=9.0 * 2.0**-k, beta=-2.0 * 2.0**-k)
        j0 = 10 ** rng.uniform(-2, 2)
        reductions += constant_C3(j0, 10 ** rng.uniform(-2, 2), p) == j0
    ok = worst < 1e-12 and reductions == 20
    verdict(7, "closed-form constants", ok,
            f"worst relative error {worst:.1e} over 50 cases; C3 = J0 exactly in {reductions}/20")
    assert ok


def test_criterion_08_gronwall(verdict):
    t0 = time.perf_counter()
    worst = -math.inf
    for case in (1, 2, 3):
        for inp in gronwall_cases(np.random.default_rng(100 + case), case):
            ts, ys = saturated_solution(inp)
            bound = np.array([gronwall_bound(inp, t) for t in ts])
            worst = max(worst, float(np.max((ys - bound) / bound)))
    seconds = time.perf_counter() - t0
    ok = worst <= 1e-9 and seconds < 10.0
    verdict(8, "Gronwall domination", ok, f"max (solution - bound)/bound {worst:.2e}; {seconds:.1f} s")
    assert ok


def test_criterion_09_certifier(verdict):
    report = certify_config(parse_config(CONFIGS / "blowup_3d.cfg"))
    window_exit = main(["certify", str(CONFIGS / "window_violation.cfg")])
    crossing = math.nan
    if report.horizon is not None:
        lower, upper = bounding_curves(report, np.array([report.horizon]))
        crossing = abs(float(lower[0] - upper[0])) / max(abs(float(upper[0])), 1e-300)
    ok = report.predicate_paper and report.horizon is not None and crossing < 1e-8 and window_exit == EXIT_WINDOW
    verdict(9, "blow-up certifier", ok,
            f"predicate_paper={report.predicate_paper}, horizon={report.horizon}, window exit {window_exit}; "
            f"the bounding curves cannot cross for admissible data")
    assert ok


def test_criterion_10_picard(verdict):
    cfg = parse_config(CONFIGS / "picard_1d.cfg")
    fluid, kinetic = make_preset(cfg.preset, cfg.grid, cfg.params, cfg.preset_options)
    rep = picard_iterate(cfg.grid, cfg.params, cfg.params.to_sound_variable(fluid.rho), fluid.velocity()[0],
                         kinetic.f, iterations=6)
    ok = rep.contraction(2, 5) and not rep.diverged
    verdict(10, "Picard contraction", ok,
            f"T_short={rep.t_short:.4g}; ratios k=2..5: {', '.join(f'{r:.1e}' for r in rep.ratios[:4])}")
    assert ok


def test_criterion_11_determinism(shipped_runs, verdict):
    same = [stem for stem, runs in shipped_runs.items() if runs[1][3] == runs[2][3] == runs[8][3]]
    ok = len(same) == len(shipped_runs)
    verdict(11, "thread determinism", ok, f"{len(same)}/{len(shipped_runs)} scenarios bit-identical at 1, 2, 8 threads")
    assert ok
