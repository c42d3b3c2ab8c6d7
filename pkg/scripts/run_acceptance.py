"""
Run the desk-scale acceptance scenarios and print a pass/fail table
Usage: python scripts/run_acceptance.py
"""
import math
import sys
import time

import numpy as np

from hkflow.entropy import production
from hkflow.flow import FlowConfig, dissipation_residual, simulate
from hkflow.harness import (
    InequalityCase,
    algterm_scan,
    counterexample_sequence,
    decay_fit,
    eep_sweep,
    entropy_bounds_check,
    inequality_report,
    lp_decay_check,
    rate_fit_loglog,
)
from hkflow.mesh import DensityBuilder, Field, build_density, build_grid, coarea_sides
from hkflow.profiles import make_g, make_psi

NAMED_CASES = [
    ("beckner_hellinger", make_g("log"), make_psi("beckner", 3.0), True),
    ("porous_variant", make_g("power", 2.0), make_psi("beckner", 3.0), True),
    ("porous_log_variant", make_g("power", 0.5), make_psi("beckner", 1.0), True),
    ("arctan_logsob", make_g("arctangential"), make_psi("beckner", 1.0), False),
]
COSINE = DensityBuilder("cosine", {"a": 0.5}, normalize=True)
CONSTANT = DensityBuilder("constant")


def perturbed_run(n, g, monitors, t_end, snapshot_every=100):
    """Cosine-perturbed flow towards the normalised 1 + 0.5 cos(2 pi x) steady state"""
    grid = build_grid("interval_noflux", n)
    steady = build_density(grid, COSINE)
    x = grid.axis_centers()
    initial = Field(grid, 1.5 * steady.values * (1.0 + 0.3 * np.cos(2 * np.pi * x)))
    return simulate(FlowConfig(mode="full", g=g, psi_monitors=monitors, grid=grid, steady=steady,
                               initial=initial, t_end=t_end, snapshot_every=snapshot_every))


def check_steady_state():
    worst = 0.0
    for g in (make_g("log"), make_g("power", 2.0), make_g("arctangential")):
        grid = build_grid("interval_noflux", 128)
        steady = build_density(grid, COSINE)
        traj = simulate(FlowConfig(mode="full", g=g, psi_monitors=[make_psi("beckner", 1.0)], grid=grid,
                                   steady=steady, initial=steady, t_end=1.0, snapshot_every=10_000))
        worst = max(worst, float(np.max(np.abs(traj.final.values - steady.values))))
    return worst <= 1e-12, f"max drift {worst:.3g}"


def check_dissipation_residual():
    monitors = [make_psi("beckner", 1.0), make_psi("beckner", 2.0), make_psi("driving", base=make_g("log"))]
    ratios = []
    for i in range(len(monitors)):
        worst = []
        for n in (64, 128):
            traj = perturbed_run(n, make_g("log"), monitors, t_end=0.002, snapshot_every=1)
            worst.append(float(np.max(dissipation_residual(traj, i))))
        ratios.append(worst[0] / worst[1])
    return min(ratios) >= 1.8, "refinement factors " + ", ".join(f"{r:.2f}" for r in ratios)


def check_decay():
    traj = perturbed_run(32, make_g("log"), [make_psi("abs_power", 2.0)], t_end=8.0)
    e = traj.entropies(0)
    fit = decay_fit(traj.times, e, entropy_floor=1e-8 * e[0])
    lp = lp_decay_check(traj, 2.0, fit.gamma_hat / 2.0)
    bounds = entropy_bounds_check(traj)
    ok = fit.gamma_hat > 0 and fit.fit_quality >= 0.99 and fit.bound_holds and lp["holds"]
    ok = ok and bounds["lower_mass_holds"] and bounds["init_entropy_holds"]
    return ok, f"gamma {fit.gamma_hat:.4g}, R^2 {fit.fit_quality:.5f}, L2 worst ratio {lp['worst_ratio']:.3g}"


def check_hellinger_gap():
    table = counterexample_sequence("hellinger_gap", [8, 16, 32, 64, 128], make_g("log"),
                                    make_psi("beckner", 1.0), CONSTANT)
    entropy_slope = rate_fit_loglog(table, "param", "entropy")
    production_slope = rate_fit_loglog(table, "param", "production_h")
    ok = abs(entropy_slope + 1.0) <= 0.1 and production_slope <= -1.9
    return ok, f"slopes {entropy_slope:.3f} / {production_slope:.3f}"


def check_wasserstein_counterexample():
    g, psi = make_g("log"), make_psi("beckner", 1.0)
    grid = build_grid("interval_noflux", 128)
    steady = build_density(grid, COSINE)
    ok = True
    for k in (0.5, 2.0):
        report = production(grid, steady.scaled(k), steady, g, psi)
        closed = k * float(g.g(k)) * float(psi.psiprime(k))
        ok &= report.production_w == 0.0 and report.entropy > 0
        ok &= abs(report.production_h - closed) <= 1e-6
    return ok, "k = 0.5, 2"


def check_poincare():
    grid = build_grid("torus1d", 512)
    steady = build_density(grid, CONSTANT)
    rho = Field(grid, 1.0 + 0.1 * np.cos(2 * np.pi * grid.axis_centers()))
    case = InequalityCase("beckner_classical", make_g("log"), make_psi("beckner", 2.0))
    ratio = inequality_report(case, grid, rho, steady).ratio
    expected = 1.0 / (4 * math.pi ** 2)
    return abs(ratio / expected - 1.0) <= 0.01, f"ratio {ratio:.6g} vs {expected:.6g}"


def check_coarea():
    grid = build_grid("torus1d", 512)
    x = grid.axis_centers()
    ok = True
    gaps = []
    for values, band in ((0.5 + 0.5 * np.sin(2 * np.pi * x), (0.3, 0.7)),
                         (1.0 + 0.5 * np.sin(2 * np.pi * x) + 0.2 * np.cos(4 * np.pi * x), (0.8, 1.3))):
        sides = coarea_sides(grid, Field(grid, values), *band, t_samples=256)
        gap = abs(sides["variation_band"] - sides["perimeter_integral"]) / sides["variation_band"]
        gaps.append(gap)
        ok &= gap <= 0.02
    return ok, "relative gaps " + ", ".join(f"{gap:.2e}" for gap in gaps)


def check_sweep():
    grid = build_grid("torus1d", 128)
    steady = build_density(grid, CONSTANT)
    family = [DensityBuilder("trig_random", {"seed": s}, normalize=True) for s in range(20)]
    worst = 0.0
    for g in (make_g("log"), make_g("power", 2.0), make_g("arctangential")):
        for psi in (make_psi("beckner", 1.0), make_psi("beckner", 3.0)):
            result = eep_sweep(family, g, psi, grid, steady, mass_floor=0.5, entropy_cap=5.0, jobs=2)
            if not all(math.isfinite(r) for r in result.ratios):
                return False, f"infinite ratio for g={g.kind}, psi p={psi.p}"
            worst = max(worst, result.empirical_C_U)
    return math.isfinite(worst), f"largest empirical constant {worst:.4g}"


def check_named_inequalities():
    grid = build_grid("torus1d", 128)
    steady = build_density(grid, CONSTANT)
    family = [build_density(grid, DensityBuilder("trig_random", {"seed": s}, normalize=True), steady)
              for s in range(20)]
    worst_drift = 0.0
    for name, g, psi, homogeneous in NAMED_CASES:
        case = InequalityCase(name, g, psi)
        for rho in family:
            base = inequality_report(case, grid, rho, steady).ratio
            if not math.isfinite(base):
                return False, f"{name} is infinite"
            for lam in (0.1, 10.0):
                scaled = inequality_report(case, grid, rho.scaled(lam), steady).ratio
                if not math.isfinite(scaled):
                    return False, f"{name} is infinite at scale {lam}"
                if homogeneous:
                    worst_drift = max(worst_drift, abs(scaled / base - 1.0))
    return worst_drift <= 1e-10, f"largest scale drift {worst_drift:.2e}"


def check_mass_lower_bound():
    worst = math.inf
    for g in (make_g("log"), make_g("power", 2.0), make_g("arctangential")):
        traj = perturbed_run(256, g, [make_psi("beckner", 1.0)], t_end=0.05, snapshot_every=500)
        bounds = entropy_bounds_check(traj)
        if not bounds["lower_mass_holds"]:
            return False, f"g={g.kind}: min mass {bounds['min_mass']:.6g} below {bounds['lower_mass_bound']:.6g}"
        worst = min(worst, bounds["min_mass"] - bounds["lower_mass_bound"])
    return True, f"smallest margin {worst:.3g}"


def check_algterm():
    g, psi = make_g("log"), make_psi("beckner", 1.0)
    scans = [algterm_scan(g, psi, eps, 10.0) for eps in (0.1, 0.3, 0.5)]
    monotone = all(a["c_eps"] >= b["c_eps"] for a, b in zip(scans, scans[1:]))
    limit = scans[0]["limit_at_one"]
    return monotone and abs(limit - 0.5) <= 1e-3, f"limit at one {limit:.6f}"


SCENARIOS = [
    ("Steady-state fixed point", check_steady_state),
    ("Dissipation consistency", check_dissipation_residual),
    ("Exponential and L2 decay", check_decay),
    ("Mass lower bound", check_mass_lower_bound),
    ("Hellinger counterexample rates", check_hellinger_gap),
    ("Wasserstein counterexample", check_wasserstein_counterexample),
    ("Poincare constant", check_poincare),
    ("Coarea identity", check_coarea),
    ("EEP sweep finiteness", check_sweep),
    ("Named-inequality certificates", check_named_inequalities),
    ("Algebraic term scan", check_algterm),
]


def main():
    """Run every scenario and print one line per result"""
    print("=" * 80)
    print("hkflow acceptance scenarios")
    print("=" * 80)

    failures = 0
    for name, check in SCENARIOS:
        started = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - started
        failures += not ok
        mark = "✅" if ok else "❌"
        print(f"{mark} {name:<34} {elapsed:7.2f}s  {detail}")

    print("=" * 80)
    print(f"{len(SCENARIOS) - failures}/{len(SCENARIOS)} scenarios passed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
