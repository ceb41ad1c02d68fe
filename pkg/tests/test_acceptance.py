"""Acceptance criteria, each run at its stated tolerance.

Every test appends one PASS/FAIL line to ``conftest.ACCEPTANCE_LINES``;
the lines are printed in a summary section at the end of the run.
Monte Carlo criteria use 1000 replications (200 seeds for the
segmentation and forecasting studies) and a fixed base seed.
"""

import math

import numpy as np
from conftest import ACCEPTANCE_LINES
from scipy import integrate, stats

from driftwatch import (
    ContaminationSpec,
    DriftModel,
    MdpdeConfig,
    OuCentered,
    OuMeanReverting,
    ParamEstimate,
    SamplePath,
    SimConfig,
    Trim,
    TrimSpec,
    bb_sup_tail,
    binary_segmentation,
    critical_value,
    cusum_statistic,
    fit,
    mdpde_objective,
    residuals,
    rolling_evaluate,
    simulate_path,
    simulate_path_with_change,
    simulate_path_with_changes,
    trim_value,
)
from driftwatch.changepoint import cusum_scan
from driftwatch.experiments import GRID_ALPHAS, GRID_TRIMS, Alternative, McSpec, run_mc
from driftwatch.simulate import derive_seed

SEED = 2026
REPS = 1000
TENT = TrimSpec(Trim.TENT, 6.63)
HARD = TrimSpec(Trim.HARD, 6.63)


def report(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}")
    assert ok, detail


def band(x, centre, half):
    return abs(x - centre) <= half


def test_criterion_01_critical_value():
    cv = critical_value(0.05)
    tail = bb_sup_tail(1.358)
    ok = band(cv, 1.358, 0.001) and band(tail, 0.050, 0.001)
    report(1, "critical value", ok, f"c(0.05)={cv:.6f} (1.358+-0.001), P(>1.358)={tail:.5f} (0.050+-0.001)")


def test_criterion_02_clean_size():
    spec = McSpec(n_list=(500,), reps=REPS, alphas=(0.2,), trims=(TENT,), base_seed=SEED)
    t = run_mc(spec)
    tn = t.get(500, "Tn", 0.0).freq
    t2 = t.get(500, "T2", 0.2, "tent", 6.63).freq
    ok = band(tn, 0.045, 0.021) and band(t2, 0.049, 0.021)
    report(2, "clean-data size, n=500", ok,
           f"Tn={tn:.3f} (0.045+-0.021), T2[a=0.2,M=6.63]={t2:.3f} (0.049+-0.021)")


def test_criterion_03_clean_power():
    spec = McSpec(n_list=(500,), reps=REPS, alphas=(0.2,), trims=(HARD,), include_naive=False,
                  alt_params=Alternative((1.0,), 1.5), base_seed=SEED)
    t1 = run_mc(spec).get(500, "T1", 0.2, "hard", 6.63).freq
    report(3, "clean-data power (1,1.5), n=500", t1 >= 0.99, f"T1[a=0.2,M=6.63]={t1:.3f} (>=0.99)")


def test_criterion_04_drift_change_insensitivity():
    spec = McSpec(n_list=(1000,), reps=REPS, alphas=GRID_ALPHAS, trims=GRID_TRIMS,
                  alt_params=Alternative((5.0,), 1.0), base_seed=SEED)
    table = run_mc(spec)
    freqs = {f"{k[2]}[a={k[3]:g},M={k[5]}]": c.freq for k, c in table.rows()}
    worst = max(freqs, key=lambda k: abs(freqs[k] - 0.045))
    ok = all(band(f, 0.045, 0.03) for f in freqs.values())
    report(4, "drift change (5,1), n=1000", ok,
           f"{len(freqs)} tests in [{min(freqs.values()):.3f}, {max(freqs.values()):.3f}], "
           f"furthest {worst}={freqs[worst]:.3f} (0.045+-0.03)")


def test_criterion_05_robustness_split():
    spec = McSpec(n_list=(1000,), reps=REPS, alphas=(0.2, 0.5), trims=(TENT,), base_seed=SEED,
                  contamination=ContaminationSpec(0.05, 1.0))
    t = run_mc(spec)
    tn = t.get(1000, "Tn", 0.0).freq
    tents = [t.get(1000, "T2", a, "tent", 6.63).freq for a in (0.2, 0.5)]
    ok = tn >= 0.15 and all(f <= 0.10 for f in tents)
    report(5, "contaminated size p=5%, n=1000", ok,
           f"Tn={tn:.3f} (>=0.15), T2[a=0.2]={tents[0]:.3f}, T2[a=0.5]={tents[1]:.3f} (<=0.10)")


def test_criterion_06_contaminated_power():
    spec = McSpec(n_list=(1000,), reps=REPS, alphas=(0.2,), trims=(TENT,), base_seed=SEED,
                  alt_params=Alternative((1.0,), 1.5), contamination=ContaminationSpec(0.05, 1.0))
    t = run_mc(spec)
    tn = t.get(1000, "Tn", 0.0).freq
    t2 = t.get(1000, "T2", 0.2, "tent", 6.63).freq
    ok = t2 >= 0.99 and tn <= 0.35
    report(6, "contaminated power (1,1.5), p=5%, n=1000", ok, f"T2[a=0.2,M=6.63]={t2:.3f} (>=0.99), Tn={tn:.3f} (<=0.35)")


def _brute_force_cusum(f):
    n = len(f)
    total = sum(f)
    devs = [abs(sum(f[:k]) - k / n * total) for k in range(1, n)]
    best = max(devs)
    k_hat = next(k for k, d in enumerate(devs, 1) if d >= best * (1 - 1e-12))
    mean = total / n
    tau = math.sqrt(sum(v * v for v in f) / n - mean * mean)
    return best / (math.sqrt(n) * tau), k_hat


def test_criterion_07_property_suite(exact_euler_path):
    checks = {}

    # trimming: 1-Lipschitz and hard >= tent, equal below M
    grid = np.linspace(0, 30, 3001)
    lip, order = True, True
    for m in (3.84, 6.63):
        hard = np.array([trim_value(TrimSpec(Trim.HARD, m), x) for x in grid])
        tent = np.array([trim_value(TrimSpec(Trim.TENT, m), x) for x in grid])
        step = grid[1] - grid[0]
        lip &= bool(np.all(np.abs(np.diff(hard)) <= step + 1e-12) and np.all(np.abs(np.diff(tent)) <= step + 1e-12))
        order &= bool(np.all(hard >= tent) and np.array_equal(hard[grid <= m], tent[grid <= m]))
    checks["trim Lipschitz"] = lip
    checks["trim order"] = order

    # exact-Euler residual recovery
    est = ParamEstimate(np.array([1.0]), 1.0, 0.0, 0.0)
    z = residuals(OuCentered(), exact_euler_path, est).values
    checks["residual recovery 1e-12"] = bool(np.max(np.abs(z - exact_euler_path.shocks)) <= 1e-12)

    # CUSUM constant-shift invariance
    f = np.square(np.random.default_rng(7).standard_normal(500))
    a, b = cusum_scan(f), cusum_scan(f + 3.7)
    checks["CUSUM shift invariance"] = abs(a[0] - b[0]) <= 1e-9 * a[0] and a[1] == b[1]

    # alpha = 0 objective against a direct quasi-likelihood loop
    p = exact_euler_path
    v, h = p.values, p.step
    worst = 0.0
    for theta, sigma in [(1.0, 1.0), (0.4, 1.6), (3.0, 0.7)]:
        loop = 0.0
        for i in range(1, len(v)):
            e = v[i] - v[i - 1] + theta * v[i - 1] * h
            loop += e * e / (sigma * sigma * h) + math.log(sigma * sigma)
        loop /= len(v) - 1
        worst = max(worst, abs(mdpde_objective(OuCentered(), [theta], sigma, p, 0.0) - loop))
    checks["quasi-likelihood 1e-12"] = worst <= 1e-12

    # sigma profile closed form with the drift parameter held at its true value
    pinned = DriftModel("pinned", 1, OuCentered().drift, ((1.0, 1.0),))
    sig = fit(pinned, p, MdpdeConfig(alpha=0.0)).sigma_hat
    e = np.diff(v) + v[:-1] * h
    closed = math.sqrt(float(np.mean(e * e)) / h)
    checks["sigma profile 1e-6"] = abs(sig - closed) <= 1e-6

    # hand-computed CUSUM example, brute force first
    sq = [1.0, 1.0, 1.0, 9.0]
    bf_stat, bf_k = _brute_force_cusum(sq)
    out = cusum_statistic(np.sqrt(sq), TrimSpec(Trim.NONE))
    checks["hand example 1e-9"] = (abs(bf_stat - 0.8660) <= 5e-5 and bf_k == 3
                                   and abs(out.statistic - bf_stat) <= 1e-9 and out.k_hat == 3)

    failed = [k for k, ok in checks.items() if not ok]
    report(7, "property suite", not failed,
           f"{len(checks) - len(failed)}/{len(checks)} checks" + (f", failed: {failed}" if failed else ""))


def _tent_moments(m):
    spec = TrimSpec(Trim.TENT, m)
    pdf = stats.chi2(df=1).pdf

    def expect(g):
        return sum(integrate.quad(lambda x: g(x) * pdf(x), lo, hi, limit=200)[0]
                   for lo, hi in [(0, m), (m, 2 * m), (2 * m, np.inf)])

    mean = expect(lambda x: trim_value(spec, x))
    var = expect(lambda x: (trim_value(spec, x) - mean) ** 2)
    mu4 = expect(lambda x: (trim_value(spec, x) - mean) ** 4)
    return var, mu4


def test_criterion_08_tau_consistency():
    n = 100_000
    parts, ok = [], True
    for i, m in enumerate((3.84, 6.63)):
        var, mu4 = _tent_moments(m)
        z = np.random.default_rng(SEED + i).standard_normal(n)
        tau2 = cusum_statistic(z, TrimSpec(Trim.TENT, m)).tau_hat ** 2
        se = math.sqrt((mu4 - var * var) / n)
        ok &= abs(tau2 - var) <= 3 * se
        parts.append(f"M={m}: tau2={tau2:.5f} vs {var:.5f} ({abs(tau2 - var) / se:.2f} SE)")
    report(8, "tau^2 consistency, n=1e5", ok, "; ".join(parts))


def test_criterion_09_segmentation():
    n, seeds, tol = 3000, 200, 0.05 * 3000
    truth = (1000, 2000)
    regimes = [([1.0], 1.0), ([1.0], 1.5), ([1.0], 1.0)]
    both = spurious = 0
    for r in range(seeds):
        path = simulate_path_with_changes(OuCentered(), regimes, [1 / 3, 2 / 3],
                                          SimConfig(n=n, seed=derive_seed(SEED, r)))
        cps = binary_segmentation(OuCentered(), path, 0.2, TENT, 0.05).change_points
        matched = [any(abs(c - t) <= tol for c in cps) for t in truth]
        near = sum(1 for c in cps if any(abs(c - t) <= tol for t in truth))
        both += all(matched)
        spurious += len(cps) > sum(matched) or near < len(cps)
    ok = both / seeds >= 0.70 and spurious / seeds <= 0.10
    report(9, "binary segmentation, two changes, n=3000", ok,
           f"both found {both / seeds:.3f} (>=0.70), spurious extra {spurious / seeds:.3f} (<=0.10)")


# daily-data design: (lambda, mu, sigma) before and after a change at day 290 of 737
REGIME_A = ([43.43, 17.88], 23.28)
REGIME_B = ([30.34, 12.78], 13.20)
N_DAYS, CHANGE_DAY, EVAL_START = 737, 290, 659


def _forecast_path(seed):
    cfg = SimConfig(n=N_DAYS, h=1 / 252, gamma=None, x0=REGIME_A[0][1], seed=seed)
    return simulate_path_with_change(OuMeanReverting(), *REGIME_A, *REGIME_B, CHANGE_DAY / N_DAYS, cfg)


def test_criterion_10_forecast_pipeline():
    model = OuMeanReverting()

    # noise-free continuation generated from the fitted parameters
    prefix = _forecast_path(SEED).segment(0, 400)
    est = fit(model, prefix, MdpdeConfig(alpha=0.1))
    tail = simulate_path(model, est.theta_hat, 0.0,
                         SimConfig(n=100, h=prefix.step, gamma=None, substeps=1,
                                   x0=prefix.values[-1], seed=0))
    joined = SamplePath(prefix.step, np.concatenate([prefix.values, tail.values[1:]]))
    exact, _ = rolling_evaluate(model, joined, 400, estimate=est)
    zero_ok = exact.rmse == 0.0

    seeds, wins, detected = 200, 0, 0
    for r in range(seeds):
        path = _forecast_path(derive_seed(SEED, r))
        cps = binary_segmentation(model, path.segment(0, EVAL_START), 0.1, TENT, 0.05).change_points
        start = cps[-1] + 1 if cps else 0
        detected += bool(cps)
        with_cp, _ = rolling_evaluate(model, path, EVAL_START, 0.1, 10, from_index=start)
        from_zero, _ = rolling_evaluate(model, path, EVAL_START, 0.1, 10, from_index=0)
        wins += with_cp.rmse < from_zero.rmse
    ok = zero_ok and wins / seeds >= 0.60
    report(10, "forecast pipeline", ok,
           f"noise-free RMSE={exact.rmse!r} (==0), last-change start wins {wins / seeds:.3f} (>=0.60), "
           f"change found in {detected / seeds:.3f} of seeds")
