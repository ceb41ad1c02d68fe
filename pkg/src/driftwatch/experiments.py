"""Monte Carlo size/power studies for the CUSUM tests.

Every replication draws one path (plus contamination) from seeds derived
from ``(base_seed, replication, n)`` and runs all configured tests on
that same path. Results are rejection counts, so the table does not
depend on how replications are split across workers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace

from joblib import Parallel, delayed

from .changepoint import Trim, TrimSpec, run_test
from .estimate import MdpdeConfig, fit
from .exceptions import DomainError, DriftwatchError
from .model import get_model
from .simulate import (
    ContaminationSpec,
    SimConfig,
    contaminate,
    derive_seed,
    simulate_path,
    simulate_path_with_change,
)

__all__ = [
    "Regime",
    "Alternative",
    "McSpec",
    "McCell",
    "McTable",
    "run_mc",
    "emit_table",
    "parse_table",
    "emit_curves",
    "preset",
    "PRESETS",
    "spec_from_dict",
    "spec_to_dict",
    "FAILURE_FLAG_RATE",
]

log = logging.getLogger(__name__)

FAILURE_FLAG_RATE = 0.01
GRID_ALPHAS = (0.1, 0.2, 0.3, 0.5, 1.0)
GRID_TRIMS = (
    TrimSpec(Trim.HARD, 6.63),
    TrimSpec(Trim.TENT, 6.63),
    TrimSpec(Trim.HARD, 3.84),
    TrimSpec(Trim.TENT, 3.84),
)


@dataclass(frozen=True)
class Regime:
    theta: tuple[float, ...] = (1.0,)
    sigma: float = 1.0


@dataclass(frozen=True)
class Alternative:
    theta: tuple[float, ...] = (1.0,)
    sigma: float = 1.5
    change_frac: float = 0.5


@dataclass(frozen=True)
class McSpec:
    """One Monte Carlo design; ``alt_params=None`` means a size study."""

    n_list: tuple[int, ...] = (500,)
    reps: int = 1000
    gamma: float = 0.75
    null_params: Regime = Regime()
    alt_params: Alternative | None = None
    contamination: ContaminationSpec | None = None
    alphas: tuple[float, ...] = (0.2,)
    trims: tuple[TrimSpec, ...] = (TrimSpec(Trim.TENT, 6.63),)
    level: float = 0.05
    base_seed: int = 0
    include_naive: bool = True
    substeps: int = 20
    model: str = "ou-centered"
    x0: float = 0.0
    scenario: str = ""

    def __post_init__(self):
        if self.reps < 1:
            raise DomainError("reps must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise DomainError("level must lie in (0, 1)")


def cell_id(alpha: float, trim: TrimSpec) -> str:
    if trim.variant is Trim.NONE:
        return "Tn" if alpha == 0 else "T0"
    return "T1" if trim.variant is Trim.HARD else "T2"


@dataclass
class McCell:
    rejections: int = 0
    trials: int = 0
    failures: int = 0

    @property
    def freq(self) -> float:
        return self.rejections / self.trials if self.trials else math.nan

    @property
    def stderr(self) -> float:
        p = self.freq
        return math.sqrt(p * (1.0 - p) / self.trials) if self.trials else math.nan

    def flagged(self, reps: int) -> bool:
        return self.failures > FAILURE_FLAG_RATE * reps


# key: (scenario, n, test_id, alpha, trim variant, M)
Key = tuple


@dataclass
class McTable:
    cells: dict = field(default_factory=dict)
    reps: int = 0

    def get(self, n, test, alpha, trim="tent", m=6.63, scenario="") -> McCell:
        if test == "Tn":
            trim, m, alpha = "none", None, 0.0
        return self.cells[(scenario, int(n), test, float(alpha), trim, m)]

    def rows(self):
        def sort_key(item):
            s, n, t, a, tr, m = item[0]
            return (s, n, t, a, tr, -1.0 if m is None else m)

        return sorted(self.cells.items(), key=sort_key)


def _tests(spec: McSpec):
    tests = []
    if spec.include_naive:
        tests.append((0.0, TrimSpec(Trim.NONE)))
    for a in spec.alphas:
        for tr in spec.trims:
            tests.append((float(a), tr))
    return tests


def _key(spec, n, alpha, trim):
    m = None if trim.variant is Trim.NONE else float(trim.m)
    return (spec.scenario, int(n), cell_id(alpha, trim), float(alpha), trim.variant.value, m)


def _replicate(spec: McSpec, n: int, r: int, tests):
    """Run every test on replication ``r``; returns {key: True/False/None(failure)}."""
    model = get_model(spec.model)
    cfg = SimConfig(n=n, gamma=spec.gamma, substeps=spec.substeps, x0=spec.x0,
                    seed=derive_seed(spec.base_seed, r, n, 0))
    null = spec.null_params
    if spec.alt_params is None:
        path = simulate_path(model, null.theta, null.sigma, cfg)
    else:
        alt = spec.alt_params
        path = simulate_path_with_change(model, null.theta, null.sigma, alt.theta, alt.sigma,
                                         alt.change_frac, cfg)
    if spec.contamination is not None:
        path = contaminate(path, spec.contamination, derive_seed(spec.base_seed, r, n, 1))
    out = {}
    fits = {}
    for alpha, trim in tests:
        key = _key(spec, n, alpha, trim)
        try:
            if alpha not in fits:
                fits[alpha] = fit(model, path, MdpdeConfig(alpha=alpha))
            res = run_test(model, path, alpha, trim, estimate=fits[alpha])
            out[key] = res.p_value < spec.level
        except DriftwatchError as exc:
            log.debug("replication %d n=%d %s failed: %s", r, n, key, exc)
            fits.setdefault(alpha, None)
            out[key] = None
    return out


def _chunk(spec, n, rs, tests):
    return [_replicate(spec, n, r, tests) for r in rs]


def _n_jobs(n_jobs):
    if n_jobs is not None:
        return n_jobs
    env = os.environ.get("DRIFTWATCH_THREADS")
    return int(env) if env else 1


def run_mc(spec: McSpec, n_jobs: int | None = None) -> McTable:
    """Rejection frequencies for every (n, test) cell of ``spec``.

    ``n_jobs`` defaults to ``$DRIFTWATCH_THREADS`` or 1; the output is
    identical for any worker count.
    """
    tests = _tests(spec)
    table = McTable(reps=spec.reps)
    jobs = _n_jobs(n_jobs)
    for n in spec.n_list:
        for alpha, trim in tests:
            table.cells[_key(spec, n, alpha, trim)] = McCell()
        if jobs == 1:
            results = _chunk(spec, n, range(spec.reps), tests)
        else:
            size = max(1, spec.reps // (4 * jobs))
            chunks = [range(i, min(i + size, spec.reps)) for i in range(0, spec.reps, size)]
            parts = Parallel(n_jobs=jobs)(delayed(_chunk)(spec, n, c, tests) for c in chunks)
            results = [res for part in parts for res in part]
        for res in results:
            for key, rejected in res.items():
                cell = table.cells[key]
                if rejected is None:
                    cell.failures += 1
                else:
                    cell.trials += 1
                    cell.rejections += int(rejected)
        for key, cell in table.cells.items():
            if key[1] == n and cell.flagged(spec.reps):
                log.warning("cell %s: %d of %d replications failed", key, cell.failures, spec.reps)
    return table


_COLUMNS = ["scenario", "n", "test_id", "alpha", "trim", "M", "rejections", "trials",
            "failures", "rejection_freq", "mc_stderr", "flagged"]


def emit_table(table: McTable, fmt: str = "csv") -> str:
    """Render as CSV (``fmt="csv"``) or an aligned text table (``fmt="text"``)."""
    rows = []
    for (s, n, t, a, tr, m), cell in table.rows():
        rows.append([s, n, t, repr(a), tr, "" if m is None else repr(m), cell.rejections,
                     cell.trials, cell.failures, f"{cell.freq:.4f}", f"{cell.stderr:.4f}",
                     int(cell.flagged(table.reps))])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_COLUMNS)
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "text":
        cols = ["scenario", "n", "test", "alpha", "trim", "M", "freq", "stderr", "fail"]
        body = [[str(r[0]), str(r[1]), r[2], r[3], r[4], r[5], r[9], r[10], str(r[8])] for r in rows]
        widths = [max([len(c)] + [len(b[i]) for b in body]) for i, c in enumerate(cols)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def parse_table(text: str) -> McTable:
    """Inverse of ``emit_table(..., "csv")``."""
    table = McTable()
    reader = csv.DictReader(io.StringIO(text))
    for row in reader:
        m = None if row["M"] == "" else float(row["M"])
        key = (row["scenario"], int(row["n"]), row["test_id"], float(row["alpha"]), row["trim"], m)
        table.cells[key] = McCell(int(row["rejections"]), int(row["trials"]), int(row["failures"]))
        table.reps = max(table.reps, int(row["trials"]) + int(row["failures"]))
    return table


def emit_curves(spec: McSpec, grid: str, values, n_jobs: int | None = None) -> str:
    """Long-format CSV of rejection frequency against a grid.

    ``grid="prob"`` varies the contamination probability (keeping the McSpec's
    outlier variance, default 1); ``grid="sigma1"`` varies the post-change
    dispersion (the McSpec needs ``alt_params``).
    """
    if grid not in ("prob", "sigma1"):
        raise ValueError("grid must be 'prob' or 'sigma1'")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "scenario", "n", "test_id", "alpha", "trim", "M", "value", "mc_stderr"])
    for x in values:
        if grid == "prob":
            var_v = spec.contamination.var_v if spec.contamination else 1.0
            s = replace(spec, contamination=ContaminationSpec(float(x), var_v))
        else:
            if spec.alt_params is None:
                raise DomainError("sigma1 curves need alt_params")
            s = replace(spec, alt_params=replace(spec.alt_params, sigma=float(x)))
        table = run_mc(s, n_jobs)
        for (sc, n, t, a, tr, m), cell in table.rows():
            w.writerow([repr(float(x)), sc, n, t, repr(a), tr, "" if m is None else repr(m),
                        f"{cell.freq:.4f}", f"{cell.stderr:.4f}"])
    return buf.getvalue()


def spec_to_dict(spec: McSpec) -> dict:
    d = asdict(spec)
    d["trims"] = [{"variant": t.variant.value, "m": t.m} for t in spec.trims]
    return d


def spec_from_dict(d: dict) -> McSpec:
    """Build a McSpec from its JSON form (field names as in the dataclass)."""
    d = dict(d)
    unknown = set(d) - set(McSpec.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown McSpec fields: {sorted(unknown)}")
    if "null_params" in d:
        np_ = d["null_params"]
        d["null_params"] = Regime(tuple(np_.get("theta", (1.0,))), float(np_.get("sigma", 1.0)))
    if d.get("alt_params") is not None:
        ap = d["alt_params"]
        d["alt_params"] = Alternative(tuple(ap.get("theta", (1.0,))), float(ap["sigma"]),
                                      float(ap.get("change_frac", 0.5)))
    if d.get("contamination") is not None:
        d["contamination"] = ContaminationSpec(**d["contamination"])
    if "trims" in d:
        d["trims"] = tuple(TrimSpec(Trim(t["variant"]), float(t.get("m", 6.63))) for t in d["trims"])
    for k in ("n_list", "alphas"):
        if k in d:
            d[k] = tuple(d[k])
    return McSpec(**d)


_POWER_ALTS = {
    "(1,1.2)": Alternative((1.0,), 1.2),
    "(1,1.5)": Alternative((1.0,), 1.5),
    "(5,1)": Alternative((5.0,), 1.0),
    "(5,1.2)": Alternative((5.0,), 1.2),
}
_P_GRID = tuple(round(0.005 * i, 4) for i in range(11))
_SIGMA1_GRID = (1.0, 1.1, 1.2, 1.3, 1.4, 1.5)


def _base(reps, seed, **kw):
    return McSpec(n_list=(200, 500, 1000, 3000), reps=reps, alphas=GRID_ALPHAS, trims=GRID_TRIMS,
                  base_seed=seed, **kw)


def preset(name: str, reps: int = 1000, seed: int = 0):
    """Preset simulation designs for the size and power studies.

    Returns ``(specs, curve)`` where ``specs`` is a list of McSpec and
    ``curve`` is ``None`` or ``(grid_name, grid_values)`` for figure presets.
    """
    low = ContaminationSpec(0.005, 1.0)
    high = ContaminationSpec(0.05, 1.0)
    if name == "table1":
        return [_base(reps, seed, scenario="size")], None
    if name == "table3":
        return [_base(reps, seed, contamination=low, scenario="size")], None
    if name == "table5":
        return [_base(reps, seed, contamination=high, scenario="size")], None
    if name in ("table2", "table4", "table6"):
        cont = {"table2": None, "table4": low, "table6": high}[name]
        return [
            replace(_base(reps, seed, contamination=cont, scenario=lab), n_list=(200, 500, 1000),
                    alt_params=alt)
            for lab, alt in _POWER_ALTS.items()
        ], None
    if name == "fig1":
        return [
            McSpec(n_list=(200, 500, 1000, 3000), reps=reps, alphas=(0.2,), trims=GRID_TRIMS,
                   base_seed=seed, contamination=ContaminationSpec(0.0, v), scenario=f"var_v={v:g}")
            for v in (1.0, 2.0)
        ], ("prob", _P_GRID)
    if name == "fig2":
        return [
            McSpec(n_list=(200, 500, 1000), reps=reps, alphas=(0.2,), trims=GRID_TRIMS,
                   base_seed=seed, contamination=c, alt_params=Alternative((1.0,), 1.5),
                   scenario=f"p={c.prob:g},var_v={c.var_v:g}")
            for c in (ContaminationSpec(0.005, 1.0), ContaminationSpec(0.05, 2.0))
        ], ("sigma1", _SIGMA1_GRID)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("table1", "table2", "table3", "table4", "table5", "table6", "fig1", "fig2")
