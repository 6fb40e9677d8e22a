"""Multi-seed, multi-method experiment runner.

Every (method, seed) pair is one independent closed-loop run on the same
corpus. Runs for the same seed share the warm-up draw, so comparisons are
paired. Results are written as CSV (curves, table, costs), an SVG chart and a
short markdown summary.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from multiprocessing import get_context

from threadpoolctl import threadpool_limits

from .errors import ConfigError
from .params import DuvParams
from .selectors import METHODS, make_selector
from .seloop import Iteration, LoopConfig, RunHistory, run
from .stimgen import DEFAULT_MIX, gen_corpus, load_corpus, parse_mix


BASELINE = "RD"


# ---------------------------------------------------------------------------
# Savings arithmetic


def savings(rd_tests: float, method_tests: float):
    """Tests saved against random selection: (absolute, percent of RD)."""
    if rd_tests <= 0:
        raise ValueError("RD test count must be positive")
    saved = rd_tests - method_tests
    return saved, 100.0 * saved / rd_tests


def net_savings(saved_tests: float, per_test_minutes: float, selector_hours: float) -> float:
    """Simulation hours saved minus the hours spent training and scoring."""
    return saved_tests * per_test_minutes / 60.0 - selector_hours


def sign_test(method, baseline):
    """One-sided paired sign test of ``method < baseline``.

    ``None`` means the goal was never reached and ranks worse than any
    count. Ties are dropped. Returns (wins, losses, p).
    """
    wins = losses = 0
    for a, b in zip(method, baseline):
        a = math.inf if a is None else a
        b = math.inf if b is None else b
        if a < b:
            wins += 1
        elif a > b:
            losses += 1
    n = wins + losses
    if n == 0:
        return 0, 0, 1.0
    p = sum(math.comb(n, k) for k in range(wins, n + 1)) / 2 ** n
    return wins, losses, p


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    n_tests: int = 2000
    mix: dict = field(default_factory=lambda: dict(DEFAULT_MIX))
    len_range: tuple = (60, 100)
    path: str = None  # load this corpus file instead of generating

    def __post_init__(self):
        object.__setattr__(self, "mix", parse_mix(self.mix))
        object.__setattr__(self, "len_range", tuple(int(v) for v in self.len_range))
        if self.n_tests < 1:
            raise ConfigError("corpus n_tests must be >= 1")

    def build(self, params: DuvParams):
        if self.path:
            return load_corpus(self.path)
        return gen_corpus(self.seed, self.n_tests, self.mix, self.len_range, params)

    def to_dict(self):
        return {
            "seed": self.seed, "n_tests": self.n_tests,
            "mix": {k.value.lower(): v for k, v in self.mix.items()},
            "len_range": list(self.len_range), "path": self.path,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple = METHODS
    repeats: int = 10
    seeds: tuple = None  # default: seed, seed+1, ..., seed+repeats-1
    seed: int = 0
    corpus: CorpusSpec = CorpusSpec()
    duv: DuvParams = DuvParams()
    loop: LoopConfig = LoopConfig()
    per_test_sim_minutes: float = 12.0
    goals: tuple = (90.0, 95.0, 97.0)

    def __post_init__(self):
        methods = tuple(str(m).upper() for m in self.methods)
        unknown = [m for m in methods if m not in METHODS]
        if unknown or not methods:
            raise ConfigError(f"methods must be a nonempty subset of {', '.join(METHODS)}; got {list(self.methods)}")
        if len(set(methods)) != len(methods):
            raise ConfigError("methods listed twice")
        object.__setattr__(self, "methods", methods)
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.seeds is not None:
            seeds = tuple(int(s) for s in self.seeds)
            if len(seeds) != self.repeats or len(set(seeds)) != len(seeds):
                raise ConfigError("seeds must list `repeats` distinct values")
            object.__setattr__(self, "seeds", seeds)
        if self.per_test_sim_minutes < 0:
            raise ConfigError("per_test_sim_minutes must be >= 0")
        # the loop config validates the goals
        loop = replace(self.loop, goals=tuple(self.goals))
        object.__setattr__(self, "goals", loop.goals)
        object.__setattr__(self, "loop", loop)

    @property
    def run_seeds(self):
        return self.seeds if self.seeds is not None else tuple(self.seed + r for r in range(self.repeats))

    def to_dict(self):
        loop = self.loop.to_dict()
        for k in ("seed", "selector", "goals"):
            loop.pop(k)
        return {
            "methods": list(self.methods), "repeats": self.repeats,
            "seeds": None if self.seeds is None else list(self.seeds), "seed": self.seed,
            "corpus": self.corpus.to_dict(), "duv": self.duv.to_dict(), "loop": loop,
            "per_test_sim_minutes": self.per_test_sim_minutes, "goals": list(self.goals),
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a JSON object")
        d = dict(d)
        known = {"methods", "repeats", "seeds", "seed", "corpus", "duv", "loop", "per_test_sim_minutes", "goals"}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown experiment config keys: {', '.join(extra)}")
        try:
            if "corpus" in d:
                d["corpus"] = CorpusSpec(**d["corpus"])
            if "duv" in d:
                d["duv"] = DuvParams.from_dict(d["duv"])
            if "loop" in d:
                d["loop"] = LoopConfig.from_dict(d["loop"])
            for k in ("methods", "seeds", "goals"):
                if d.get(k) is not None:
                    d[k] = tuple(d[k])
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from None

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config not found: {path}")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


# ---------------------------------------------------------------------------
# Running


# per-process caches: corpus and simulation results are pure functions of config
_CORPUS_CACHE = {}


def _corpus_for(cfg: ExperimentConfig):
    key = json.dumps([cfg.corpus.to_dict(), cfg.duv.to_dict()], sort_keys=True)
    if key not in _CORPUS_CACHE:
        _CORPUS_CACHE.clear()
        _CORPUS_CACHE[key] = (cfg.corpus.build(cfg.duv), {})
    return _CORPUS_CACHE[key]


def _run_one(cfg_dict, method, seed, verbose=False):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    corpus, events = _corpus_for(cfg)
    loop = replace(cfg.loop, seed=seed, selector=method)

    def progress(it: Iteration):
        if verbose:
            print(f"{method} seed={seed} iter={it.index} tests={it.tests_simulated} "
                  f"coverage={it.coverage_percent:.2f}%", flush=True)

    # single-threaded BLAS keeps float reductions identical across job counts
    with threadpool_limits(limits=1):
        hist = run(corpus, make_selector(method, cfg.loop.hyper), cfg.duv, loop, events=events, progress=progress)
    return hist


def default_jobs():
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    histories: dict  # (method, seed) -> RunHistory

    def history(self, method, seed) -> RunHistory:
        return self.histories[(method, seed)]

    def tests_to_goal(self, method, goal, interpolate=True):
        """Per-seed tests-to-goal for ``method`` (None where never reached)."""
        return [self.histories[(method, s)].tests_to_goal(goal, interpolate) for s in self.config.run_seeds]

    def table(self):
        return result_table(self)

    def costs(self):
        return cost_table(self)


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1, verbose=False) -> ExperimentResult:
    """Run every (method, seed) pair and optionally write all artifacts.

    ``jobs > 1`` fans runs out over worker processes; the numbers do not
    depend on ``jobs``.
    """
    if jobs is None:
        jobs = default_jobs()
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    seeds = config.run_seeds
    tasks = [(m, s) for s in seeds for m in config.methods]
    cfg_dict = config.to_dict()
    if jobs == 1 or len(tasks) == 1:
        hists = [_run_one(cfg_dict, m, s, verbose) for m, s in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks)), mp_context=get_context("spawn")) as pool:
            futures = [pool.submit(_run_one, cfg_dict, m, s, verbose) for m, s in tasks]
            hists = [f.result() for f in futures]
    result = ExperimentResult(config, dict(zip(tasks, hists)))
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


# ---------------------------------------------------------------------------
# Aggregation


def _quantiles(values):
    if len(values) == 1:
        return values[0], values[0]
    q = statistics.quantiles(values, n=4, method="inclusive")
    return q[0], q[2]


def result_table(result: ExperimentResult):
    """One row per method x goal; savings are against RD's mean when RD ran."""
    cfg = result.config
    rows = []
    for goal in cfg.goals:
        rd = None
        if BASELINE in cfg.methods:
            rd_vals = [v for v in result.tests_to_goal(BASELINE, goal) if v is not None]
            rd = (statistics.fmean(rd_vals) if rd_vals else None, result.tests_to_goal(BASELINE, goal))
        for method in cfg.methods:
            interp = result.tests_to_goal(method, goal)
            raw = result.tests_to_goal(method, goal, interpolate=False)
            reached = [v for v in interp if v is not None]
            raw_reached = [v for v in raw if v is not None]
            row = {"method": method, "goal": goal, "runs": len(interp), "reached": len(reached),
                   "not_reached": len(interp) - len(reached)}
            if reached:
                q1, q3 = _quantiles(reached)
                row.update(mean_tests=statistics.fmean(reached), median_tests=statistics.median(reached),
                           q1_tests=q1, q3_tests=q3, mean_tests_raw=statistics.fmean(raw_reached))
            if rd is not None and rd[0] is not None and "mean_tests" in row:
                row["saved_tests"], row["savings_percent"] = savings(rd[0], row["mean_tests"])
            if rd is not None:
                wins, losses, p = sign_test(interp, rd[1])
                row.update(wins_vs_rd=wins, losses_vs_rd=losses, sign_test_p=p)
            rows.append(row)
    return rows


TABLE_COLUMNS = ["method", "goal", "runs", "reached", "not_reached", "mean_tests", "median_tests", "q1_tests",
                 "q3_tests", "mean_tests_raw", "saved_tests", "savings_percent", "wins_vs_rd", "losses_vs_rd",
                 "sign_test_p"]
COST_COLUMNS = ["method", "goal", "selector_hours", "saved_tests", "net_savings_hours"]


def cost_table(result: ExperimentResult):
    """Mean selector compute time per run and the resulting net savings.

    Wall-clock based, so unlike the other outputs it varies between reruns.
    """
    cfg = result.config
    rows = []
    table = {(r["method"], r["goal"]): r for r in result_table(result)}
    for goal in cfg.goals:
        for method in cfg.methods:
            hours = statistics.fmean(result.histories[(method, s)].selector_seconds for s in cfg.run_seeds) / 3600
            saved = table[(method, goal)].get("saved_tests")
            net = None if saved is None else net_savings(saved, cfg.per_test_sim_minutes, hours)
            rows.append({"method": method, "goal": goal, "selector_hours": hours, "saved_tests": saved,
                         "net_savings_hours": net})
    return rows


def mean_curves(result: ExperimentResult):
    """Pointwise mean coverage per method over runs that reached each checkpoint."""
    out = {}
    for method in result.config.methods:
        acc = {}
        for s in result.config.run_seeds:
            for tests, pct in result.histories[(method, s)].checkpoints:
                acc.setdefault(tests, []).append(pct)
        out[method] = [(t, statistics.fmean(v), len(v)) for t, v in sorted(acc.items())]
    return out


# ---------------------------------------------------------------------------
# Output files


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    Path(path).write_text(buf.getvalue())


def write_curves_csv(result: ExperimentResult, path):
    rows = [{"method": m, "seed": s, "tests": t, "coverage": c}
            for m in result.config.methods for s in result.config.run_seeds
            for t, c in result.histories[(m, s)].checkpoints]
    _write_csv(path, ["method", "seed", "tests", "coverage"], rows)


def load_curves(path):
    """Read curves.csv back as {(method, seed): RunHistory} (selections omitted)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"curves file not found: {path}")
    hists = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["method", "seed", "tests", "coverage"]:
            raise ConfigError(f"{path} is not a curves.csv file")
        for r in reader:
            key = (r["method"], int(r["seed"]))
            h = hists.setdefault(key, RunHistory(key[0], key[1], ()))
            h.iterations.append(Iteration(len(h.iterations), [], int(r["tests"]), float(r["coverage"])))
    return hists


_PALETTE = {"RD": "#7f7f7f", "AE": "#1f77b4", "IF": "#2ca02c", "TE": "#ff7f0e", "LSTM": "#d62728"}


def render_svg(curves: dict, goals=(), width=640, height=400) -> str:
    """Line chart of mean coverage vs tests simulated, one line per method."""
    ml, mr, mt, mb = 56, 90, 20, 44
    pw, ph = width - ml - mr, height - mt - mb
    xmax = max((t for pts in curves.values() for t, _, _ in pts), default=1) or 1
    ymin = 10 * math.floor(min((c for pts in curves.values() for _, c, _ in pts), default=0) / 10)
    ymin = min(ymin, 90)

    def x(t):
        return ml + pw * t / xmax

    def y(c):
        return mt + ph * (1 - (c - ymin) / (100 - ymin))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>']
    for k in range(0, 6):
        c = ymin + k * (100 - ymin) / 5
        out.append(f'<text x="{ml - 6}" y="{y(c) + 4:.1f}" text-anchor="end">{c:.0f}</text>')
        t = k * xmax / 5
        out.append(f'<text x="{x(t):.1f}" y="{mt + ph + 16}" text-anchor="middle">{t:.0f}</text>')
    for g in goals:
        out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{y(g):.1f}" y2="{y(g):.1f}" '
                   f'stroke="#bbb" stroke-dasharray="4 3"/>')
    for i, (method, pts) in enumerate(curves.items()):
        color = _PALETTE.get(method, "#000")
        path = " ".join(f"{x(t):.1f},{y(c):.1f}" for t, c, _ in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{path}"/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" x2="{ml + pw + 30}" y1="{ly - 4}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly}">{method}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 8}" text-anchor="middle">tests simulated</text>')
    out.append(f'<text transform="translate(14,{mt + ph / 2}) rotate(-90)" text-anchor="middle">'
               f'coverage (%)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def summary_markdown(result: ExperimentResult, costs=None) -> str:
    cfg = result.config
    lines = ["# Experiment summary", "",
             f"Methods: {', '.join(cfg.methods)}. Seeds: {', '.join(map(str, cfg.run_seeds))}. "
             f"Corpus: {cfg.corpus.n_tests if not cfg.corpus.path else cfg.corpus.path} tests, "
             f"warm-up {cfg.loop.warmup_n}, batch {cfg.loop.batch}.", "",
             "| method | goal | mean tests | median | IQR | saved vs RD | sign test p |",
             "|---|---|---|---|---|---|---|"]
    notes = []
    for r in result_table(result):
        if "mean_tests" in r:
            mean = f"{r['mean_tests']:.1f}"
            med = f"{r['median_tests']:.1f}"
            iqr = f"{r['q1_tests']:.1f}-{r['q3_tests']:.1f}"
        else:
            mean = med = iqr = "not reached"
        saved = f"{r['saved_tests']:.1f} ({r['savings_percent']:.2f}%)" if "saved_tests" in r else ""
        p = f"{r['sign_test_p']:.4f}" if "sign_test_p" in r and r["method"] != BASELINE else ""
        if r["not_reached"]:
            notes.append(f"{r['method']} at {r['goal']:g}%: {r['not_reached']} of {r['runs']} runs never reached "
                         f"the goal and are excluded from the mean.")
            mean += f" [{len(notes)}]"
        lines.append(f"| {r['method']} | {r['goal']:g}% | {mean} | {med} | {iqr} | {saved} | {p} |")
    if notes:
        lines.append("")
        lines.extend(f"[{i}] {n}" for i, n in enumerate(notes, 1))
    if costs:
        lines += ["", f"Net savings at {cfg.per_test_sim_minutes:g} simulated minutes per test:", "",
                  "| method | goal | selector hours | net hours saved |", "|---|---|---|---|"]
        for c in costs:
            net = "" if c["net_savings_hours"] is None else f"{c['net_savings_hours']:.2f}"
            lines.append(f"| {c['method']} | {c['goal']:g}% | {c['selector_hours']:.4f} | {net} |")
    return "\n".join(lines) + "\n"


def write_outputs(result: ExperimentResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(result.config.to_json() + "\n")
    write_curves_csv(result, out / "curves.csv")
    _write_csv(out / "table.csv", TABLE_COLUMNS, result_table(result))
    costs = cost_table(result)
    _write_csv(out / "costs.csv", COST_COLUMNS, costs)
    (out / "curves.svg").write_text(render_svg(mean_curves(result), result.config.goals))
    (out / "summary.md").write_text(summary_markdown(result, costs))
    runs = out / "runs"
    for (method, seed), hist in result.histories.items():
        d = runs / f"{method}_{seed}"
        d.mkdir(parents=True, exist_ok=True)
        hist.to_jsonl(d / "history.jsonl")
    return out


def goal_report(curves_path, goal):
    """Per-method tests-to-goal recomputed from a curves.csv file."""
    hists = load_curves(curves_path)
    rows = []
    for method in dict.fromkeys(m for m, _ in hists):
        vals = [h.tests_to_goal(goal) for (m, _), h in hists.items() if m == method]
        reached = [v for v in vals if v is not None]
        rows.append({"method": method, "runs": len(vals), "reached": len(reached),
                     "mean_tests": statistics.fmean(reached) if reached else None,
                     "median_tests": statistics.median(reached) if reached else None})
    return rows


__all__ = [
    "CorpusSpec", "ExperimentConfig", "ExperimentResult", "run_experiment", "savings", "net_savings",
    "sign_test", "result_table", "cost_table", "mean_curves", "render_svg", "summary_markdown",
    "write_outputs", "load_curves", "goal_report", "default_jobs", "BASELINE",
]
