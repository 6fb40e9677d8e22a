"""Command-line entry point: gen / sim / select / exp / report.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .coverage import CoverageState
from .duvsim import GROUPS, simulate_events
from .errors import ConfigError, CorpusParseError, CovsteerError
from .harness import ExperimentConfig, default_jobs, goal_report, run_experiment
from .params import DuvParams
from .selectors import METHODS, ModelHyper
from .seloop import LoopConfig, run
from .stimgen import DEFAULT_MIX, gen_corpus, load_corpus, parse_mix, save_corpus

SEED_ENV = "COVSTEER_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _read_json(path, what):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {p} is not valid JSON: {exc}") from None


def _duv_params(args):
    d = _read_json(args.duv, "DUV params file") if args.duv else {}
    for k in ("M", "S", "D", "W", "B"):
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    return DuvParams.from_dict(d)


def _load_corpus(path):
    if not Path(path).is_file():
        raise ConfigError(f"corpus not found: {path}")
    return load_corpus(path)


def _goals(text):
    try:
        return tuple(float(g) for g in text.split(",") if g.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"goals must be comma-separated numbers, got {text!r}") from None


def _add_duv_flags(p):
    g = p.add_argument_group("DUV parameters")
    g.add_argument("--duv", metavar="JSON", help="JSON file with DUV parameters (M, S, D, W, B); flags override it")
    g.add_argument("--M", type=int, help="number of masters (default 4)")
    g.add_argument("--S", type=int, help="number of slaves (default 4)")
    g.add_argument("--D", type=int, help="pipeline depth per slave (default 3)")
    g.add_argument("--W", type=int, help="maximum wait cycles per beat (default 3)")
    g.add_argument("--B", type=int, help="maximum burst length (default 8)")


def build_parser():
    parser = _Parser(prog="covsteer", description="Novelty-driven test selection on a synthetic crossbar DUV.")
    sub = parser.add_subparsers(dest="cmd", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", help="generate a test corpus (JSON lines)")
    p.add_argument("--seed", type=int, default=0, help="corpus seed (default 0; COVSTEER_SEED overrides the default)")
    p.add_argument("--n", type=int, required=True, help="number of tests")
    p.add_argument("--mix", default=None, help="profile mix, e.g. uniform=0.78,bursty=0.11,sparse=0.11")
    p.add_argument("--min-len", type=int, default=60, help="shortest test in transactions (default 60)")
    p.add_argument("--max-len", type=int, default=100, help="longest test in transactions (default 100)")
    p.add_argument("--out", required=True, help="output corpus file")
    _add_duv_flags(p)

    p = sub.add_parser("sim", help="simulate tests and report coverage")
    p.add_argument("--corpus", required=True, help="corpus file")
    p.add_argument("--ids", default=None, help="comma-separated test ids to simulate (default all)")
    p.add_argument("--out", "--events-out", dest="events_out", default=None,
                   help="write coverage events as JSON lines, one test per line")
    _add_duv_flags(p)

    p = sub.add_parser("select", help="run one closed selection loop")
    p.add_argument("--corpus", required=True, help="corpus file")
    p.add_argument("--method", default="LSTM", choices=METHODS, help="selector (default LSTM)")
    p.add_argument("--config", default=None, help="JSON loop config; flags override it")
    p.add_argument("--seed", type=int, default=None, help="loop seed (default 0)")
    p.add_argument("--warmup", type=int, default=None, help="warm-up tests (default 50)")
    p.add_argument("--batch", type=int, default=None, help="tests per iteration (default 100)")
    p.add_argument("--goals", type=_goals, default=None, help="coverage goals in percent (default 90,95,97)")
    p.add_argument("--epochs", type=int, default=None, help="training epochs per iteration (default 20)")
    p.add_argument("--exhaust", action="store_true", help="keep selecting after the last goal is met")
    p.add_argument("--out", required=True, help="output directory")
    _add_duv_flags(p)

    p = sub.add_parser("exp", help="run a multi-seed, multi-method experiment")
    p.add_argument("--config", default=None, help="experiment config JSON (default: built-in benchmark)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: available cores)")
    p.add_argument("--methods", default=None, help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--repeats", type=int, default=None, help="number of paired seeds")
    p.add_argument("--seed", type=int, default=None, help="first seed")
    p.add_argument("--quiet", action="store_true", help="no per-iteration progress lines")

    p = sub.add_parser("report", help="tests-to-goal per method from an experiment directory")
    p.add_argument("--runs", required=True, help="experiment output directory (containing curves.csv)")
    p.add_argument("--goal", type=float, required=True, help="coverage goal in percent")
    return parser


def cmd_gen(args):
    seed = args.seed
    env = _env_seed()
    if env is not None and "--seed" not in args._argv:
        seed = env
    params = _duv_params(args)
    mix = parse_mix(args.mix) if args.mix else DEFAULT_MIX
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    corpus = gen_corpus(seed, args.n, mix, (args.min_len, args.max_len), params)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} tests to {args.out}")
    return 0


def cmd_sim(args):
    params = _duv_params(args)
    corpus = _load_corpus(args.corpus)
    if args.ids:
        try:
            wanted = [int(v) for v in args.ids.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--ids must be comma-separated integers, got {args.ids!r}") from None
        by_id = {t.test_id: t for t in corpus}
        missing = [i for i in wanted if i not in by_id]
        if missing:
            raise ConfigError(f"test ids not in corpus: {missing}")
        corpus = [by_id[i] for i in wanted]
    state = CoverageState.for_params(params)
    fh = open(args.events_out, "w") if args.events_out else None
    try:
        for t in corpus:
            events = simulate_events(t, params)
            state.absorb(events, tests=1)
            if fh:
                fh.write(json.dumps({"test_id": t.test_id, "events": [e.to_json() for e in events]}) + "\n")
    finally:
        if fh:
            fh.close()
    print(f"tests simulated: {state.tests_simulated}")
    print(f"coverage: {state.coverage_percent():.2f}% ({state.n_covered}/{len(state.universe)})")
    for g in GROUPS:
        print(f"  {g}: {state.group_percent(g):.2f}%")
    return 0


def cmd_select(args):
    params = _duv_params(args)
    corpus = _load_corpus(args.corpus)
    loop = LoopConfig.from_dict(_read_json(args.config, "config")) if args.config else LoopConfig()
    env = _env_seed()
    if env is not None:
        loop = replace(loop, seed=env)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.warmup is not None:
        over["warmup_n"] = args.warmup
    if args.batch is not None:
        over["batch"] = args.batch
    if args.goals is not None:
        over["goals"] = args.goals
    if args.epochs is not None:
        over["hyper"] = replace(loop.hyper, epochs=args.epochs)
    if args.exhaust:
        over["stop_at_goals"] = False
    over["selector"] = args.method
    loop = LoopConfig.from_dict({**loop.to_dict(), **{k: v.to_dict() if isinstance(v, ModelHyper) else v
                                                       for k, v in over.items()}})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps({"loop": loop.to_dict(), "duv": params.to_dict(),
                                                 "corpus": str(args.corpus)}, indent=2, sort_keys=True) + "\n")

    def progress(it):
        print(f"{loop.selector} seed={loop.seed} iter={it.index} tests={it.tests_simulated} "
              f"coverage={it.coverage_percent:.2f}%", flush=True)

    hist = run(corpus, loop.selector, params, loop, progress=progress)
    hist.to_jsonl(out / "history.jsonl")
    for g in loop.goals:
        t = hist.tests_to_goal(g)
        print(f"goal {g:g}%: " + ("not reached" if t is None else f"{t:.1f} tests"))
    return 0


def cmd_exp(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    env = _env_seed()
    if env is not None:
        cfg = replace(cfg, seed=env, seeds=None)
    if args.methods:
        cfg = replace(cfg, methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()))
    if args.repeats is not None:
        cfg = replace(cfg, repeats=args.repeats, seeds=None if cfg.seeds is None or
                      len(cfg.seeds) != args.repeats else cfg.seeds)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed, seeds=None)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    result = run_experiment(cfg, args.out, jobs=jobs, verbose=not args.quiet)
    for r in result.table():
        mean = "not reached" if "mean_tests" not in r else f"{r['mean_tests']:.1f}"
        print(f"{r['method']:>5} goal {r['goal']:g}%: mean tests {mean} ({r['reached']}/{r['runs']} reached)")
    print(f"results in {args.out}")
    return 0


def cmd_report(args):
    rows = goal_report(Path(args.runs) / "curves.csv", args.goal)
    for r in rows:
        if r["mean_tests"] is None:
            print(f"{r['method']}: not reached (0/{r['runs']})")
        else:
            print(f"{r['method']}: mean {r['mean_tests']:.1f} median {r['median_tests']:.1f} "
                  f"tests to {args.goal:g}% ({r['reached']}/{r['runs']} reached)")
    return 0


COMMANDS = {"gen": cmd_gen, "sim": cmd_sim, "select": cmd_select, "exp": cmd_exp, "report": cmd_report}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    args._argv = argv
    try:
        return COMMANDS[args.cmd](args)
    except (ConfigError, CorpusParseError) as exc:
        print(f"covsteer {args.cmd}: error: {exc}", file=sys.stderr)
        return 1
    except (CovsteerError, OSError, RuntimeError, ValueError) as exc:
        print(f"covsteer {args.cmd}: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
