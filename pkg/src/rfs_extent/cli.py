"""Batch command line: simulate, track, eval, mc.

Exit codes: 0 ok, 2 bad arguments or configuration, 3 file I/O failure,
4 malformed input line, 5 truth/estimate step mismatch.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import FILTERS, config_from_dict, scenario_config
from .labelled import Label
from .metrics import metrics_csv
from .runner import run_filter, score
from .simulation import MalformedLine, ScenarioSpec, _mat, _num, _vec, builtin_scenario, generate, read_log, write_log

EXIT_BAD_ARGS, EXIT_IO, EXIT_MALFORMED, EXIT_MISMATCH = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code

    def __reduce__(self):
        return (CliError, (self.code, str(self)))


def load_scenario(arg: str, seed: int | None = None) -> ScenarioSpec:
    """Built-in id ``1|2|3`` or a path to a JSON scenario document."""
    try:
        if arg.strip().isdigit():
            spec = builtin_scenario(int(arg))
        else:
            with open(arg, encoding="utf-8") as fh:
                spec = ScenarioSpec.from_dict(json.load(fh))
    except OSError as exc:
        raise CliError(EXIT_BAD_ARGS, f"cannot read scenario {arg!r}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(EXIT_BAD_ARGS, f"bad scenario {arg!r}: {exc}") from None
    return spec if seed is None else spec.with_seed(seed)


def build_config(filter_name: str, scenario: str | None, config_path: str | None):
    if filter_name not in FILTERS:
        raise CliError(EXIT_BAD_ARGS, f"unknown filter {filter_name!r}; choose from {', '.join(FILTERS)}")
    spec = load_scenario(scenario) if scenario else _generic_spec()
    cfg = scenario_config(spec, filter_name)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_BAD_ARGS, f"config is not valid JSON: {exc}") from None
        try:
            cfg = config_from_dict(doc, cfg)
        except (ValueError, KeyError, TypeError) as exc:
            raise CliError(EXIT_BAD_ARGS, f"bad config: {exc}") from None
    return cfg


def _generic_spec() -> ScenarioSpec:
    # one birth site at the origin, moderate clutter
    return ScenarioSpec(1, (), 0.9, 10.0, name="generic")


def _write_text(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from None


def estimates_jsonl(log, run, filter_name: str) -> str:
    lines = []
    for rec, est in zip(log, run.estimates):
        items = []
        for e in est:
            item = '{"label":"%s","x":%s,"chi":%s,"gamma":%s' % (e.label, _vec(e.x), _mat(e.chi), _num(e.gamma))
            if e.r is not None:
                item += ',"r":%s' % _num(e.r)
            items.append(item + "}")
        lines.append('{"k":%d,"est":[%s]}' % (rec.k, ",".join(items)))
    t = run.step_times
    summary = {
        "summary": {
            "filter": filter_name,
            "steps": len(t),
            "total_s": sum(t),
            "per_step_mean_s": statistics.fmean(t) if t else 0.0,
            "per_step_std_s": statistics.pstdev(t) if t else 0.0,
        }
    }
    lines.append(json.dumps(summary))
    return "\n".join(lines) + "\n"


class _Est:
    __slots__ = ("label", "x", "chi", "gamma", "r")

    def __init__(self, label, x, chi, gamma, r=None):
        self.label, self.x, self.chi, self.gamma, self.r = label, x, chi, gamma, r


def read_estimates(path) -> list:
    """``[(k, [estimate, ...]), ...]`` from a track output file (summary record skipped)."""
    out = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                if "summary" in doc:
                    continue
                ests = [
                    _Est(Label.parse(e["label"]), np.asarray(e["x"], float), np.asarray(e["chi"], float), float(e["gamma"]), e.get("r"))
                    for e in doc["est"]
                ]
                out.append((int(doc["k"]), ests))
            except (ValueError, KeyError, TypeError) as exc:
                raise CliError(EXIT_MALFORMED, f"{path}: line {lineno}: {exc}") from None
    return out


def _read_log(path):
    try:
        return read_log(path)
    except MalformedLine as exc:
        raise CliError(EXIT_MALFORMED, f"{path}: {exc}") from None
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from None


# ---------------------------------------------------------------- commands


def cmd_simulate(args):
    spec = load_scenario(args.scenario, args.seed)
    log = generate(spec)
    try:
        write_log(log, args.out)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {args.out}: {exc}") from None


def cmd_track(args):
    cfg = build_config(args.filter, args.scenario, args.config)
    log = _read_log(args.inp)
    run = run_filter(args.filter, log, cfg)
    _write_text(args.out, estimates_jsonl(log, run, args.filter))


def cmd_eval(args):
    if args.ospa_c <= 0 or args.ospa_p < 1:
        raise CliError(EXIT_BAD_ARGS, "need --ospa-c > 0 and --ospa-p >= 1")
    log = _read_log(args.truth)
    est = read_estimates(args.est)
    if [r.k for r in log] != [k for k, _ in est]:
        raise CliError(EXIT_MISMATCH, "truth and estimate files cover different steps")
    card, dist, ext = score(log, [e for _, e in est], args.ospa_c, args.ospa_p, args.extended)
    k0 = log[0].k if log else 0
    text = metrics_csv([card], [dist], [ext] if args.extended else None, k0=k0)
    if args.extended:
        print("extended OSPA base distance: centroid + Gaussian-Wasserstein extent + 0.1 |rate|", file=sys.stderr)
    _write_text(args.out, text) if args.out else sys.stdout.write(text)


def _mc_one(job):
    """One simulate + track + score pipeline; module level so it pickles."""
    scenario, filter_name, seed, config_path, c, p, extended = job
    spec = load_scenario(scenario, seed)
    cfg = build_config(filter_name, scenario, config_path)
    log = generate(spec)
    run = run_filter(filter_name, log, cfg)
    card, dist, ext = score(log, run.estimates, c, p, extended)
    return card, dist, ext, run.r_series


def mc_jobs(args) -> int:
    env = os.environ.get("RFS_EXTENT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(EXIT_BAD_ARGS, f"RFS_EXTENT_THREADS must be an integer, got {env!r}") from None
    return max(1, args.jobs)


def r_series_csv(results, k0: int = 0) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "k", "label", "r"])
    for run_idx, (_, _, _, rs) in enumerate(results):
        for i, step in enumerate(rs):
            for label in sorted(step):
                w.writerow([run_idx, k0 + i, str(label), repr(float(step[label]))])
    return buf.getvalue()


def cmd_mc(args):
    if args.runs < 1:
        raise CliError(EXIT_BAD_ARGS, "--runs must be >= 1")
    build_config(args.filter, args.scenario, args.config)  # validate before spawning workers
    jobs = [
        (args.scenario, args.filter, args.seed_base + i, args.config, args.ospa_c, args.ospa_p, args.extended)
        for i in range(args.runs)
    ]
    workers = mc_jobs(args)
    results = []
    if workers == 1:
        for i, job in enumerate(jobs):
            results.append(_run_indexed(i, job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(_mc_one, jobs)):
                results.append(res)
    text = metrics_csv([r[0] for r in results], [r[1] for r in results], [r[2] for r in results] if args.extended else None)
    _write_text(args.out, text)
    if args.filter in ("lmb", "lmb-ab"):
        _write_text(args.r_out or _r_path(args.out), r_series_csv(results))


def _run_indexed(i, job):
    try:
        return _mc_one(job)
    except CliError:
        raise
    except Exception as exc:  # surface which run failed
        raise RuntimeError(f"Monte Carlo run {i} (seed {job[2]}) failed: {exc}") from exc


def _r_path(out: str) -> str:
    root, ext = os.path.splitext(out)
    return root + ".r" + (ext or ".csv")


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rfs-extent", description="Extended-target GLMB/LMB tracking tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a scenario log (JSON Lines)")
    p.add_argument("--scenario", required=True, help="1, 2, 3 or a JSON scenario file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run a filter over a scenario log")
    p.add_argument("--filter", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--config")
    p.add_argument("--scenario", help="scenario whose clutter, p_D and birth sites set the defaults")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score estimates against truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--ospa-c", type=float, default=100.0)
    p.add_argument("--ospa-p", type=float, default=1.0)
    p.add_argument("--extended", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mc", help="Monte Carlo simulate + track + eval, aggregated")
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--filter", required=True)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--ospa-c", type=float, default=100.0)
    p.add_argument("--ospa-p", type=float, default=1.0)
    p.add_argument("--extended", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--r-out", help="existence-probability series CSV (lmb filters)")
    p.set_defaults(func=cmd_mc)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_BAD_ARGS
    try:
        args.func(args)
    except CliError as exc:
        print(f"rfs-extent: error: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
