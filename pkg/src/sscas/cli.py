"""Command-line entry point.

    sscas run SCENARIO [--check LIST] [--seeds A..B] [--budget STEPS]
                       [--trace PATH] [--delta D]
    sscas codec encode -p P -k K -n N --secret S [--coeffs C ...] [--seed X]
    sscas codec decode -p P -k K SHARE... [--corrupt I=V] [--erase I]

Exit codes: 0 pass, 1 check or decode failure, 2 usage or parse error.
"""

import argparse
import hashlib
import random
import sys

from . import checker
from .coding import decode_secret, rs_encode, share_secret
from .sim import ScenarioError, Simulator, parse_scenario, write_trace

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_seeds(text):
    """``"7"`` -> [7]; ``"1..50"`` -> [1, ..., 50] (inclusive); ``"1,3,5"`` too."""
    seeds = []
    try:
        for part in text.split(","):
            if ".." in part:
                lo, hi = part.split("..", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise UsageError(f"empty seed range {part!r}")
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise UsageError(f"bad seed list {text!r}") from None
    return seeds


def trace_path(template, seed, batch):
    if template is None:
        return None
    if "{seed}" in template:
        return template.replace("{seed}", str(seed))
    if batch:
        return f"{template}.{seed}"
    return template


def report(trace, names):
    """Verdicts plus the numbers a run report shows."""
    verdicts = checker.run_checks(trace, names)
    sizes = [ev.data["size"] for ev in trace if ev.kind == "store" and ev.step > 0]
    rec = checker.measure_recovery(trace)
    complete = trace[-1].data.get("complete", False) if trace else False
    return verdicts, {
        "max_storage": max(sizes, default=0),
        "recovery_cycles": rec[0] if rec else None,
        "complete": complete,
        "steps": trace[-1].step if trace else 0,
    }


def cmd_run(args, out):
    try:
        with open(args.scenario) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        scenario = parse_scenario(text)
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    names = [c for c in args.check.split(",") if c] if args.check else []
    unknown = [c for c in names if c not in checker.CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s): {', '.join(unknown)}")
    if args.delta is not None:
        scenario.delta = args.delta
    seeds = parse_seeds(args.seeds) if args.seeds else [scenario.seed]
    batch = len(seeds) > 1
    digest = hashlib.sha1(text.encode()).hexdigest()[:12]
    failed_seeds = []
    for seed in seeds:
        scenario.seed = seed
        trace = Simulator(scenario).run(budget=args.budget)
        path = trace_path(args.trace, seed, batch)
        if path:
            write_trace(trace, path)
        verdicts, stats = report(trace, names)
        print(f"RUN scenario={digest} seed={seed} steps={stats['steps']} "
              f"complete={stats['complete']} max_storage={stats['max_storage']} "
              f"recovery_cycles={stats['recovery_cycles']} trace={path or '-'}", file=out)
        for v in verdicts:
            print(v.line(), file=out)
            if not v.ok and v.detail:
                print(f"  witness: {v.detail}", file=out)
        if not all(v.ok for v in verdicts):
            failed_seeds.append(seed)
    if batch:
        passed = len(seeds) - len(failed_seeds)
        print(f"SUMMARY {passed}/{len(seeds)} seeds passed", file=out)
        if failed_seeds:
            print(f"  failing seeds: {' '.join(map(str, failed_seeds))}", file=out)
    return EXIT_FAIL if failed_seeds else EXIT_OK


def parse_assignments(items):
    table = {}
    for item in items or []:
        try:
            idx, val = item.split("=", 1)
            table[int(idx)] = int(val)
        except ValueError:
            raise UsageError(f"expected I=V, got {item!r}") from None
    return table


def cmd_encode(args, out):
    if args.coeffs is not None:
        if len(args.coeffs) != args.k - 1:
            raise UsageError(f"need exactly k-1={args.k - 1} coefficients")
        shares = rs_encode([args.secret] + args.coeffs, args.n, args.p)
    else:
        _, shares = share_secret(args.secret, args.k, args.n, args.p, random.Random(args.seed))
    print(" ".join(map(str, shares)), file=out)
    return EXIT_OK


def cmd_decode(args, out):
    received = {}
    for idx, word in enumerate(args.shares, 1):
        if word in ("-", "_"):
            received[idx] = None
            continue
        try:
            received[idx] = int(word)
        except ValueError:
            raise UsageError(f"bad share {word!r}") from None
    for idx, val in parse_assignments(args.corrupt).items():
        if idx not in received:
            raise UsageError(f"no share {idx}")
        received[idx] = val
    for idx in args.erase or []:
        if idx not in received:
            raise UsageError(f"no share {idx}")
        received[idx] = None
    secret = decode_secret(received, args.k, args.p)
    if secret is None:
        print("FAIL", file=out)
        return EXIT_FAIL
    print(secret, file=out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="sscas", description="Coded atomic storage simulator and tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and check the trace")
    run.add_argument("scenario")
    run.add_argument("--check", default="atomicity,liveness",
                     help=f"comma-separated checks ({','.join(checker.CHECKS)})")
    run.add_argument("--seeds", help="seed, list or inclusive range like 1..50")
    run.add_argument("--budget", type=int, help="step budget")
    run.add_argument("--trace", help="trace file ({seed} is substituted in batch mode)")
    run.add_argument("--delta", type=int, help="override the scenario's delta")
    run.set_defaults(func=cmd_run)

    codec = sub.add_parser("codec", help="share or recover a secret")
    csub = codec.add_subparsers(dest="action", required=True)
    enc = csub.add_parser("encode")
    enc.add_argument("-p", type=int, required=True)
    enc.add_argument("-k", type=int, required=True)
    enc.add_argument("-n", type=int, required=True)
    enc.add_argument("--secret", type=int, required=True)
    enc.add_argument("--coeffs", type=int, nargs="*", help="the k-1 random coefficients")
    enc.add_argument("--seed", type=int, default=0)
    enc.set_defaults(func=cmd_encode)
    dec = csub.add_parser("decode")
    dec.add_argument("-p", type=int, required=True)
    dec.add_argument("-k", type=int, required=True)
    dec.add_argument("shares", nargs="+", help="share values in index order; '-' marks an erasure")
    dec.add_argument("--corrupt", action="append", metavar="I=V")
    dec.add_argument("--erase", action="append", type=int, metavar="I")
    dec.set_defaults(func=cmd_decode)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
