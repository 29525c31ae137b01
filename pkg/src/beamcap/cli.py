"""``beamcap`` command line: solve, sweep, verify and ergodic.

Exit codes: 0 success, 1 input error, 2 verification or certification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import (ChannelFormatError, InvalidBudgetError, PowerBudget, capacity_egt,
                   capacity_mrt, channel_from_json)
from .fading import (CorrelationError, CovariancePolicy, FadingModel, ergodic_capacity,
                     isotropic_dominance_test, tx_correlated_counterexample)
from .kkt import certify
from .miso import capacity_approx, solve
from .parallel import map_ordered
from .suite import ALL_CHECKS, check_instance, grid_check, instance_from_json, run_suite, summarize

EXIT_OK, EXIT_INPUT, EXIT_FAILED = 0, 1, 2
LN2 = math.log(2.0)


class InputError(Exception):
    pass


def _load_json(path):
    try:
        text = sys.stdin.read() if str(path) == "-" else Path(path).read_text()
        return json.loads(text)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _budget(tp, pa) -> PowerBudget:
    return PowerBudget(tp, pa[0] if len(pa) == 1 else pa)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False, default=_default)


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _scale(units):
    return 1.0 if units == "nats" else 1.0 / LN2


# -- solve -----------------------------------------------------------------

def cmd_solve(args) -> int:
    h = channel_from_json(_load_json(args.channel))
    budget = _budget(args.tp, args.pa)
    sol = solve(h, budget)
    cert = certify(h, sol, budget)
    out = {"units": args.units,
           "capacity": sol.capacity_nats * _scale(args.units),
           "solution": sol.to_json(),
           "kkt": cert.to_json() if cert.residuals else {"pass": True, "branch": cert.branch}}
    print(_dump(out))
    return EXIT_OK if cert.passed else EXIT_FAILED


# -- sweep -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    channel: str
    per_antenna: tuple
    grid: tuple
    output: str
    units: str = "nats"

    def __post_init__(self):
        g = self.grid
        if len(g) < 2:
            raise InputError("sweep grid needs at least 2 points")
        if any(b <= a for a, b in zip(g, g[1:])):
            raise InputError("sweep grid must be strictly increasing")
        if self.units not in ("nats", "bits"):
            raise InputError("units must be 'nats' or 'bits'")


def make_grid(start=None, stop=None, step=None, values=None) -> tuple:
    if values:
        return tuple(float(v) for v in values)
    if None in (start, stop, step):
        raise InputError("give --tp-list or all of --tp-start/--tp-stop/--tp-step")
    if step <= 0:
        raise InputError("--tp-step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(start + i * step for i in range(max(n, 0)))


def _fmt(x) -> str:
    return f"{x:.12g}"


def sweep_rows(h, spec: SweepSpec, workers=None) -> list:
    pa = spec.per_antenna[0] if len(spec.per_antenna) == 1 else list(spec.per_antenna)
    s = _scale(spec.units)

    def point(pt):
        sol = solve(h, PowerBudget(pt, pa))
        c_mrt = capacity_mrt(h, pt)
        c_egt = capacity_egt(h, pa)
        approx = capacity_approx(h, pt, pa).approx_nats
        row = [_fmt(pt), _fmt(sol.capacity_nats * s), _fmt(c_mrt * s), _fmt(c_egt * s),
               _fmt(approx * s), str(sol.k)]
        return row + [_fmt(a) for a in sol.amplitudes]

    return map_ordered(point, spec.grid, workers)


def write_sweep_csv(h, spec: SweepSpec, stream, workers=None) -> None:
    """CSV with ``#`` metadata lines, LF endings and 12 significant digits."""
    pa = ",".join(_fmt(p) for p in spec.per_antenna)
    stream.write("# beamcap sweep\n")
    stream.write(f"# channel: {json.dumps(channel_from_json(_load_json(spec.channel)).to_json()['gains'])}\n")
    stream.write(f"# per_antenna: {pa}\n")
    stream.write(f"# units: {spec.units}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["P_T", "C_joint", "C_MRT", "C_EGT", "C_approx", "k"]
                    + [f"a_{i + 1}" for i in range(h.m)])
    writer.writerows(sweep_rows(h, spec, workers))


def cmd_sweep(args) -> int:
    h = channel_from_json(_load_json(args.channel))
    spec = SweepSpec(channel=args.channel, per_antenna=tuple(args.pa),
                     grid=make_grid(args.tp_start, args.tp_stop, args.tp_step, args.tp_list),
                     output=args.output, units=args.units)
    PowerBudget(spec.grid[0], spec.per_antenna[0] if len(spec.per_antenna) == 1
                else list(spec.per_antenna)).limits(h.m)
    buf = io.StringIO()
    write_sweep_csv(h, spec, buf, args.threads)
    text = buf.getvalue()
    if spec.output == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(spec.output, "w", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"cannot write {spec.output}: {exc.strerror or exc}") from None
    if args.svg:
        _write_svg(text, args.svg)
    return EXIT_OK


def _write_svg(csv_text: str, path: str) -> None:
    """Best-effort static line chart of capacities vs total power."""
    try:
        import matplotlib

        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping --svg", file=sys.stderr)
        return
    rows = [r for r in csv.reader(line for line in csv_text.splitlines() if not line.startswith("#"))]
    head, data = rows[0], np.array(rows[1:], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for j in range(1, 5):
        ax.plot(data[:, 0], data[:, j], label=head[j])
    ax.set_xlabel("P_T")
    ax.set_ylabel("capacity")
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- verify ----------------------------------------------------------------

def cmd_verify(args) -> int:
    checks = tuple(c for c, on in (("oracle", args.oracle), ("kkt", args.kkt),
                                   ("k_search", args.k_search)) if on) or ALL_CHECKS
    if args.replay:
        data = _load_json(args.replay)
        items = data.get("failures", [data]) if isinstance(data, dict) else data
        results = []
        for i, item in enumerate(items):
            inst = item.get("instance", item)
            try:
                h, budget = instance_from_json(inst)
            except (KeyError, TypeError) as exc:
                raise InputError(f"bad replay instance {i}: {exc}") from None
            results.append(check_instance(h, budget, index=item.get("index", i),
                                          seed=args.seed, checks=checks))
        report = summarize(results, seed=args.seed)
    else:
        if args.instances < 1 or args.max_m < 1:
            raise InputError("--instances and --max-m must be positive")
        report = run_suite(args.instances, args.seed, args.max_m, args.threads, checks)
    report["checks"] = list(checks)
    if args.oracle_grid:
        report["grid"] = grid_check(seed=args.seed)
        report["pass"] = report["pass"] and report["grid"]["pass"]
    if report["failures"] and args.failures:
        try:
            Path(args.failures).write_text(_dump({"failures": report["failures"]}) + "\n")
        except OSError as exc:
            print(f"cannot write {args.failures}: {exc}", file=sys.stderr)
    print(_dump(report))
    return EXIT_OK if report["pass"] else EXIT_FAILED


# -- ergodic ---------------------------------------------------------------

def load_matrix(path) -> np.ndarray:
    """Row-major matrix JSON; entries are ``[re, im]`` pairs or plain numbers."""
    data = _load_json(path)
    if isinstance(data, dict):
        data = data.get("matrix")
    try:
        rows = [[complex(*e) if isinstance(e, list) else complex(e) for e in row] for row in data]
        return np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad matrix ({exc})") from None


def cmd_ergodic(args) -> int:
    if args.samples < 2:
        raise InputError("--samples must be at least 2")
    if args.counterexample:
        # defaults: m=2, n=2, P_T=2, P=2 (P > P_T/m, otherwise the policies tie)
        m, n = args.m or 2, args.n or 2
        tp, pa = args.tp or 2.0, args.pa or 2.0
        rep = tx_correlated_counterexample(tp, pa, m, n, args.samples, args.seed, args.threads)
        print(_dump({"mode": "counterexample", "m": m, "n": n, "P_T": tp, "P": pa,
                     **rep.to_json()}))
        return EXIT_OK if rep.passed else EXIT_FAILED
    args.m, args.n, args.tp = args.m or 1, args.n or 1, args.tp or 1.0
    if args.tx_corr:
        model = FadingModel.tx_correlated(load_matrix(args.tx_corr), args.n)
    elif args.rx_corr:
        model = FadingModel.semi_correlated(load_matrix(args.rx_corr), args.m)
    else:
        model = FadingModel.iid(args.n, args.m)
    if args.dominance is not None:
        profile = args.dominance or [args.tp] + [0.0] * (model.m - 1)
        if len(profile) != model.m:
            raise InputError(f"--dominance needs {model.m} values")
        rep = isotropic_dominance_test(model, profile, args.samples, args.seed, args.threads)
        print(_dump({"mode": "dominance", "m": model.m, "n": model.n,
                     "profile": [float(x) for x in profile], **rep.to_json()}))
        return EXIT_OK if rep.passed else EXIT_FAILED
    policy = CovariancePolicy.isotropic(model.m, args.tp, args.pa)
    est = ergodic_capacity(model, policy, args.samples, args.seed, args.threads)
    out = {"mode": "isotropic", "model": model.kind.value, "n": model.n, "m": model.m,
           "P_T": args.tp, "P": args.pa, "units": args.units, **est.to_json()}
    out["capacity"] = est.capacity_nats * _scale(args.units)
    out["std_error_units"] = est.std_error * _scale(args.units)
    print(_dump(out))
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads; default from BEAMCAP_THREADS (0 = auto)")

    p = argparse.ArgumentParser(prog="beamcap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"beamcap {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="optimal beamformer for one channel")
    s.add_argument("--channel", required=True, help="channel JSON file ('-' for stdin)")
    s.add_argument("--tp", type=_positive, required=True, help="total power P_T")
    s.add_argument("--pa", type=_positive, nargs="+", required=True,
                   help="per-antenna limit P, or one limit per antenna")
    s.add_argument("--units", choices=("nats", "bits"), default="nats")
    s.add_argument("--bits", dest="units", action="store_const", const="bits")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", parents=[common], help="capacity vs total power as CSV")
    w.add_argument("--channel", required=True)
    w.add_argument("--pa", type=_positive, nargs="+", required=True)
    w.add_argument("--tp-start", type=_positive)
    w.add_argument("--tp-stop", type=_positive)
    w.add_argument("--tp-step", type=_positive)
    w.add_argument("--tp-list", type=_positive, nargs="+")
    w.add_argument("--output", "-o", default="-", help="CSV path ('-' for stdout)")
    w.add_argument("--units", choices=("nats", "bits"), default="nats")
    w.add_argument("--bits", dest="units", action="store_const", const="bits")
    w.add_argument("--svg", help="also write a static SVG chart here")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", parents=[common], help="randomized cross-validation")
    v.add_argument("--instances", type=int, default=1000)
    v.add_argument("--max-m", type=int, default=8)
    v.add_argument("--oracle", action="store_true", help="run the oracle-equivalence check")
    v.add_argument("--kkt", action="store_true", help="run KKT certification and negative controls")
    v.add_argument("--k-search", action="store_true", help="run exhaustive validation of the active-count search")
    v.add_argument("--oracle-grid", action="store_true", help="also run the m=2 complex grid check")
    v.add_argument("--replay", help="re-check instances from a JSON file")
    v.add_argument("--failures", default="verify_failures.json",
                   help="where to write failing instances (default: %(default)s)")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("ergodic", parents=[common], help="Monte Carlo ergodic capacity")
    e.add_argument("--n", type=int, help="receive antennas (default 1)")
    e.add_argument("--m", type=int, help="transmit antennas (default 1)")
    e.add_argument("--tp", type=_positive, help="total power (default 1)")
    e.add_argument("--pa", type=_positive, help="per-antenna limit (default: none binding)")
    e.add_argument("--samples", type=int, default=100_000)
    e.add_argument("--rx-corr", help="receive correlation matrix JSON")
    e.add_argument("--tx-corr", help="transmit correlation matrix JSON (not unitary-invariant)")
    e.add_argument("--dominance", type=float, nargs="*", default=None,
                   help="compare isotropic with diag(values); default diag(P_T, 0, ..., 0)")
    e.add_argument("--counterexample", action="store_true",
                   help="transmit correlation diag(1,0,...,0): concentrated vs isotropic")
    e.add_argument("--units", choices=("nats", "bits"), default="nats")
    e.add_argument("--bits", dest="units", action="store_const", const="bits")
    e.set_defaults(func=cmd_ergodic)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ChannelFormatError, InvalidBudgetError, CorrelationError,
            ValueError) as exc:
        print(f"beamcap {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
