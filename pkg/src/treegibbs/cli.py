"""Command-line entry point: ``treegibbs {sample,magnetization,percolation,chain,verify}``.

Exit codes: 0 success, 1 failed verification, 2 invalid arguments,
3 I/O failure, 4 infeasible conditioning.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from typing import Sequence

from . import acceptance, chain, perco, renorm, serialize
from .errors import DomainError, InfeasibleConditioning, NotApplicable
from .gibbs import Boundary, ModelParams, Sampler, derive_seed, make_rng
from .renorm import ImageField

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_IO, EXIT_INFEASIBLE = 0, 1, 2, 3, 4
PERCOLATION_COLUMNS = ["beta", "R", "p_zero", "survival_freq", "mean_NR", "model_mean"]
MAGNETIZATION_COLUMNS = ["R", "D", "m_plus", "m_minus", "gap"]

log = logging.getLogger("treegibbs")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument types


def nonneg_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (x >= 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {text}")
    return x


def _int_at_least(lo: int):
    def parse(text: str) -> int:
        try:
            x = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if x < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {x}")
        return x

    return parse


def seed_int(text: str) -> int:
    try:
        x = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if x < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return x


def float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def int_list(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 0:
        raise argparse.ArgumentTypeError("expected nonnegative integers")
    return out


def beta_grid(text: str) -> list[float]:
    """``start:stop:step``, stop included (up to rounding)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers in {text!r}") from None
    if step <= 0 or start < 0 or stop < start:
        raise argparse.ArgumentTypeError("need 0 <= start <= stop and step > 0")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def boundary_kind(text: str) -> Boundary:
    if text not in ("plus", "minus", "free"):
        raise argparse.ArgumentTypeError(f"choose from plus, minus, free (got {text!r})")
    return Boundary(text)


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, *, depth_default: int | None = 8) -> None:
    p.add_argument("--beta", type=nonneg_float, default=1.0, help="inverse temperature (default 1.0)")
    p.add_argument("--depth", type=_int_at_least(1), default=depth_default, help="tree depth")
    p.add_argument("--seed", type=seed_int, default=0, help="master seed (default 0)")
    p.add_argument("--output", choices=("csv", "json"), default="csv", help="output format")
    p.add_argument("--out", default=None, help="output path (default: stdout; sample: a directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treegibbs", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="file of 'flag = value' lines; explicit flags win")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw exact Gibbs samples and their majority images")
    _common(p)
    p.add_argument("--boundary", type=boundary_kind, default=Boundary("free"), metavar="{plus,minus,free}")
    p.add_argument("--replicas", type=_int_at_least(1), default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("magnetization", help="conditional root-image magnetization under Plus/Minus tails")
    _common(p, depth_default=None)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--eta", help="image field file (CSV or JSON); the root value is ignored")
    src.add_argument("--preset", choices=("null", "zero-free", "single-path"), help="built-in conditioning of radius --depth")
    p.add_argument("--flanks", default="+", help="single-path flank pattern over +/-, repeated (default +)")
    p.add_argument("--radii", type=int_list, help="truncation radii R (default: the field's own radius)")
    p.add_argument("--extra-depth", type=int_list, default=[1], help="tail offsets D - R (default 1)")
    p.add_argument("--spin-tail", action="store_true", help="close with boundary spins only, no image tail")
    p.set_defaults(func=cmd_magnetization)

    p = sub.add_parser("percolation", help="scan zero-path statistics over beta")
    _common(p, depth_default=12)
    p.add_argument("--boundary", type=boundary_kind, default=Boundary("free"), metavar="{plus,minus,free}")
    p.add_argument("--replicas", type=_int_at_least(1), default=1000)
    p.add_argument("--beta-grid", type=beta_grid, help="start:stop:step (overrides --beta)")
    p.add_argument("--theta", type=float_list, default=[], help="comma-separated theta values for MGF columns")
    p.set_defaults(func=cmd_percolation)

    p = sub.add_parser("chain", help="transfer-matrix trajectory along a single zero path")
    _common(p, depth_default=None)
    p.add_argument("--env", default="plus", help="flank pattern: plus, minus, alt or a +/- string, repeated")
    p.add_argument("--R", dest="R", type=_int_at_least(1), default=30, help="chain length")
    p.add_argument("--eta0", choices=("+", "-"), default="+", help="sign of the root image")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--quick", action="store_true", help="exact checks only (no Monte Carlo, no long sweeps)")
    p.add_argument("--output", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def _subparsers(parser: argparse.ArgumentParser) -> dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return dict(action.choices)
    return {}


def apply_config(parser: argparse.ArgumentParser, path: str, command: str) -> None:
    """Install ``key = value`` pairs from ``path`` as defaults of ``command``."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        cp.read_string("[treegibbs]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"malformed config file {path}: {exc}") from None
    sub = _subparsers(parser)[command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cp.items("treegibbs"):
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("help", "func"):
            raise UsageError(f"config key {key!r} is not a flag of '{command}'")
        action = known[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            defaults[dest] = value.strip()
    sub.set_defaults(**defaults)


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        commands = [a for a in rest if a in _subparsers(parser)]
        if commands:
            apply_config(parser, known.config, commands[0])
    # argparse converts string defaults through each flag's type, so config
    # values are validated exactly like command-line ones
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# output


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".treegibbs-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _write_atomic(out, text)


def _table(rows: list[dict], columns: list[str], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{c: r[c] for c in columns} for r in rows]) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for r in rows:
        writer.writerow({c: _fmt(r[c]) for c in columns})
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# ---------------------------------------------------------------------------
# commands


def cmd_sample(args: argparse.Namespace) -> int:
    out_dir = args.out or "."
    if not os.path.isdir(out_dir):
        raise OSError(f"output directory does not exist: {out_dir}")
    sampler = Sampler(args.depth, args.boundary, ModelParams(args.beta))
    ext = args.output
    write = serialize.to_json if ext == "json" else serialize.to_csv
    width = max(5, len(str(args.replicas - 1)))
    for i in range(args.replicas):
        sigma = sampler.draw(make_rng(derive_seed(args.seed, i)))
        eta = renorm.majority_image(sigma)
        _write_atomic(os.path.join(out_dir, f"spins_{i:0{width}d}.{ext}"), write(sigma))
        _write_atomic(os.path.join(out_dir, f"image_{i:0{width}d}.{ext}"), write(eta))
    log.info("wrote %d sample pairs to %s", args.replicas, out_dir)
    return EXIT_OK


def _preset(name: str, R: int, flanks: str) -> ImageField:
    if name == "null":
        return renorm.null_image(R)
    if name == "zero-free":
        return ImageField.constant(R, 1, partial=True)
    env = chain.ChainEnvironment.from_pattern(flanks, R + 1)
    return renorm.single_path_image(env.fields, R)


def cmd_magnetization(args: argparse.Namespace) -> int:
    if args.eta:
        try:
            field = serialize.load(args.eta)
        except (ValueError, DomainError) as exc:
            raise UsageError(f"--eta: {exc}") from None
        if not isinstance(field, ImageField):
            raise UsageError("--eta: expected an image field (address,value), got spins")
        eta = field.as_partial()
    else:
        if args.depth is None:
            raise UsageError("--preset needs --depth (the radius R)")
        eta = _preset(args.preset, args.depth, args.flanks)
    radii = args.radii or [eta.depth]
    if max(radii) > eta.depth or min(radii) < 1:
        raise UsageError(f"--radii must lie in 1..{eta.depth}")
    if min(args.extra_depth) < 1:
        raise UsageError("--extra-depth values must be >= 1")
    params = ModelParams(args.beta)
    rows = []
    for R in radii:
        sub = eta.truncate(R)
        for extra in args.extra_depth:
            D = R + extra
            m = {}
            for tail in (Boundary("plus"), Boundary("minus")):
                joint = renorm.precise_root_cell_joint(sub, tail, D, params, image_tail=not args.spin_tail)
                m[tail.kind] = joint[1][1][1] - joint[0][0][0]
            rows.append(
                {
                    "R": R,
                    "D": D,
                    "m_plus": float(m["plus"]),
                    "m_minus": float(m["minus"]),
                    "gap": float(abs(m["plus"] - m["minus"])),
                }
            )
    _emit(_table(rows, MAGNETIZATION_COLUMNS, args.output), args.out)
    return EXIT_OK


def cmd_percolation(args: argparse.Namespace) -> int:
    betas = args.beta_grid or [args.beta]
    R = args.depth
    columns = list(PERCOLATION_COLUMNS)
    for t in args.theta:
        columns += [f"mgf_emp({t:g})", f"mgf_model({t:g})"]
    rows = []
    for beta in betas:
        summary = perco.monte_carlo_paths(beta, R, args.boundary, args.replicas, args.seed, args.theta)
        p = perco.p_zero(beta)
        row = {
            "beta": beta,
            "R": R,
            "p_zero": p,
            "survival_freq": summary.survival_freq,
            "mean_NR": summary.mean_paths,
            "model_mean": perco.expected_paths_model(R, p),
        }
        for t in args.theta:
            row[f"mgf_emp({t:g})"] = summary.mgf_emp[float(t)]
            row[f"mgf_model({t:g})"] = perco.mgf_model(t, p, R)
        rows.append(row)
        log.info("beta=%g done", beta)
    _emit(_table(rows, columns, args.output), args.out)
    return EXIT_OK


def cmd_chain(args: argparse.Namespace) -> int:
    try:
        env = chain.ChainEnvironment.from_pattern(args.env, args.R, 1 if args.eta0 == "+" else -1)
    except DomainError as exc:
        raise UsageError(f"--env: {exc}") from None
    if chain.is_alternating(env):
        log.warning("alternating environment: the ratio products never become positive and no bound applies")
    rows = chain.trajectory_rows(env, args.beta, args.R)
    _emit(_table(rows, list(chain.TRAJECTORY_COLUMNS), args.output), args.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    results = []
    for check in acceptance.CRITERIA:
        if args.quick and check.number not in acceptance.QUICK:
            continue
        r = check()
        print(r.line(), file=sys.stderr, flush=True)
        results.append(r)
    rows = [
        {"criterion": r.number, "title": r.title, "passed": r.passed, "seconds": round(r.seconds, 3), "detail": r.detail}
        for r in results
    ]
    _emit(_table(rows, ["criterion", "title", "passed", "seconds", "detail"], args.output), args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"treegibbs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"treegibbs: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"treegibbs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleConditioning as exc:
        print(f"treegibbs: infeasible conditioning: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainError, NotApplicable) as exc:
        print(f"treegibbs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"treegibbs: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
