"""Command line interface.

Subcommands: gen-code, encode, decode, simulate, entropy-sweep, trace.
Exit codes: 0 success, 1 usage error, 2 I/O error, 3 encoding failure
(encode and trace subcommands only). The master seed comes from --seed or,
failing that, the RBP_SEED environment variable.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import blackwell, entropy, harness
from .blackwell import BinIndices, BlackwellCode, EncodingFailure, RatePair
from .propagation import EngineConfig, ReinforcementSchedule

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_ENCODING_FAILED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_code_flags(p):
    p.add_argument("--n", type=int, default=1000, help="block length")
    p.add_argument("--r1", type=float, default=0.5, help="rate of receiver 1")
    p.add_argument("--r2", type=float, default=0.5, help="rate of receiver 2")
    p.add_argument("--c", type=int, default=6, help="check connectivity")
    p.add_argument("--pool", type=int, default=6, help="gate pool size")
    p.add_argument("--linear", action="store_true", help="XOR checks instead of gates")


def _add_engine_flags(p):
    p.add_argument("--gamma0", type=float, default=1.0)
    p.add_argument("--gamma1", type=float, default=0.999)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--cutoff", type=int, default=None, help="default ceil(1/(1-gamma1))")


def _add_seed_flag(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (or RBP_SEED)")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("RBP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"RBP_SEED is not an integer: {env!r}") from exc
    return 0


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _read_bits(line: str) -> np.ndarray:
    bits = line.strip()
    if bits and not set(bits) <= {"0", "1"}:
        raise ValueError(f"not a bit string: {bits[:40]!r}")
    return np.array([int(b) for b in bits], dtype=np.uint8)


def build_parser() -> _Parser:
    parser = _Parser(prog="bwrbp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-code", help="sample a code and write its code file")
    _add_code_flags(p)
    _add_seed_flag(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("encode", help="encode bin indices into channel symbols")
    p.add_argument("--code", required=True, help="code file from gen-code")
    p.add_argument("--bins", required=True, help="two lines of bits: w1 then w2")
    _add_engine_flags(p)
    _add_seed_flag(p)
    p.add_argument("--out", default="-")

    p = sub.add_parser("decode", help="recover one receiver's bin index")
    p.add_argument("--code", required=True)
    p.add_argument("--symbols", required=True, help="symbol file from encode")
    p.add_argument("--side", type=int, choices=(1, 2), required=True)
    p.add_argument("--out", default="-")

    p = sub.add_parser("simulate", help="Monte-Carlo FER/BER estimation")
    _add_code_flags(p)
    _add_engine_flags(p)
    _add_seed_flag(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--out", default="-", help="summary CSV (fer,ber,mean_iters)")
    p.add_argument("--records", default=None, help="optional per-trial CSV")

    p = sub.add_parser("entropy-sweep", help="Bethe entropy as a function of rate")
    p.add_argument("--rates", required=True, help="comma-separated rate list")
    _add_code_flags(p)
    _add_seed_flag(p)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--out", default="-")

    p = sub.add_parser("trace", help="single encode with a per-iteration CSV")
    _add_code_flags(p)
    _add_engine_flags(p)
    _add_seed_flag(p)
    p.add_argument("--out", default="-")

    return parser


def _cmd_gen_code(args) -> int:
    rng = np.random.default_rng(_resolve_seed(args))
    code, _ = blackwell.build_code(
        args.n, RatePair(args.r1, args.r2), args.c, args.pool, args.linear, rng
    )
    _write(args.out, code.to_json())
    return EXIT_OK


def _cmd_encode(args) -> int:
    code = BlackwellCode.load(args.code)
    with open(args.bins) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise ValueError("bins file needs two lines of bits (w1 then w2)")
    bins = BinIndices(w1=_read_bits(lines[0]), w2=_read_bits(lines[1]))
    schedule = ReinforcementSchedule(args.gamma0, args.gamma1)
    config = EngineConfig(
        mode="rbp",
        max_iterations=args.cutoff,
        epsilon=args.epsilon,
        seed=_resolve_seed(args),
        schedule=schedule,
    )
    try:
        symbols = blackwell.encode(code, bins, config)
    except EncodingFailure as failure:
        print(f"encoding failed: {failure}", file=sys.stderr)
        return EXIT_ENCODING_FAILED
    _write(args.out, "".join(str(int(s)) for s in symbols) + "\n")
    return EXIT_OK


def _cmd_decode(args) -> int:
    code = BlackwellCode.load(args.code)
    with open(args.symbols) as fh:
        text = fh.read().strip()
    symbols = np.array([int(ch) for ch in text], dtype=np.uint8)
    y1, y2 = blackwell.symbols_to_pairs(symbols)
    bits = blackwell.decode(code, args.side, y1 if args.side == 1 else y2)
    _write(args.out, "".join(str(int(b)) for b in bits) + "\n")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    rng = np.random.default_rng((seed, 0))
    code, _ = blackwell.build_code(
        args.n, RatePair(args.r1, args.r2), args.c, args.pool, args.linear, rng
    )
    schedule = ReinforcementSchedule(args.gamma0, args.gamma1)
    report = harness.simulate(
        code,
        schedule,
        trials=args.trials,
        master_seed=seed,
        epsilon=args.epsilon,
        cutoff=args.cutoff,
    )
    _write(args.out, harness.summary_csv(report))
    if args.records is not None:
        _write(args.records, harness.records_csv(report))
    return EXIT_OK


def _cmd_entropy_sweep(args) -> int:
    try:
        rates = [float(r) for r in args.rates.split(",") if r]
    except ValueError as exc:
        raise UsageError(f"bad --rates value: {args.rates!r}") from exc
    rows = entropy.entropy_sweep(
        rates,
        n=args.n,
        c=args.c,
        pool_size=args.pool,
        linear=args.linear,
        trials=args.trials,
        seed=_resolve_seed(args),
        epsilon=args.epsilon,
    )
    _write(args.out, harness.sweep_csv(rows))
    return EXIT_OK


def _cmd_trace(args) -> int:
    seed = _resolve_seed(args)
    rng = np.random.default_rng((seed, 0))
    code, _ = blackwell.build_code(
        args.n, RatePair(args.r1, args.r2), args.c, args.pool, args.linear, rng
    )
    bins = BinIndices(
        w1=rng.integers(0, 2, code.k1).astype(np.uint8),
        w2=rng.integers(0, 2, code.k2).astype(np.uint8),
    )
    schedule = ReinforcementSchedule(args.gamma0, args.gamma1)
    config = EngineConfig(
        mode="rbp",
        max_iterations=args.cutoff,
        epsilon=args.epsilon,
        seed=seed,
        schedule=schedule,
    )
    rows = ["iteration,gamma,max_change,violated_factors"]

    def hook(iteration, gamma, delta, violations):
        rows.append(f"{iteration},{gamma:.6g},{delta:.6g},{violations}")

    status = EXIT_OK
    try:
        blackwell.encode(code, bins, config, trace=hook)
    except EncodingFailure:
        status = EXIT_ENCODING_FAILED
    _write(args.out, "\n".join(rows) + "\n")
    return status


_COMMANDS = {
    "gen-code": _cmd_gen_code,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "simulate": _cmd_simulate,
    "entropy-sweep": _cmd_entropy_sweep,
    "trace": _cmd_trace,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
