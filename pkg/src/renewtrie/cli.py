"""Command-line front end (``renewtrie``).

Exit status: 0 on success, 1 when a simulated quantity fails its comparison
with theory (or a selftest check fails), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import os
import struct
import sys
import warnings
from fractions import Fraction

import numpy as np

from renewtrie import acceptance, codes, sim, theory
from renewtrie.source import (
    HintMismatchError,
    SourceParams,
    StringHandle,
    new_source,
    solve_arithmetic_p,
)

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

SIM_KINDS = [k.replace("_", "-") for k in sim.KINDS]

# config-file keys and the argparse destinations they fill
CONFIG_KEYS = ("p", "arith", "n", "lam", "b", "j", "R", "M", "K", "V", "reps", "seed", "threads",
               "output", "out", "method", "tunstall", "khodak")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def _n_list(text: str) -> list[int]:
    try:
        vals = [int(float(t)) if "e" in t.lower() else int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return vals


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=float, help="probability of letter 1")
    p.add_argument("--arith", metavar="A:B", help="lattice source with ln p / ln q = A/B")
    p.add_argument("--config", metavar="PATH", help="TOML file with default flag values")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", choices=("csv", "json"), help="machine-readable output format")
    p.add_argument("--out", metavar="PATH", help="write output to PATH instead of stdout")


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reps", type=_positive_int, help="replicates (default 1000)")
    p.add_argument("--seed", type=_positive_int, help=f"base seed (default {sim.DEFAULT_SEED})")
    p.add_argument("--threads", type=_positive_int, help="worker processes (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="renewtrie", description="Random tries, VF codes and renewal asymptotics.")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    pr = sub.add_parser("predict", help="print theory predictions")
    _add_source(pr)
    pr.add_argument("--n", type=_n_list, help="string counts, comma separated")
    pr.add_argument("--b", type=_positive_int, help="bucket size for b-trie constants")
    pr.add_argument("--R", type=float, help="Khodak threshold reciprocal")
    pr.add_argument("--M", type=_positive_int, help="Tunstall dictionary size")
    pr.add_argument("--K", type=_positive_int, help="stopped walk step bound")
    pr.add_argument("--V", type=float, help="stopped walk level (in bits)")
    _add_output(pr)

    sm = sub.add_parser("simulate", help="run an experiment and compare with theory")
    sm.add_argument("kind", choices=SIM_KINDS)
    _add_source(sm)
    sm.add_argument("--n", type=_positive_int, help="string count (letters N for parse-count)")
    sm.add_argument("--lambda", dest="lam", type=float, help="Poisson mean (Poissonized size kinds)")
    sm.add_argument("--b", type=_positive_int, help="bucket size (default 1)")
    sm.add_argument("--j", type=_positive_int, help="occupancy level for btrie-occupancy (default 1)")
    sm.add_argument("--R", type=float)
    sm.add_argument("--M", type=_positive_int)
    sm.add_argument("--K", type=_positive_int)
    sm.add_argument("--V", type=float)
    sm.add_argument("--method", choices=sim.METHODS, help="sampling route (default strings)")
    _add_run(sm)
    _add_output(sm)

    cd = sub.add_parser("codes", help="variable-to-fixed dictionaries and the VFC1 format")
    csub = cd.add_subparsers(dest="action", metavar="ACTION")
    csub.required = True
    for name, helptext in (("build", "build a dictionary"), ("stats", "exact phrase statistics"),
                           ("encode", "encode a bit stream"), ("decode", "decode a VFC1 file")):
        c = csub.add_parser(name, help=helptext)
        if name != "decode":
            _add_source(c)
            c.add_argument("--tunstall", type=_positive_int, metavar="M", help="Tunstall dictionary with M phrases")
            c.add_argument("--khodak", type=float, metavar="R", help="Khodak dictionary with threshold 1/R")
            c.add_argument("--M", type=_positive_int, help="same as --tunstall")
            c.add_argument("--R", type=float, help="same as --khodak")
        else:
            c.add_argument("--config", metavar="PATH")
        if name == "build":
            c.add_argument("--dump", action="store_true", help="print the phrase table")
        if name in ("build", "stats"):
            c.add_argument("--output", choices=("csv", "json"))
        if name == "encode":
            c.add_argument("--in", dest="inp", metavar="PATH", help="input file (bytes, MSB first)")
            c.add_argument("--text", action="store_true", help="input file holds the characters 0/1")
            c.add_argument("--n", type=_positive_int, help="letters to encode (default: whole input)")
            c.add_argument("--seed", type=_positive_int, help="encode a random source string when no --in")
        if name == "decode":
            c.add_argument("--in", dest="inp", metavar="PATH", required=True)
            c.add_argument("--text", action="store_true", help="write 0/1 characters instead of bytes")
        c.add_argument("--out", metavar="PATH")

    wk = sub.add_parser("walk", help="stopped random walk experiment")
    _add_source(wk)
    wk.add_argument("--K", type=_positive_int)
    wk.add_argument("--V", type=float)
    _add_run(wk)
    _add_output(wk)

    st = sub.add_parser("selftest", help="run the acceptance suite")
    st.add_argument("--only", metavar="LIST", help="comma-separated criterion numbers")
    return ap


# -- helpers -----------------------------------------------------------------------


def _apply_config(args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for key, value in cfg.items():
        dest = "lam" if key == "lambda" else key
        if dest not in CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        if hasattr(args, dest) and getattr(args, dest) is None:
            if dest == "n" and args.command == "predict":
                value = [int(v) for v in (value if isinstance(value, list) else [value])]
            setattr(args, dest, value)


def _source(args) -> SourceParams:
    hint = None
    if args.arith:
        try:
            a, b = (int(v) for v in str(args.arith).split(":"))
        except ValueError:
            raise UsageError(f"--arith expects A:B, got {args.arith!r}") from None
        if a < 1 or b < 1 or math.gcd(a, b) != 1:
            raise UsageError("--arith needs coprime positive integers")
        hint = (a, b)
    if args.p is None and hint is None:
        raise UsageError("give --p or --arith")
    try:
        p = args.p if args.p is not None else solve_arithmetic_p(*hint)
        if p == 0.5 and hint is None:
            return new_source(Fraction(1, 2))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return new_source(p, hint)
    except HintMismatchError as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    return "" if v is None else f"{v:.10g}"


def _table(header: list[str], rows: list[list], fmt: str | None) -> str:
    if fmt == "json":
        import json

        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    if fmt == "csv":
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            # repr keeps every digit so csv and json carry identical numbers
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()
    cells = [header] + [[_fmt(v) if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


# -- subcommands -----------------------------------------------------------------------


def cmd_predict(args) -> int:
    src = _source(args)
    header = ["quantity", "size", "value", "smooth", "oscillation", "variance", "regime"]
    rows = []

    def add(name, size, pr: theory.Prediction):
        rows.append([name, size, pr.value, pr.smooth, pr.oscillation, pr.variance, pr.regime])

    for n in args.n or []:
        if n < 2:
            raise UsageError("--n values must be at least 2 for predictions")
        size = f"n={n}"
        add("depth", size, theory.predict_depth(src, n))
        add("patricia_depth", size, theory.predict_patricia_depth(src, n))
        add("imbalance", size, theory.predict_imbalance(src, n))
        add("trie_size_per_string", size, theory.predict_trie_size(src, n))
        ins = theory.predict_insert(src, n)
        add("insert_mean", size, ins.as_prediction())
        rows.append(["insert_P(N=0)", size, ins.p0, None, None, None, ins.regime])
        if args.b and args.b > 1:
            for j in range(1, args.b + 1):
                add(f"btrie_occupancy_j={j}", size + f";b={args.b}", theory.predict_btrie_occupancy(src, args.b, n, j))
    if args.b:
        c = theory.btrie_constants(src, args.b)
        for j, v in enumerate(c.pi, start=1):
            rows.append([f"pi_{j}", f"b={args.b}", v, v, 0.0, None, "btrie-constant"])
    if args.R is not None:
        if not args.R > 1:
            raise UsageError("--R must exceed 1")
        k = theory.predict_khodak(src, args.R)
        add("khodak_M/R", f"R={args.R:g}", k.M_over_R)
        add("khodak_length", f"R={args.R:g}", k.mean_len)
    if args.M is not None:
        if args.M < 2:
            raise UsageError("--M must be at least 2")
        t = theory.predict_tunstall(src, args.M)
        add("tunstall_length", f"M={args.M}", t.mean_len)
        rows.append(["tunstall_rate", f"M={args.M}", t.rate, None, None, None, "rate"])
    if args.K is not None or args.V is not None:
        if args.K is None or args.V is None:
            raise UsageError("--K and --V go together")
        if src.p == 0.5:
            raise UsageError("the stopped walk needs p != 1/2")
        if args.K < 1 or not args.V > 0:
            raise UsageError("need --K >= 1 and --V > 0")
        w = theory.predict_stopped_walk(src, args.K, args.V)
        rows.append(["walk_mean", f"K={args.K};V={args.V:g}", w.mean, w.mean_first_order, None, w.variance,
                     f"walk/{w.regime}"])
    if not rows:
        raise UsageError("nothing to predict: give --n, --b, --R, --M or --K/--V")
    _emit(_table(header, rows, args.output), args.out)
    return 0


def _spec_from_args(args, kind: str, src: SourceParams) -> sim.ExperimentSpec:
    kw = dict(kind=kind, src=src, replicates=args.reps if args.reps is not None else 1000,
              seed=args.seed if args.seed is not None else sim.DEFAULT_SEED)
    if getattr(args, "method", None):
        kw["method"] = args.method
    if kind == "parse_count":
        kw["N"] = args.n
        if args.M is not None:
            kw["M"] = args.M
        if args.R is not None:
            kw["R"] = args.R
    elif kind == "stopped_walk":
        kw.update(K=args.K, V=args.V)
    else:
        kw.update(n=args.n, R=args.R, M=args.M, b=args.b or 1, j=args.j or 1)
        if args.lam is not None:
            kw.update(lam=args.lam, poissonized=True)
    spec = sim.ExperimentSpec(**kw)
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if kind == "stopped_walk" and src.p == 0.5:
        raise UsageError("the stopped walk needs p != 1/2")
    return spec


def _simulate(args, kind: str) -> int:
    src = _source(args)
    spec = _spec_from_args(args, kind, src)
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    summary = sim.run(spec, workers=threads)
    abs_tol, z_crit = sim.TOLERANCES[kind]
    cmp = sim.compare(summary, sim.predict_for(spec), abs_tol, z_crit)
    rows = [(spec, cmp)]
    if args.output == "json":
        text = sim.to_json(rows)
    elif args.output == "csv":
        text = sim.to_csv(rows)
    else:
        text = (
            f"{kind} p={src.p!r} ({src.arith}) {spec.size_param} reps={summary.replicates} seed={spec.seed}\n"
            f"  mean      {summary.mean:.6f} +- {summary.stderr:.6f}\n"
            f"  variance  {summary.variance:.6f}\n"
            f"  predicted {cmp.predicted.value:.6f} (oscillation {cmp.predicted.oscillation:.3g}, "
            f"{cmp.predicted.regime})\n"
            f"  z = {cmp.z:.3f}; tolerance |z| <= {z_crit:g} and |diff| <= {abs_tol:g}: "
            f"{'pass' if cmp.passed else 'FAIL'}\n"
        )
    _emit(text, args.out)
    return 0 if cmp.passed else 1


def cmd_simulate(args) -> int:
    return _simulate(args, args.kind.replace("-", "_"))


def cmd_walk(args) -> int:
    if args.K is None or args.V is None:
        raise UsageError("walk needs --K and --V")
    args.n = args.lam = args.R = args.M = args.b = args.j = None
    args.method = None
    return _simulate(args, "stopped_walk")


def _dictionary(args) -> tuple[SourceParams, codes.Dictionary]:
    src = _source(args)
    M = args.tunstall if args.tunstall is not None else args.M
    R = args.khodak if args.khodak is not None else args.R
    if (M is None) == (R is None):
        raise UsageError("give exactly one of --tunstall/--M or --khodak/--R")
    try:
        if M is not None:
            if M < 2:
                raise UsageError("Tunstall dictionaries need M >= 2")
            return src, codes.tunstall_dictionary(src, M)
        if not R > 1:
            raise UsageError("Khodak dictionaries need R > 1")
        return src, codes.khodak_dictionary(src, R)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _stats_rows(d: codes.Dictionary):
    st = codes.phrase_stats(d)
    rows = [["M", d.M], ["ell", d.ell], ["mean_len", float(st.mean_len)], ["var_len", float(st.var_len)],
            ["rate", st.rate]]
    if isinstance(st.mean_len, Fraction):
        rows.append(["mean_len_exact", str(st.mean_len)])
    return rows


def cmd_codes(args) -> int:
    action = args.action
    if action == "decode":
        try:
            with open(args.inp, "rb") as fh:
                blob = fh.read()
            d, bits = codes.decode_stream(blob)
        except (OSError, ValueError, struct.error) as exc:
            raise UsageError(str(exc)) from None
        if args.text or not args.out:
            _emit(bits + "\n", args.out)
        else:
            arr = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
            with open(args.out, "wb") as fh:
                fh.write(np.packbits(arr).tobytes())
        return 0
    src, d = _dictionary(args)
    if action in ("build", "stats"):
        rows = _stats_rows(d)
        if action == "stats":
            if d.origin[0] == "tunstall":
                t = theory.predict_tunstall(src, d.M)
                rows += [["predicted_mean_len", t.mean_len.value], ["predicted_rate", t.rate]]
            else:
                k = theory.predict_khodak(src, d.origin[1])
                rows += [["predicted_mean_len", k.mean_len.value], ["predicted_M", k.M]]
        text = _table(["field", "value"], rows, args.output)
        if action == "build" and args.dump:
            probs = d.exact_probs if d.exact_probs is not None else d.probs
            table = [[i, format(i, f"0{d.ell}b"), a, float(pr)] for i, (a, pr) in enumerate(zip(d.phrases, probs))]
            text += _table(["index", "codeword", "phrase", "prob"], table, args.output)
        if action == "build" and args.out:
            with open(args.out, "wb") as fh:
                fh.write(codes.encode_stream(d, "", 0))
            sys.stdout.write(text)
        else:
            _emit(text, args.out if action == "stats" else None)
        return 0
    # encode
    if args.inp:
        try:
            with open(args.inp, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise UsageError(str(exc)) from None
        if args.text:
            stream = raw.decode("ascii", errors="replace").strip()
            if stream.strip("01"):
                raise UsageError("--text input may only contain 0 and 1")
        else:
            stream = "".join(format(b, "08b") for b in raw)
        N = len(stream) if args.n is None else args.n
        if N > len(stream):
            raise UsageError(f"--n {N} exceeds the {len(stream)} input letters")
        # pad so the last phrase can be completed past letter N
        stream = stream + "0" * d.max_len
    else:
        if args.n is None:
            raise UsageError("encoding a random string needs --n")
        N = args.n
        stream = StringHandle(src, args.seed if args.seed is not None else sim.DEFAULT_SEED, 0)
    if not args.out:
        raise UsageError("encode needs --out")
    blob = codes.encode_stream(d, stream, N)
    with open(args.out, "wb") as fh:
        fh.write(blob)
    sys.stdout.write(f"wrote {len(blob)} bytes: M={d.M} ell={d.ell} N={N}\n")
    return 0


def cmd_selftest(args) -> int:
    numbers = None
    if args.only:
        try:
            numbers = [int(v) for v in args.only.split(",") if v]
        except ValueError:
            raise UsageError("--only expects comma-separated integers") from None
        unknown = [v for v in numbers if v not in acceptance.CHECKS]
        if unknown:
            raise UsageError(f"unknown criteria {unknown}")
    # no timings, so identical runs print identical bytes
    results = acceptance.run_all(numbers, echo=lambda s: print(s, flush=True), timing=False)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return 0 if not failed else 1


COMMANDS = {"predict": cmd_predict, "simulate": cmd_simulate, "codes": cmd_codes, "walk": cmd_walk,
            "selftest": cmd_selftest}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"renewtrie: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
