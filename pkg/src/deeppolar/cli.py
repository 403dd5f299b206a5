"""Command-line front end.

Every subcommand accepts ``--config FILE`` (TOML or JSON).  Keys use the
long-flag names (dashes or underscores); flags given explicitly on the
command line take precedence over the file, which takes precedence over the
built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import dega
from .deep import (
    DeepCodeSpec, SpecError, attach_crc, decompose_extension, deep_decode_batch, deep_encode,
)
from .gf2 import CRC11
from .polar import InvalidDimensionError
from .profile import build_deep_spec, exhaustive_rate_profile, greedy_rate_profile
from .sim import SimConfig, records_to_csv, records_to_json, run_bler, snr_to_sigma2


class UsageError(Exception):
    pass


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _parse_bits(token: str, fmt: str, length: int) -> np.ndarray:
    token = token.strip()
    if fmt == "hex":
        try:
            value = int(token, 16) if token else 0
        except ValueError:
            raise UsageError(f"not a hex frame: {token!r}") from None
        width = 4 * len(token)
        if width < length:
            raise UsageError(f"hex frame holds {width} bits, need {length}")
        bits = [(value >> (width - 1 - i)) & 1 for i in range(width)]
        return np.array(bits[width - length:], dtype=np.uint8)
    if len(token) != length or set(token) - {"0", "1"}:
        raise UsageError(f"expected {length} binary digits, got {token!r}")
    return np.frombuffer(token.encode(), dtype=np.uint8) - ord("0")


def _format_bits(bits: np.ndarray, fmt: str) -> str:
    s = "".join(map(str, bits.tolist()))
    if fmt == "hex":
        pad = (-len(s)) % 4
        s = "0" * pad + s
        return "".join(f"{int(s[i:i + 4], 2):x}" for i in range(0, len(s), 4))
    return s


def _read_lines(path) -> list[str]:
    text = sys.stdin.read() if path in (None, "-") else Path(path).read_text()
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _sigma2(args, rate: float) -> float:
    return snr_to_sigma2(args.snr, args.snr_conv, rate)


def _layer_n(args) -> list[int]:
    return decompose_extension(args.m, args.n0) if args.m != args.n0 else []


def _k_total(args) -> int:
    return args.k + (CRC11.degree if args.crc11 else 0)


def _search(args):
    layer_n = _layer_n(args)
    sigma2 = _sigma2(args, args.k / args.m)
    fn = exhaustive_rate_profile if args.profile == "exhaustive" else greedy_rate_profile
    result = fn(args.n0, layer_n, _k_total(args), sigma2)
    spec = build_deep_spec(args.n0, result.k_list, layer_n, crc=CRC11 if args.crc11 else None)
    return spec, result


def cmd_construct(args):
    spec, _ = _search(args)
    _write(args.out, spec.to_json() + "\n")


def cmd_profile(args):
    spec, result = _search(args)
    _write(args.out, spec.to_json() + "\n")
    if args.grid_out:
        if not result.grid:
            result.grid = [(result.k_list, result.pe0, result.pe_ub)]
        _write(args.grid_out, result.grid_csv())
    print(f"K_q = {list(result.k_list)}  pe0 = {result.pe0:.4e}  pe_ub = {result.pe_ub:.4e}  "
          f"evaluations = {result.evaluations}", file=sys.stderr)


def cmd_encode(args):
    spec = DeepCodeSpec.load(args.spec)
    out = []
    for line in _read_lines(args.input):
        payload = _parse_bits(line, args.format, spec.payload_k)
        out.append(_format_bits(deep_encode(spec, attach_crc(spec, payload)), args.format))
    _write(args.out, "".join(s + "\n" for s in out))


def cmd_decode(args):
    spec = DeepCodeSpec.load(args.spec)
    lines = _read_lines(args.input)
    if args.hard:
        bits = np.array([_parse_bits(ln, args.format, spec.M) for ln in lines])
        llr = 40.0 * (1.0 - 2.0 * bits.reshape(-1, spec.M).astype(float))
    else:
        try:
            llr = np.array([[float(v) for v in ln.replace(",", " ").split()] for ln in lines])
        except ValueError as exc:
            raise UsageError(f"malformed LLR line: {exc}") from None
        if llr.size and llr.shape[-1] != spec.M:
            raise UsageError(f"LLR lines must hold {spec.M} values")
    if not len(lines):
        _write(args.out, "")
        return
    res = deep_decode_batch(spec, llr, args.list, mode=args.connection_mode)
    rows = []
    for msg, failed in zip(res.messages, res.crc_failed):
        text = _format_bits(msg[:spec.payload_k], args.format)
        rows.append(text + (" crc_fail" if failed else ""))
    _write(args.out, "".join(r + "\n" for r in rows))


def cmd_dega(args):
    if args.spec:
        spec = DeepCodeSpec.load(args.spec)
    else:
        spec, _ = _search(args)
    sigma2 = _sigma2(args, spec.rate)
    n = int(np.log2(spec.n0))
    frozen = np.setdiff1d(np.arange(spec.n0), spec.i0)
    prof = dega.dega_profile(n, sigma2, frozen)
    _write(args.out, prof.to_csv())
    est = dega.extended_error_prob(spec, sigma2)
    print(f"pe0 = {est.pe0:.6e}  pe_ub = {est.pe_ub:.6e}", file=sys.stderr)


def _snr_grid(args) -> tuple:
    if args.snr_step <= 0:
        raise UsageError("--snr-step must be positive")
    n = int(np.floor((args.snr_stop - args.snr_start) / args.snr_step + 1e-9)) + 1
    if n < 1:
        raise UsageError("--snr-stop is below --snr-start")
    return tuple(round(args.snr_start + i * args.snr_step, 10) for i in range(n))


GNUPLOT_TEMPLATE = """set datafile separator ','
set logscale y
set xlabel 'SNR [dB]'
set ylabel 'BLER'
set grid
plot '{csv}' using 8:12 skip 1 with linespoints title '{title}'
"""


def cmd_simulate(args):
    cfg = SimConfig(
        scheme=args.scheme, M=args.m, K=args.k, n0=args.n0, crc=args.crc11,
        list_size=args.list, double_list=args.double_list, snr_db=_snr_grid(args),
        snr_conv=args.snr_conv, max_frames=args.max_frames, min_errors=args.min_errors,
        seed=args.seed, profile=args.profile, design_snr_db=args.design_snr,
        connection_mode=args.connection_mode, chunk=args.chunk)
    records = run_bler(cfg, workers=args.workers)
    _write(args.out, records_to_csv(records))
    if args.json:
        _write(args.json, records_to_json(records))
    if args.gnuplot:
        if args.out in (None, "-"):
            raise UsageError("--gnuplot needs --out to name the data file")
        title = f"{args.scheme} M={args.m} K={args.k}"
        _write(args.gnuplot, GNUPLOT_TEMPLATE.format(csv=args.out, title=title))


def cmd_bec_example(args):
    eps = dega.bec_evolution(0.5, 2)
    lines = ["bit-channel erasure probabilities of the length-4 extension at eps = 0.5:"]
    lines += [f"  u{i}: {e:.4f}" for i, e in enumerate(eps)]
    lines.append(f"rounded set: {sorted(round(float(e), 2) for e in eps)}")
    bound = dega.bec_example_bound()
    lines.append(f"SC block-error bound (rounded channels): {bound:.4f} ~ {round(bound, 2):.2f}")
    lines.append(f"SC block-error bound (exact channels):   {dega.bec_example_bound(False):.9f}")
    _write(args.out, "\n".join(lines) + "\n")


def _add_code_args(p, *, with_profile=True):
    p.add_argument("--n0", type=int, default=1024, help="mother (layer-0) length")
    p.add_argument("--m", type=int, default=1088, help="transmitted length")
    p.add_argument("--k", type=int, default=900, help="payload bits (without CRC)")
    p.add_argument("--crc11", dest="crc11", action="store_true", default=True,
                   help="append CRC-11 (default)")
    p.add_argument("--no-crc", dest="crc11", action="store_false")
    if with_profile:
        p.add_argument("--profile", choices=("exhaustive", "greedy"), default="exhaustive")
    p.add_argument("--snr", type=float, default=3.0, help="design SNR in dB")
    p.add_argument("--snr-conv", choices=("es", "eb"), default="es")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deeppolar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="TOML or JSON file with flag values")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.set_defaults(func=func)
        return p

    _add_code_args(add("construct", cmd_construct, "design a layered code and write its JSON spec"))

    p = add("profile", cmd_profile, "rate-profile a layered code; write spec JSON and search grid")
    _add_code_args(p)
    p.add_argument("--grid-out", default=None, help="CSV of every evaluated split")

    for name, func, help_ in (("encode", cmd_encode, "encode payload frames (one per line)"),
                              ("decode", cmd_decode, "decode LLR or hard-bit frames")):
        p = add(name, func, help_)
        p.add_argument("--spec", required=True, help="spec JSON from construct/profile")
        p.add_argument("--in", dest="input", default=None, help="input file (default: stdin)")
        p.add_argument("--format", choices=("bin", "hex"), default="bin")
        if name == "decode":
            p.add_argument("--list", type=int, default=1)
            p.add_argument("--hard", action="store_true", help="input lines are codeword bits")
            p.add_argument("--connection-mode", choices=("dynamic", "free"), default="dynamic")

    p = add("dega", cmd_dega, "DEGA leaf means / backward means and error estimates")
    _add_code_args(p)
    p.add_argument("--spec", default=None, help="use this spec instead of designing one")

    p = add("simulate", cmd_simulate, "Monte Carlo BLER simulation")
    p.add_argument("--scheme", choices=("repeat", "puncture", "shorten", "deep", "none"),
                   default="deep")
    p.add_argument("--n0", type=int, default=None, help="mother length (derived from M if omitted)")
    p.add_argument("--m", type=int, required=False, default=1088)
    p.add_argument("--k", type=int, default=900)
    p.add_argument("--crc11", dest="crc11", action="store_true", default=True)
    p.add_argument("--no-crc", dest="crc11", action="store_false")
    p.add_argument("--list", type=int, default=1)
    p.add_argument("--double-list", action="store_true",
                   help="double the list size for repeat and deep")
    p.add_argument("--profile", choices=("exhaustive", "greedy"), default="exhaustive")
    p.add_argument("--snr-start", type=float, default=3.0)
    p.add_argument("--snr-stop", type=float, default=3.0)
    p.add_argument("--snr-step", type=float, default=0.5)
    p.add_argument("--snr-conv", choices=("es", "eb"), default="es")
    p.add_argument("--design-snr", type=float, default=None,
                   help="pin the construction SNR (default: each simulated point)")
    p.add_argument("--max-frames", type=int, default=1_000_000)
    p.add_argument("--min-errors", type=int, default=100)
    p.add_argument("--chunk", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--connection-mode", choices=("dynamic", "free"), default="dynamic")
    p.add_argument("--json", default=None, help="also write records as JSON here")
    p.add_argument("--gnuplot", default=None, help="write a gnuplot script here")

    add("bec-example", cmd_bec_example, "print the BEC(0.5) worked example")
    return parser


def _load_config(path: str) -> dict:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.endswith(".json"):
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a table of flag values")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _load_config(args.config)
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions} - {"help", "config"}
        aliases = {"in": "input", "crc": "crc11"}
        cfg = {aliases.get(k, k): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"deeppolar: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"deeppolar: error: {exc}", file=sys.stderr)
        return 2
    except (SpecError, InvalidDimensionError, ValueError, OSError, KeyError) as exc:
        print(f"deeppolar: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
