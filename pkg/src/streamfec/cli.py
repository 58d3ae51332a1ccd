"""Command-line front end: ``streamfec {tradeoff,verify,simulate,classify}``.

Settings are resolved as command-line flag, then the matching table of the
``--config`` TOML file (``[tradeoff]``, ``[verify]``, ``[simulate]`` or
``[classify]``, keys spelled like the flags with underscores), then the
built-in default.  The simulation seed additionally falls back to the
``STREAMFEC_SEED`` environment variable before its default.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Sequence, TextIO

from . import analysis, channels, codes, decoders

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib
import tomli_w

SEED_ENV = "STREAMFEC_SEED"
MIN_LENGTH = 10_000


class UsageError(Exception):
    """Invalid flags or configuration (exit code 2)."""


@dataclass
class RunConfig:
    """Effective settings of one invocation; every field has a documented default."""

    subcommand: str
    family: str | None = None
    N: int | None = None
    B: int | None = None
    T: int | None = None
    delta: str | None = None
    rate: str | None = None
    pad_to_rate: str | None = None
    field_width: int = 16
    code_seed: int = 0
    mode: str = "exact"
    alpha: float | None = None
    beta: float | None = None
    eps_list: list[float] = field(default_factory=list)
    length: int | None = None
    seed: int = 1
    deadline: int | None = None
    trace: str | None = None
    out: str | None = None
    format: str = "csv"
    threads: int | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_toml(self) -> str:
        d = self.to_dict()
        sub = d.pop("subcommand")
        return tomli_w.dumps({sub: d})

    @classmethod
    def from_dict(cls, subcommand: str, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise UsageError(f"unknown configuration keys: {', '.join(sorted(extra))}")
        d = {k: v for k, v in d.items() if k != "subcommand"}
        for k, v in d.items():
            if v is not None and not _type_ok(_FIELD_TYPES[k], v):
                raise UsageError(f"configuration key {k!r} has the wrong type: {v!r}")
        return cls(subcommand=subcommand, **d)

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        doc = tomllib.loads(text)
        if len(doc) != 1:
            raise UsageError("expected exactly one subcommand table")
        (sub, d), = doc.items()
        return cls.from_dict(sub, d)

    def echo(self) -> dict:
        """Settings that determine the output of this subcommand."""
        keep = ECHO_KEYS.get(self.subcommand, ())
        return {k: v for k, v in self.to_dict().items() if k in keep}


_FIELD_TYPES = {
    "family": str, "N": int, "B": int, "T": int, "delta": str, "rate": str, "pad_to_rate": str,
    "field_width": int, "code_seed": int, "mode": str, "alpha": float, "beta": float,
    "eps_list": list, "length": int, "seed": int, "deadline": int, "trace": str, "out": str,
    "format": str, "threads": int,
}


def _type_ok(kind: type, v) -> bool:
    if isinstance(v, bool):
        return False
    if kind is float:
        return isinstance(v, (int, float))
    if kind is list:
        return isinstance(v, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
    return isinstance(v, kind)


_CODE_KEYS = ("family", "N", "B", "T", "delta", "rate", "pad_to_rate", "field_width", "code_seed")
# thread count and output path never change the bytes written
ECHO_KEYS = {
    "tradeoff": ("subcommand", "rate", "T", "format"),
    "verify": ("subcommand", *_CODE_KEYS, "mode"),
    "simulate": ("subcommand", *_CODE_KEYS, "alpha", "beta", "eps_list", "length", "seed", "deadline", "format"),
    "classify": ("subcommand", "trace", "T", "format"),
}


# -- argument parsing -----------------------------------------------------------


def _rational(text: str) -> str:
    try:
        r = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")
    return f"{r.numerator}/{r.denominator}"


def _eps_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _code_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=[f.value for f in codes.Family],
                   help="code family (mds is the Strongly-MDS baseline)")
    p.add_argument("--n", dest="N", type=int, help="isolated erasures per window (N)")
    p.add_argument("--b", dest="B", type=int, help="burst length (B)")
    p.add_argument("--t", dest="T", type=int, help="decoding delay (T)")
    p.add_argument("--delta", help="PRC shift, an integer or 'auto' (default auto)")
    p.add_argument("--rate", type=_rational, help="baseline rate p/q (default: smallest rate reaching B)")
    p.add_argument("--pad-to-rate", dest="pad_to_rate", type=_rational,
                   help="pad the layout with inert sub-symbols down to this rate")
    p.add_argument("--field-width", dest="field_width", type=int, choices=[8, 16, 32],
                   help="GF(2^w) word size (default 16)")
    p.add_argument("--code-seed", dest="code_seed", type=int,
                   help="seed of the random code construction (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamfec", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_, description=help_, allow_abbrev=False,
                           argument_default=None)
        p.add_argument("--config", help="TOML file with a table named after the subcommand")
        return p

    p = add("tradeoff", "write the N-versus-B tradeoff curves for rate R and delay T")
    p.add_argument("--rate", type=_rational, help="code rate p/q")
    p.add_argument("--delay", dest="T", type=int, help="decoding delay T")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")

    p = add("verify", "check a code on every admissible pattern of its channel class")
    _code_flags(p)
    p.add_argument("--mode", choices=["exact", "ideal"],
                   help="exact: GF(2^w) decoding with value checks; ideal: pattern-level model (default exact)")

    p = add("simulate", "residual loss of a code over a Gilbert-Elliott channel")
    _code_flags(p)
    p.add_argument("--alpha", type=float, help="good-to-bad transition probability")
    p.add_argument("--beta", type=float, help="bad-to-good transition probability")
    p.add_argument("--eps-list", dest="eps_list", type=_eps_list,
                   help="comma-separated good-state loss probabilities")
    p.add_argument("--len", dest="length", type=int, help=f"symbols per run (at least {MIN_LENGTH})")
    p.add_argument("--seed", type=int, help=f"channel seed (default ${SEED_ENV}, else 1)")
    p.add_argument("--deadline", type=int, help="decoding deadline (default T)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")
    p.add_argument("--threads", type=int, help="sampler threads (default: available cores); output does not depend on it")

    p = add("classify", "classify the bursts of an erasure trace")
    p.add_argument("--trace", help="trace file: run-length CSV (start,length) or a 0/1 string")
    p.add_argument("--delay", dest="T", type=int, help="window T used by the classes")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")
    return parser


def resolve(args: argparse.Namespace, environ: dict | None = None) -> RunConfig:
    """Merge flags over the TOML table over defaults."""
    environ = os.environ if environ is None else environ
    merged: dict = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        table = doc.get(args.subcommand, {})
        if not isinstance(table, dict):
            raise UsageError(f"[{args.subcommand}] must be a table")
        merged.update(table)
    for k, v in vars(args).items():
        if k not in ("config", "subcommand") and v is not None:
            merged[k] = v
    if "seed" not in merged and environ.get(SEED_ENV):
        try:
            merged["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer")
    try:
        if isinstance(merged.get("eps_list"), str):
            merged["eps_list"] = _eps_list(merged["eps_list"])
        for key in ("rate", "pad_to_rate"):
            if isinstance(merged.get(key), (str, int, float)) and not isinstance(merged[key], bool):
                merged[key] = _rational(str(merged[key]))
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc))
    if isinstance(merged.get("delta"), int) and not isinstance(merged["delta"], bool):
        merged["delta"] = str(merged["delta"])
    return RunConfig.from_dict(args.subcommand, merged)


# -- subcommands -----------------------------------------------------------------


def _spec(cfg: RunConfig) -> codes.CodeSpec:
    if cfg.family is None or cfg.T is None:
        raise UsageError("--family and --t are required")
    delta = cfg.delta
    if delta is not None and delta.lower() != "auto":
        try:
            delta = int(delta)
        except ValueError:
            raise UsageError(f"--delta must be an integer or 'auto', got {delta!r}")
    return codes.spec_from_params(cfg.family, T=cfg.T, B=cfg.B, N=cfg.N, delta=delta, rate=cfg.rate,
                                  pad_to_rate=cfg.pad_to_rate, field_width=cfg.field_width,
                                  seed=cfg.code_seed)


def _emit(cfg: RunConfig, text: str, stdout: TextIO) -> None:
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def cmd_tradeoff(cfg: RunConfig, stdout: TextIO) -> int:
    if cfg.rate is None or cfg.T is None:
        raise UsageError("--rate and --delay are required")
    R = Fraction(cfg.rate)
    if not 0 < R < 1:
        raise UsageError("rate must satisfy 0 < R < 1")
    if cfg.T < 1:
        raise UsageError("delay must satisfy T >= 1")
    points = analysis.tradeoff_curves(R, cfg.T)
    if cfg.format == "json":
        text = analysis.tradeoff_json(points, cfg.echo()) + "\n"
    else:
        buf = io.StringIO()
        analysis.write_tradeoff_csv(points, buf, cfg.echo())
        text = buf.getvalue()
    _emit(cfg, text, stdout)
    return 0


def _pattern_str(p: Sequence[bool]) -> str:
    return "".join("X" if e else "." for e in p)


def cmd_verify(cfg: RunConfig, stdout: TextIO) -> int:
    spec = _spec(cfg)
    target = spec if cfg.mode == "ideal" else codes.build_codec(spec)
    print(f"# config: {json.dumps(cfg.echo(), sort_keys=True)}", file=stdout)
    print(f"code {spec.label()} n={spec.n} k={spec.k}", file=stdout)
    failures = 0
    if spec.family is codes.Family.PRC:
        # guarantee: at most one symbol missed per burst-plus-isolated event
        by_class: dict[str, list[int]] = {}
        first_bad = unexpected = None
        for _, b, iso in channels.enumerate_cii_events(spec.B, spec.T):
            out = decoders.decode_prc_event(target, 0, b, iso, mode=cfg.mode)
            stats = by_class.setdefault(out.case, [0, 0, 0])
            stats[0] += 1
            stats[1] += len(out.missed)
            if len(out.missed) > 1:
                stats[2] += 1
                failures += 1
                first_bad = first_bad or (b, iso, out.missed)
            expect = decoders.prc_predicted_loss(spec, b, iso)
            if out.missed and out.missed != [expect]:
                unexpected = unexpected or (b, iso, out.missed)
        for case in sorted(by_class):
            n, lost, bad = by_class[case]
            print(f"{'PASS' if not bad else 'FAIL'} class={case} events={n} lost={lost}", file=stdout)
        if unexpected:
            b, iso, missed = unexpected
            print(f"note: loss outside the predicted window: burst=[0,{b - 1}] isolated={iso} missed={missed}",
                  file=stdout)
        if first_bad:
            b, iso, missed = first_bad
            print(f"counterexample: burst=[0,{b - 1}] isolated={iso} missed={missed}", file=stdout)
    else:
        N = cfg.N if cfg.N is not None else spec.N
        B = cfg.B if cfg.B is not None else spec.B
        classes = {"burst": [0, 0], "isolated": [0, 0]}
        first_bad = None
        for pat in channels.enumerate_ci_window(N, B, spec.T):
            er = [i for i, e in enumerate(pat) if e]
            cls = "burst" if er and er[-1] - er[0] + 1 == len(er) and len(er) > 1 else "isolated"
            out, _ = decoders.run_pattern(target, pat, mode=cfg.mode)
            classes[cls][0] += 1
            if out.missed:
                classes[cls][1] += 1
                failures += 1
                if first_bad is None:
                    first_bad = (pat, out.missed)
        for cls, (n, bad) in classes.items():
            print(f"{'PASS' if not bad else 'FAIL'} class={cls} N={N} B={B} patterns={n} failed={bad}",
                  file=stdout)
        if first_bad:
            pat, missed = first_bad
            print(f"counterexample: pattern={_pattern_str(pat)} missed={missed}", file=stdout)
    print("PASS" if not failures else f"FAIL ({failures} patterns)", file=stdout)
    return 0 if not failures else 1


def cmd_simulate(cfg: RunConfig, stdout: TextIO) -> int:
    spec = _spec(cfg)
    if cfg.alpha is None or cfg.beta is None or not cfg.eps_list:
        raise UsageError("--alpha, --beta and --eps-list are required")
    if cfg.length is None or cfg.length < MIN_LENGTH:
        raise UsageError(f"--len must be at least {MIN_LENGTH}")
    if cfg.deadline is not None and cfg.deadline < 0:
        raise UsageError("--deadline must be non-negative")
    threads = cfg.threads or os.cpu_count() or 1
    if threads < 1:
        raise UsageError("--threads must be positive")
    decoder = analysis.EventDecoder(spec, cfg.deadline)
    reports = []
    for eps in cfg.eps_list:
        try:
            ch = channels.ChannelSpec.ge(cfg.alpha, cfg.beta, eps)
        except ValueError as exc:
            raise UsageError(str(exc))
        reports.append(analysis.run_simulation(spec, ch, cfg.length, cfg.seed, cfg.deadline,
                                               decoder=decoder, threads=threads))
    if cfg.format == "json":
        text = analysis.simreport_json(reports, cfg.echo()) + "\n"
    else:
        buf = io.StringIO()
        analysis.write_simreport_csv(reports, buf, cfg.echo())
        text = buf.getvalue()
    _emit(cfg, text, stdout)
    return 0


def read_trace(path: str) -> channels.ErasureSequence:
    """Run-length CSV as written by ``ErasureSequence.write_rle_csv``, or a 0/1 string."""
    with open(path) as fh:
        text = fh.read()
    body = "".join(line for line in text.splitlines() if not line.startswith("#")).strip()
    if body and set(body) <= set("01 \t"):
        bits = [c == "1" for c in body if c in "01"]
        return channels.ErasureSequence.from_mask(bits, origin="trace")
    return channels.ErasureSequence.read_rle_csv(io.StringIO(text))


def cmd_classify(cfg: RunConfig, stdout: TextIO) -> int:
    if cfg.trace is None or cfg.T is None:
        raise UsageError("--trace and --delay are required")
    try:
        seq = read_trace(cfg.trace)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read trace {cfg.trace}: {exc}")
    counts = analysis.classify_bursts(seq, cfg.T)
    fracs = analysis.class_fractions(counts)
    hist = analysis.burst_histogram(seq)
    if cfg.format == "json":
        doc = {"schema_version": analysis.SCHEMA_VERSION, "config": cfg.echo(),
               "symbols": seq.length, "erased": seq.n_erased,
               "classes": {c.value: {"count": counts[c], "fraction": fracs[c]} for c in analysis.BurstClass},
               "histogram": [{"length": k, "count": v} for k, v in sorted(hist.items())]}
        text = json.dumps(doc, indent=1) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# config: {json.dumps(cfg.echo(), sort_keys=True)}\n")
        buf.write("class,count,fraction\n")
        for c in analysis.BurstClass:
            buf.write(f"{c.value},{counts[c]},{fracs[c]:.6f}\n")
        text = buf.getvalue()
    _emit(cfg, text, stdout)
    return 0


COMMANDS = {"tradeoff": cmd_tradeoff, "verify": cmd_verify, "simulate": cmd_simulate,
            "classify": cmd_classify}


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None,
         environ: dict | None = None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args, environ)
        return COMMANDS[cfg.subcommand](cfg, stdout)
    except (UsageError, codes.InvalidParams) as exc:
        print(f"streamfec {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
