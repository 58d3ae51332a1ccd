"""Tradeoff curves, channel simulations and burst statistics.

Simulation works on erasure events rather than on every symbol.  Two erasures
more than T apart cannot interact: every parity that involves the earlier one
is sent before the later one, so the stream splits into independent clusters.
Each cluster is decoded once per distinct shape and the result is memoised.
"""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, TextIO

import numpy as np

from .channels import ChannelSpec, ErasureSequence, ge_sample
from .codes import Codec, CodeSpec
from .decoders import run_pattern

SCHEMA_VERSION = 1


class Source(str, Enum):
    UPPER_BOUND = "UPPER_BOUND"
    MIDAS = "MIDAS"
    MS = "MS"
    BASELINE_MDS = "BASELINE_MDS"
    ERLC = "ERLC"


class BurstClass(str, Enum):
    BURST_ONLY = "BURST_ONLY"
    BURST_PLUS_ISOLATED = "BURST_PLUS_ISOLATED"
    BURST_PLUS_MULTI = "BURST_PLUS_MULTI"
    GAP_LT_T = "GAP_LT_T"


# -- tradeoff -------------------------------------------------------------------------


@dataclass(frozen=True)
class TradeoffPoint:
    R: Fraction
    T: int
    B: int
    N: int
    source: Source


def _floor(x: Fraction) -> int:
    return math.floor(x)


def bound_n(R: Fraction, T: int, B: int) -> int:
    """Largest N allowed by the rate bound together with N <= B."""
    return min(B, _floor(T + 1 - R / (1 - R) * B))


def midas_n(R: Fraction, T: int, B: int) -> int:
    return min(B, _floor(T - R / (1 - R) * B))


def erlc_points(R: Fraction, T: int) -> list[tuple[int, int]]:
    """(B, N) pairs reachable by E-RLC codes; defined for R >= 1/2 only."""
    if R < Fraction(1, 2):
        return []
    y = (1 - R) / R
    lo = math.ceil(R * (T + 1))
    return [(_floor(y * d), _floor(y * (T - d))) for d in range(lo, T)]


def erlc_rate_ok(R: Fraction, T: int, B: int, N: int) -> bool:
    return R / (1 - R) * (B + N - 1) >= T


def tradeoff_curves(R: Fraction | str, T: int) -> list[TradeoffPoint]:
    """Achievable (B, N) curves at rate R and delay T, floors applied.

    The bound row at B = 0 carries the intercept T + 1 of the rate bound; from
    B = 1 on the bound also respects N <= B.
    """
    from .codes import parse_rational

    R = parse_rational(R)
    if not 0 < R < 1:
        raise ValueError("rate must lie in (0, 1)")
    x = R / (1 - R)
    pts: list[TradeoffPoint] = [TradeoffPoint(R, T, 0, T + 1, Source.UPPER_BOUND)]
    for B in range(1, T + 1):
        n = bound_n(R, T, B)
        if n < 0:
            break
        pts.append(TradeoffPoint(R, T, B, n, Source.UPPER_BOUND))
    for B in range(1, T + 1):
        n = midas_n(R, T, B)
        if n < 1:
            break
        pts.append(TradeoffPoint(R, T, B, n, Source.MIDAS))
    pts.append(TradeoffPoint(R, T, _floor(T * min(1 / R - 1, Fraction(1))), 1, Source.MS))
    nb = _floor((1 - R) * (T + 1))
    pts.append(TradeoffPoint(R, T, nb, nb, Source.BASELINE_MDS))
    for B, N in erlc_points(R, T):
        pts.append(TradeoffPoint(R, T, B, N, Source.ERLC))
    assert all(p.N <= T + 1 - x * p.B or p.B == 0 for p in pts)
    return pts


# -- burst statistics ------------------------------------------------------------------


def classify_bursts(seq: ErasureSequence, T: int, threshold: int = 2) -> dict[BurstClass, int]:
    """Classify every burst (run of length >= threshold) by its neighbourhood.

    Isolated erasures are those in shorter runs.  A burst whose predecessor
    ended fewer than T symbols earlier is GAP_LT_T; otherwise it is counted by
    the isolated erasures within T before its start and T after its end.
    """
    starts, lens = seq.runs()
    counts = {c: 0 for c in BurstClass}
    if starts.size == 0:
        return counts
    is_burst = lens >= threshold
    bs, bl = starts[is_burst], lens[is_burst]
    if bs.size == 0:
        return counts
    short_s, short_l = starts[~is_burst], lens[~is_burst]
    iso = np.repeat(short_s, short_l) + (np.arange(int(short_l.sum())) -
                                        np.repeat(np.cumsum(short_l) - short_l, short_l))
    be = bs + bl - 1
    before = np.searchsorted(iso, bs, side="left") - np.searchsorted(iso, bs - T, side="left")
    after = np.searchsorted(iso, be + T, side="right") - np.searchsorted(iso, be, side="right")
    n_iso = before + after
    gap = np.zeros(bs.size, dtype=bool)
    gap[1:] = bs[1:] - be[:-1] < T
    counts[BurstClass.GAP_LT_T] = int(gap.sum())
    rest = ~gap
    counts[BurstClass.BURST_ONLY] = int((rest & (n_iso == 0)).sum())
    counts[BurstClass.BURST_PLUS_ISOLATED] = int((rest & (n_iso == 1)).sum())
    counts[BurstClass.BURST_PLUS_MULTI] = int((rest & (n_iso >= 2)).sum())
    return counts


def class_fractions(counts: dict[BurstClass, int]) -> dict[BurstClass, float]:
    total = sum(counts.values())
    return {c: (counts[c] / total if total else 0.0) for c in BurstClass}


def burst_histogram(seq: ErasureSequence) -> dict[int, int]:
    _, lens = seq.runs()
    return dict(sorted(Counter(lens.tolist()).items()))


def loss_rate_stderr(seq: ErasureSequence, batches: int = 100) -> float:
    """Standard error of the empirical loss rate by batch means."""
    edges = np.linspace(0, seq.length, batches + 1).astype(np.int64)
    counts = np.diff(np.searchsorted(seq.positions, edges))
    rates = counts / np.diff(edges)
    return float(rates.std(ddof=1) / math.sqrt(batches))


# -- simulation -------------------------------------------------------------------------


@dataclass
class SimReport:
    code: str
    channel: dict
    symbols_simulated: int
    erased_symbols: int
    lost_symbols: int
    late_symbols: int
    residual_loss_rate: float
    classes: dict[str, int]
    histogram: dict[int, int]
    seed: int | None
    deadline: int
    distinct_events: int = 0

    @property
    def overall_loss_rate(self) -> float:
        return self.erased_symbols / self.symbols_simulated

    def merge(self, other: "SimReport") -> "SimReport":
        if (self.code, self.channel, self.deadline) != (other.code, other.channel, other.deadline):
            raise ValueError("can only merge reports of the same code, channel and deadline")
        hist = Counter(self.histogram)
        hist.update(other.histogram)
        n = self.symbols_simulated + other.symbols_simulated
        lost = self.lost_symbols + other.lost_symbols
        return SimReport(self.code, self.channel, n, self.erased_symbols + other.erased_symbols, lost,
                         self.late_symbols + other.late_symbols, lost / n,
                         {k: self.classes.get(k, 0) + other.classes.get(k, 0) for k in set(self.classes) | set(other.classes)},
                         dict(sorted(hist.items())), self.seed, self.deadline,
                         self.distinct_events + other.distinct_events)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["overall_loss_rate"] = self.overall_loss_rate
        d["histogram"] = {str(k): v for k, v in self.histogram.items()}
        return d


def clusters(positions: np.ndarray, gap: int) -> list[np.ndarray]:
    """Split sorted positions wherever consecutive erasures are more than ``gap`` apart."""
    if positions.size == 0:
        return []
    cut = np.flatnonzero(np.diff(positions) > gap) + 1
    return np.split(positions, cut)


class EventDecoder:
    """Memoised per-cluster decoding for one code and deadline."""

    def __init__(self, code: CodeSpec | Codec, deadline: int | None = None, mode: str = "ideal"):
        self.code = code
        self.spec = code.spec if isinstance(code, Codec) else code
        self.deadline = self.spec.T if deadline is None else deadline
        self.mode = mode
        self.memo: dict[tuple[int, ...], tuple[int, int]] = {}

    def __call__(self, offsets: tuple[int, ...]) -> tuple[int, int]:
        """(missed, late) symbol counts for a cluster given as offsets from its first erasure."""
        hit = self.memo.get(offsets)
        if hit is not None:
            return hit
        pattern = [False] * (offsets[-1] + 1)
        for o in offsets:
            pattern[o] = True
        out, _ = run_pattern(self.code, pattern, mode=self.mode, deadline=self.deadline)
        missed = out.missed
        res = (len(missed), len(missed) - len(out.lost))
        self.memo[offsets] = res
        return res


def decode_sequence(decoder: EventDecoder, seq: ErasureSequence) -> tuple[int, int]:
    lost = late = 0
    for cl in clusters(seq.positions, decoder.spec.T):
        m, l = decoder(tuple((cl - cl[0]).tolist()))
        lost += m
        late += l
    return lost, late


def run_simulation(code: CodeSpec | Codec, channel: ChannelSpec, length: int, seed: int,
                   deadline: int | None = None, seq: ErasureSequence | None = None,
                   decoder: EventDecoder | None = None, threads: int = 1,
                   classify_T: int | None = None) -> SimReport:
    """Residual loss of ``code`` on a Gilbert-Elliott realisation.

    Pass ``seq`` to reuse one realisation across codes (paired comparison) and
    ``decoder`` to share the event memo across runs of the same code.
    """
    if length < 1:
        raise ValueError("length must be positive")
    spec = code.spec if isinstance(code, Codec) else code
    if seq is None:
        seq = ge_sample(channel, length, seed, threads=threads)
    elif seq.length != length:
        raise ValueError("sequence length does not match")
    if decoder is None:
        decoder = EventDecoder(code, deadline)
    lost, late = decode_sequence(decoder, seq)
    T_cls = spec.T if classify_T is None else classify_T
    classes = {c.value: n for c, n in classify_bursts(seq, T_cls).items()}
    return SimReport(spec.label(), channel.to_dict(), length, seq.n_erased, lost, late, lost / length,
                     classes, burst_histogram(seq), seed, decoder.deadline, len(decoder.memo))


# -- output ---------------------------------------------------------------------------------


def _header(fh: TextIO, config: dict | None) -> None:
    if config:
        fh.write("# config: " + json.dumps(config, sort_keys=True, default=str) + "\n")


def write_tradeoff_csv(points: Iterable[TradeoffPoint], fh: TextIO, config: dict | None = None) -> None:
    _header(fh, config)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["R", "T", "source", "B", "N"])
    for p in points:
        w.writerow([f"{p.R.numerator}/{p.R.denominator}", p.T, p.source.value, p.B, p.N])


def tradeoff_json(points: Iterable[TradeoffPoint], config: dict | None = None) -> str:
    rows = [{"R": f"{p.R.numerator}/{p.R.denominator}", "T": p.T, "source": p.source.value, "B": p.B, "N": p.N}
            for p in points]
    return json.dumps({"schema_version": SCHEMA_VERSION, "config": config or {}, "points": rows}, indent=1)


SIM_COLUMNS = ["eps", "code", "residual_loss", "lost", "late", "erased", "symbols", "loss_rate",
               *[c.value for c in BurstClass]]


def write_simreport_csv(reports: Iterable[SimReport], fh: TextIO, config: dict | None = None) -> None:
    _header(fh, config)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SIM_COLUMNS)
    for r in reports:
        w.writerow([r.channel.get("eps"), r.code, f"{r.residual_loss_rate:.6e}", r.lost_symbols, r.late_symbols,
                    r.erased_symbols, r.symbols_simulated, f"{r.overall_loss_rate:.6e}",
                    *[r.classes.get(c.value, 0) for c in BurstClass]])


def simreport_json(reports: Iterable[SimReport], config: dict | None = None) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, "config": config or {},
                       "reports": [r.to_dict() for r in reports]}, indent=1, sort_keys=True)


def write_hist_csv(hist: dict[int, int], fh: TextIO, config: dict | None = None) -> None:
    _header(fh, config)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["length", "count"])
    for k, v in sorted(hist.items()):
        w.writerow([k, v])


def hist_json(hist: dict[int, int], config: dict | None = None) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, "config": config or {},
                       "histogram": [{"length": k, "count": v} for k, v in sorted(hist.items())]}, indent=1)
