"""Erasure channels: sliding-window deterministic classes and Gilbert-Elliott.

Sequences are stored sparsely as sorted erased positions, so that 10^8-symbol
Gilbert-Elliott realisations with loss rates around 1% stay cheap.
"""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Sequence, TextIO

import numpy as np

CHUNK = 1 << 20  # good-state losses are drawn per chunk of this many symbols


@dataclass(frozen=True)
class ChannelSpec:
    kind: str  # "DET" or "GE"
    N: int = 0
    B: int = 0
    K: int = 0
    W: int = 0
    alpha: float = 0.0
    beta: float = 0.0
    eps: float = 0.0

    def __post_init__(self) -> None:
        if self.kind == "DET":
            if min(self.N, self.B, self.K) < 0 or self.W < 1:
                raise ValueError("deterministic channel needs non-negative N, B, K and W >= 1")
            if self.N > self.B + self.K:
                raise ValueError(f"need N <= B + K, got N={self.N}, B={self.B}, K={self.K}")
        elif self.kind == "GE":
            if not (0 < self.alpha <= 1 and 0 < self.beta <= 1 and 0 <= self.eps <= 1):
                raise ValueError("GE channel needs 0 < alpha, beta <= 1 and 0 <= eps <= 1")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")

    @classmethod
    def det(cls, N: int, B: int, K: int, W: int) -> "ChannelSpec":
        return cls("DET", N=N, B=B, K=K, W=W)

    @classmethod
    def c_i(cls, N: int, B: int, T: int) -> "ChannelSpec":
        return cls("DET", N=N, B=B, K=0, W=T + 1)

    @classmethod
    def c_ii(cls, B: int, T: int, N: int = 1) -> "ChannelSpec":
        return cls("DET", N=N, B=B, K=1, W=2 * T + B)

    @classmethod
    def ge(cls, alpha: float, beta: float, eps: float) -> "ChannelSpec":
        return cls("GE", alpha=float(alpha), beta=float(beta), eps=float(eps))

    def to_dict(self) -> dict:
        if self.kind == "GE":
            return {"kind": "GE", "alpha": self.alpha, "beta": self.beta, "eps": self.eps}
        return {"kind": "DET", "N": self.N, "B": self.B, "K": self.K, "W": self.W}


@dataclass(frozen=True, eq=False)
class ErasureSequence:
    length: int
    positions: np.ndarray  # sorted erased indices
    origin: str = "enumerated"
    seed: int | None = None
    bad_starts: np.ndarray | None = None  # GE bad-state sojourns, clipped to the sequence
    bad_lengths: np.ndarray | None = None

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.int64)
        if pos.size and (pos[0] < 0 or pos[-1] >= self.length or np.any(np.diff(pos) <= 0)):
            raise ValueError("positions must be strictly increasing and inside [0, length)")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def from_mask(cls, mask: Sequence[bool], origin: str = "enumerated") -> "ErasureSequence":
        m = np.asarray(mask, dtype=bool)
        return cls(len(m), np.flatnonzero(m), origin)

    @classmethod
    def from_positions(cls, length: int, positions) -> "ErasureSequence":
        return cls(length, np.unique(np.asarray(list(positions), dtype=np.int64)))

    def to_mask(self) -> np.ndarray:
        m = np.zeros(self.length, dtype=bool)
        m[self.positions] = True
        return m

    @property
    def erased(self) -> np.ndarray:
        return self.to_mask()

    def __len__(self) -> int:
        return self.length

    @property
    def n_erased(self) -> int:
        return int(self.positions.size)

    def runs(self) -> tuple[np.ndarray, np.ndarray]:
        """Maximal erased runs as (starts, lengths)."""
        pos = self.positions
        if pos.size == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        brk = np.flatnonzero(np.diff(pos) != 1) + 1
        starts_idx = np.concatenate([[0], brk])
        ends_idx = np.concatenate([brk, [pos.size]])
        return pos[starts_idx], ends_idx - starts_idx

    def padded(self, before: int, after: int) -> "ErasureSequence":
        return ErasureSequence(self.length + before + after, self.positions + before, self.origin, self.seed)

    # -- run-length CSV ---------------------------------------------------------------

    def write_rle_csv(self, fh: TextIO, header: dict | None = None) -> None:
        meta = {"length": self.length, "origin": self.origin, "seed": self.seed}
        meta.update(header or {})
        for key, val in meta.items():
            fh.write(f"# {key}={val}\n")
        fh.write("start,length\n")
        starts, lens = self.runs()
        for s, n in zip(starts.tolist(), lens.tolist()):
            fh.write(f"{s},{n}\n")

    def to_rle_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        self.write_rle_csv(buf, header)
        return buf.getvalue()

    @classmethod
    def read_rle_csv(cls, fh: TextIO) -> "ErasureSequence":
        meta: dict[str, str] = {}
        starts, lens = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
                continue
            if line.replace(" ", "") == "start,length":
                continue
            a, b = line.split(",")
            starts.append(int(a))
            lens.append(int(b))
        pos = np.concatenate([np.arange(s, s + n) for s, n in zip(starts, lens)]) if starts else np.zeros(0, np.int64)
        length = int(meta["length"]) if "length" in meta else (int(pos[-1]) + 1 if pos.size else 0)
        seed = meta.get("seed")
        return cls(length, np.unique(pos), meta.get("origin", "enumerated"),
                   None if seed in (None, "None", "") else int(seed))


# -- deterministic classes ----------------------------------------------------------


def window_admissible(erased_positions: Sequence[int], N: int, B: int, K: int) -> bool:
    """One window: <= N erasures, or one burst of <= B plus <= K others."""
    E = sorted(erased_positions)
    if len(E) <= N:
        return True
    best = 0
    run = 0
    prev = None
    for e in E:
        run = run + 1 if prev is not None and e == prev + 1 else 1
        best = max(best, min(run, B))
        prev = e
    return len(E) - best <= K


def validate(seq: ErasureSequence | Sequence[bool], spec: ChannelSpec) -> bool:
    if spec.kind != "DET":
        raise ValueError("validate needs a deterministic channel spec")
    if not isinstance(seq, ErasureSequence):
        seq = ErasureSequence.from_mask(seq)
    pos = seq.positions.tolist()
    if not pos:
        return True
    W = spec.W
    lo = 0
    hi = 0
    # every window [s, s+W-1] that intersects the erasures, including ones
    # hanging off either end of the sequence
    for s in range(pos[0] - W + 1, pos[-1] + 1):
        while lo < len(pos) and pos[lo] < s:
            lo += 1
        while hi < len(pos) and pos[hi] <= s + W - 1:
            hi += 1
        if not window_admissible(pos[lo:hi], spec.N, spec.B, spec.K):
            return False
    return True


def enumerate_ci_window(N: int, B: int, T: int) -> list[tuple[bool, ...]]:
    """All C_I(N, B) patterns of a window [0, T], deduplicated."""
    N = max(N, 1)
    if not N <= B <= T:
        raise ValueError(f"need N <= B <= T, got N={N}, B={B}, T={T}")
    L = T + 1
    seen: set[tuple[bool, ...]] = set()
    out: list[tuple[bool, ...]] = []

    def add(idx) -> None:
        pat = tuple(i in idx for i in range(L))
        if pat not in seen:
            seen.add(pat)
            out.append(pat)

    for j in range(N + 1):
        for sub in combinations(range(L), j):
            add(set(sub))
    for b in range(N + 1, B + 1):
        for s in range(0, L - b + 1):
            add(set(range(s, s + b)))
    return out


def ci_window_count(N: int, B: int, T: int) -> int:
    N = max(N, 1)
    return sum(T + 2 - b for b in range(N + 1, B + 1)) + sum(comb(T + 1, j) for j in range(N + 1))


def enumerate_cii_events(B: int, T: int) -> list[tuple[int, int, int | None]]:
    """(burst_start, burst_len, isolated_pos) with the burst canonically at 0."""
    if B < 1 or T < B:
        raise ValueError("need B >= 1 and T >= B")
    out: list[tuple[int, int, int | None]] = []
    for b in range(1, B + 1):
        for iso in list(range(-T, 0)) + list(range(b, b + T)):
            out.append((0, b, iso))
        out.append((0, b, None))
    return out


# -- Gilbert-Elliott ---------------------------------------------------------------------


def ge_loss_rate(spec: ChannelSpec, exact: bool = False) -> float | Fraction:
    """Stationary loss probability, computed on exact decimal rationals."""
    a, b, e = (Fraction(str(x)) for x in (spec.alpha, spec.beta, spec.eps))
    rate = b / (a + b) * e + a / (a + b)
    return rate if exact else float(rate)


def _bad_runs(alpha: float, beta: float, length: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Bad-state sojourns of a stationary two-state chain, clipped to [0, length)."""
    bad = rng.random() < alpha / (alpha + beta)
    cycle = 1.0 / alpha + 1.0 / beta
    batch = int(length / cycle * 1.1) + 16
    starts: list[np.ndarray] = []
    lens: list[np.ndarray] = []
    t = 0
    while t < length:
        if bad:
            # first bad sojourn, then alternate good/bad
            b0 = int(rng.geometric(beta))
            starts.append(np.array([t]))
            lens.append(np.array([b0]))
            t += b0
            bad = False
            continue
        g = rng.geometric(alpha, size=batch).astype(np.int64)
        b = rng.geometric(beta, size=batch).astype(np.int64)
        cyc = np.empty(2 * batch, dtype=np.int64)
        cyc[0::2] = g
        cyc[1::2] = b
        ends = t + np.cumsum(cyc)
        bstart = ends[0::2]
        starts.append(bstart)
        lens.append(b)
        t = int(ends[-1])
    if not starts:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    s = np.concatenate(starts)
    n = np.concatenate(lens)
    keep = s < length
    s, n = s[keep], n[keep]
    n = np.minimum(n, length - s)
    return s, n


def _good_losses(eps: float, lo: int, hi: int, seed: int, chunk: int) -> np.ndarray:
    if eps <= 0:
        return np.zeros(0, np.int64)
    rng = np.random.default_rng([seed, 1, chunk])
    size = hi - lo
    if eps >= 1:
        return np.arange(lo, hi, dtype=np.int64)
    pieces = []
    t = lo - 1
    est = int(size * eps * 1.2) + 16
    while True:
        gaps = rng.geometric(eps, size=est).astype(np.int64)
        pos = t + np.cumsum(gaps)
        pieces.append(pos[pos < hi])
        if pos[-1] >= hi:
            break
        t = int(pos[-1])
    return np.concatenate(pieces)


def ge_sample(spec: ChannelSpec, length: int, seed: int, threads: int = 1) -> ErasureSequence:
    """Sample a Gilbert-Elliott realisation.

    The state chain uses ``default_rng([seed, 0])``.  Good-state losses in chunk
    ``c`` (symbols [c*CHUNK, (c+1)*CHUNK)) use ``default_rng([seed, 1, c])``, so
    the result does not depend on ``threads``.
    """
    if spec.kind != "GE":
        raise ValueError("ge_sample needs a GE channel spec")
    if length < 1:
        raise ValueError("length must be positive")
    rng = np.random.default_rng([seed, 0])
    bs, bl = _bad_runs(spec.alpha, spec.beta, length, rng)
    nchunks = (length + CHUNK - 1) // CHUNK
    jobs = [(spec.eps, c * CHUNK, min(length, (c + 1) * CHUNK), seed, c) for c in range(nchunks)]
    if threads > 1 and nchunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            goods = list(ex.map(lambda a: _good_losses(*a), jobs))
    else:
        goods = [_good_losses(*a) for a in jobs]
    good = np.concatenate(goods) if goods else np.zeros(0, np.int64)
    if bl.size:
        total = int(bl.sum())
        offs = np.repeat(bs - np.concatenate([[0], np.cumsum(bl)[:-1]]), bl)
        bad_pos = offs + np.arange(total, dtype=np.int64)
    else:
        bad_pos = np.zeros(0, np.int64)
    pos = np.union1d(bad_pos, good)
    return ErasureSequence(length, pos, "sampled", seed, bs, bl)


def bad_state_runs(seq: ErasureSequence) -> np.ndarray:
    """Lengths of maximal erased runs that overlap a bad-state sojourn."""
    if seq.bad_starts is None:
        raise ValueError("sequence carries no channel-state information")
    starts, lens = seq.runs()
    if starts.size == 0:
        return np.zeros(0, np.int64)
    ends = starts + lens - 1
    bs = seq.bad_starts
    # every position of a sojourn is erased, so the run holding its first
    # symbol holds all of it
    flag = np.zeros(starts.size, dtype=bool)
    idx = np.searchsorted(starts, bs, side="right") - 1
    ok = (idx >= 0) & (bs <= ends[np.clip(idx, 0, None)])
    flag[idx[ok]] = True
    return lens[flag]

