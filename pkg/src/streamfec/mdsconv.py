"""Systematic (n, k, m) convolutional codes and exact recoverability checks.

A code maps source symbols s[i] (k sub-symbols) to channel symbols
x[i] = (s[i], p[i]) with p[i] = sum_{t=1..m} s[i-t] H_t.  Recoverability of
an erasure pattern is decided by exact rank computations over the field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .gf import GF

DEFAULT_FIELD = GF(16)
MAX_RETRIES = 32


class RetryExhausted(RuntimeError):
    """No random draw passed verification within the retry budget."""


@dataclass(frozen=True, eq=False)
class ConvCode:
    n: int
    k: int
    m: int
    H: np.ndarray  # shape (m, k, n - k); H[t - 1] multiplies s[i - t]
    gf: GF = DEFAULT_FIELD
    seed: int | None = None
    attempt: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.k < self.n:
            raise ValueError(f"need 0 < k < n, got n={self.n}, k={self.k}")
        if self.m < 1:
            raise ValueError("memory must be at least 1")
        H = np.asarray(self.H, dtype=self.gf.dtype)
        if H.shape != (self.m, self.k, self.n - self.k):
            raise ValueError(f"H has shape {H.shape}, expected {(self.m, self.k, self.n - self.k)}")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    @property
    def redundancy(self) -> int:
        return self.n - self.k

    def parity(self, sources: np.ndarray) -> np.ndarray:
        """Parity stream p[0..L-1] for a source stream of shape (L, k)."""
        S = np.asarray(sources, dtype=self.gf.dtype)
        L = S.shape[0]
        P = self.gf.zeros((L, self.redundancy))
        for t in range(1, min(self.m, L - 1) + 1):
            P[t:] ^= self.gf.matmul(S[:-t], self.H[t - 1])
        return P

    def encode(self, sources: np.ndarray) -> np.ndarray:
        S = np.asarray(sources, dtype=self.gf.dtype)
        return np.concatenate([S, self.parity(S)], axis=1)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        width = (self.gf.w + 3) // 4
        return {
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "w": self.gf.w,
            "poly": hex(self.gf.poly),
            "seed": self.seed,
            "attempt": self.attempt,
            "H": [[" ".join(f"{int(x):0{width}x}" for x in row) for row in Ht] for Ht in self.H],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "ConvCode":
        gf = GF(int(d["w"]), int(d["poly"], 16) if isinstance(d["poly"], str) else int(d["poly"]))
        H = np.array(
            [[[int(x, 16) for x in row.split()] if row else [] for row in Ht] for Ht in d["H"]],
            dtype=gf.dtype,
        ).reshape(int(d["m"]), int(d["k"]), int(d["n"]) - int(d["k"]))
        return cls(int(d["n"]), int(d["k"]), int(d["m"]), H, gf, d.get("seed"), int(d.get("attempt", 0)))

    @classmethod
    def from_json(cls, text: str) -> "ConvCode":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TruncatedGenerator:
    j: int
    matrix: np.ndarray


def truncated_generator(code: ConvCode, j: int) -> TruncatedGenerator:
    """Block upper-triangular generator of the first j+1 channel symbols."""
    if j < 0:
        raise ValueError("j must be non-negative")
    k, n, gf = code.k, code.n, code.gf
    G = gf.zeros(((j + 1) * k, (j + 1) * n))
    for r in range(j + 1):
        G[r * k:(r + 1) * k, r * n:r * n + k] = gf.eye(k)
        for t in range(1, min(code.m, j - r) + 1):
            c = r + t
            G[r * k:(r + 1) * k, c * n + k:(c + 1) * n] = code.H[t - 1]
    return TruncatedGenerator(j, G)


@dataclass(frozen=True)
class Target:
    """A recoverability requirement used to certify a random draw.

    ``pattern`` marks erased channel symbols in the window [0, deadline].
    ``symbols`` lists the erased indices that must be determined (None means
    all of them).  ``parity_mask`` optionally restricts, per time index, which
    parity columns are usable.
    """

    pattern: tuple[bool, ...]
    deadline: int
    symbols: tuple[int, ...] | None = None
    parity_mask: tuple[tuple[bool, ...], ...] | None = None

    @classmethod
    def of(cls, erased: Iterable[int], deadline: int, symbols: Iterable[int] | None = None,
           parity_mask=None) -> "Target":
        pat = [False] * (deadline + 1)
        for e in erased:
            if 0 <= e <= deadline:
                pat[e] = True
        syms = None if symbols is None else tuple(symbols)
        mask = None if parity_mask is None else tuple(tuple(bool(x) for x in row) for row in parity_mask)
        return cls(tuple(pat), deadline, syms, mask)


def window_system(code: ConvCode, erased: Sequence[int], rows: Sequence[tuple[int, np.ndarray]]) -> np.ndarray:
    """Coefficient matrix linking available parities to erased source symbols.

    ``rows`` holds (time, parity-column indices) pairs.  Column block ``b``
    belongs to source symbol ``erased[b]``.
    """
    k = code.k
    nrows = sum(len(cs) for _, cs in rows)
    A = code.gf.zeros((nrows, len(erased) * k))
    r0 = 0
    for j, cs in rows:
        cs = np.asarray(cs, dtype=np.intp)
        for b, e in enumerate(erased):
            lag = j - e
            if 1 <= lag <= code.m:
                A[r0:r0 + len(cs), b * k:(b + 1) * k] = code.H[lag - 1][:, cs].T
        r0 += len(cs)
    return A


def determined_symbols(code: ConvCode, pattern: Sequence[bool], deadline: int,
                       parity_mask=None) -> set[int]:
    """Erased indices in [0, deadline] whose source symbol is pinned down.

    Symbols before the window start count as known.  Only channel symbols up
    to ``deadline`` are used.
    """
    erased = [i for i in range(deadline + 1) if pattern[i]]
    if not erased:
        return set()
    full = np.arange(code.redundancy)
    rows = []
    for j in range(erased[0] + 1, deadline + 1):
        if pattern[j]:
            continue
        cols = full if parity_mask is None else full[np.asarray(parity_mask[j], dtype=bool)]
        if len(cols):
            rows.append((j, cols))
    A = window_system(code, erased, rows)
    mask, _ = code.gf.determined(A)
    k = code.k
    return {e for b, e in enumerate(erased) if mask[b * k:(b + 1) * k].all()}


def recoverable(code: ConvCode, pattern: Sequence[bool], symbol_index: int, deadline: int,
                parity_mask=None) -> bool:
    """True iff s[symbol_index] is determined by the unerased symbols up to ``deadline``."""
    if not 0 <= symbol_index <= deadline < len(pattern):
        raise ValueError("need 0 <= symbol_index <= deadline < len(pattern)")
    if not pattern[symbol_index]:
        return True
    return symbol_index in determined_symbols(code, pattern, deadline, parity_mask)


def meets_target(code: ConvCode, target: Target) -> bool:
    got = determined_symbols(code, target.pattern, target.deadline, target.parity_mask)
    want = target.symbols
    if want is None:
        want = [i for i in range(target.deadline + 1) if target.pattern[i]]
    return all((not target.pattern[i]) or i in got for i in want)


def gen_strongly_mds(n: int, k: int, m: int, targets: Sequence[Target] = (), seed: int = 0,
                     gf: GF | None = None, max_retries: int = MAX_RETRIES) -> ConvCode:
    """Draw H_1..H_m at random until every target is met.

    Attempt ``a`` uses ``default_rng([seed, a])``, so the result is a pure
    function of the arguments.  An empty target list returns the first draw.
    """
    gf = gf or DEFAULT_FIELD
    if not 0 < k < n or m < 1:
        raise ValueError(f"invalid code shape ({n}, {k}, {m})")
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        H = gf.random(rng, (m, k, n - k))
        code = ConvCode(n, k, m, H, gf, seed, attempt)
        if all(meets_target(code, t) for t in targets):
            return code
    raise RetryExhausted(f"no ({n},{k},{m}) code met all {len(targets)} targets in {max_retries} draws")


def check_p2_periodic(code: ConvCode, B: int, j: int, periods: int = 3) -> bool:
    """Bursts of B followed by j+1-B clear symbols, repeated; every erased
    symbol must be recovered within j symbols given everything before it."""
    if B == 0:
        return True
    period = j + 1
    total = periods * period + j
    pattern = [False] * total
    for p in range(periods):
        for b in range(B):
            pattern[p * period + b] = True
    for i in range(periods * period):
        if pattern[i] and not recoverable(code, pattern[i:i + j + 1], 0, j):
            return False
    return True


def check_two_bursts(code: ConvCode, B1: int, B2: int, r: int, j: int) -> bool:
    """Bursts [0, B1-1] and [r, r+B2-1] all recovered using symbols up to j."""
    if r < B1:
        raise ValueError("second burst must start at or after the end of the first")
    erased = list(range(B1)) + list(range(r, r + B2))
    return meets_target(code, Target.of(erased, j))


def column_distance_lb(n: int, k: int, j: int) -> int:
    if not 0 < k < n:
        raise ValueError("need 0 < k < n")
    return ((n - k) * (j + 1)) // n + 1


def p1_targets(m: int, n_erasures: int, span: int) -> list[Target]:
    """s[0] recoverable from any pattern of <= n_erasures in [0, span-1]."""
    from itertools import combinations

    out = []
    for size in range(0, n_erasures):
        for rest in combinations(range(1, span), size):
            out.append(Target.of((0,) + rest, span - 1, symbols=(0,)))
    return out


def burst_targets(max_burst: int, span: int) -> list[Target]:
    """Every burst [0, b-1], b <= max_burst, fully recovered by span-1."""
    return [Target.of(range(b), span - 1) for b in range(1, max_burst + 1)]
