"""Arithmetic and dense linear algebra over GF(2^w).

Field elements are plain integers; vectors and matrices are numpy integer
arrays.  Every function accepts scalars or arrays and broadcasts like numpy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_POLYS = {8: 0x11D, 16: 0x1100B, 32: 0x1_0000_008D}


class Unsolvable(ValueError):
    """Raised when an erasure system does not pin down every unknown."""


@dataclass(frozen=True, eq=False)
class GF:
    """GF(2^w) with a fixed reduction polynomial.

    Uses log/antilog tables for w <= 16 and a vectorised carry-less multiply
    for w = 32.  Instances are immutable and safe to share between threads.
    """

    w: int = 16
    poly: int | None = None
    _exp: np.ndarray | None = field(default=None, init=False, repr=False)
    _log: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.w not in DEFAULT_POLYS:
            raise ValueError(f"field width must be one of {sorted(DEFAULT_POLYS)}, got {self.w}")
        if self.poly is None:
            object.__setattr__(self, "poly", DEFAULT_POLYS[self.w])
        if self.poly >> self.w != 1:
            raise ValueError(f"reduction polynomial {self.poly:#x} is not of degree {self.w}")
        if self.w <= 16:
            exp, log = _tables(self.w, self.poly)
            object.__setattr__(self, "_exp", exp)
            object.__setattr__(self, "_log", log)

    @property
    def order(self) -> int:
        return 1 << self.w

    @property
    def dtype(self):
        return np.uint32 if self.w <= 16 else np.uint64

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GF) and (self.w, self.poly) == (other.w, other.poly)

    def __hash__(self) -> int:
        return hash((self.w, self.poly))

    # -- element arithmetic -------------------------------------------------

    def array(self, values) -> np.ndarray:
        arr = np.asarray(values, dtype=np.int64 if self.w <= 16 else np.uint64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.order):
            raise ValueError("value outside the field")
        return arr.astype(self.dtype)

    @staticmethod
    def add(a, b):
        return np.bitwise_xor(a, b)

    def mul(self, a, b):
        if self.w <= 16:
            la = self._log[np.asarray(a, dtype=np.intp)]
            lb = self._log[np.asarray(b, dtype=np.intp)]
            out = self._exp[la + lb]
            return out if np.ndim(out) else int(out)
        out = _clmul_reduce(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64), self.w, self.poly)
        return out if np.ndim(out) else int(out)

    def inv(self, a):
        if np.any(np.asarray(a) == 0):
            raise ZeroDivisionError("zero has no inverse in GF(2^w)")
        if self.w <= 16:
            q1 = self.order - 1
            out = self._exp[(q1 - self._log[np.asarray(a, dtype=np.intp)]) % q1]
            return out if np.ndim(out) else int(out)
        # a^(2^w - 2) by square-and-multiply
        result = np.ones_like(np.asarray(a, dtype=np.uint64))
        base = np.asarray(a, dtype=np.uint64)
        e = self.order - 2
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result if np.ndim(result) else int(result)

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def random(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.integers(0, self.order, size=shape, dtype=np.uint64).astype(self.dtype)

    # -- matrices --------------------------------------------------------------

    def eye(self, n: int) -> np.ndarray:
        return np.eye(n, dtype=self.dtype)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype)

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Matrix (or vector) product over the field."""
        a = np.asarray(a, dtype=self.dtype)
        b = np.asarray(b, dtype=self.dtype)
        vec_a, vec_b = a.ndim == 1, b.ndim == 1
        a2 = a[None, :] if vec_a else a
        b2 = b[:, None] if vec_b else b
        if a2.shape[1] != b2.shape[0]:
            raise ValueError(f"shape mismatch {a.shape} x {b.shape}")
        if a2.shape[1] == 0:
            out = self.zeros((a2.shape[0], b2.shape[1]))
        else:
            out = np.bitwise_xor.reduce(self.mul(a2[:, :, None], b2[None, :, :]), axis=1)
        if vec_a:
            out = out[0]
        if vec_b:
            out = out[..., 0]
        return out

    def rref(self, m: np.ndarray, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
        """Reduced row echelon form and pivot columns.

        Pivoting takes the first nonzero entry of each column, lowest row
        index first.  Only the leading ``ncols`` columns are eliminated; any
        trailing columns (an augmented right-hand side) are carried along.
        """
        a = np.array(m, dtype=self.dtype, copy=True)
        if a.ndim != 2:
            raise ValueError("rref expects a 2-D matrix")
        rows, cols = a.shape
        ncols = cols if ncols is None else ncols
        pivots: list[int] = []
        r = 0
        for c in range(ncols):
            if r == rows:
                break
            nz = np.flatnonzero(a[r:, c])
            if nz.size == 0:
                continue
            p = r + int(nz[0])
            if p != r:
                a[[r, p]] = a[[p, r]]
            piv = a[r, c]
            if piv != 1:
                a[r] = self.mul(a[r], self.inv(int(piv)))
            col = a[:, c].copy()
            col[r] = 0
            hit = np.flatnonzero(col)
            if hit.size:
                a[hit] ^= self.mul(col[hit, None], a[r][None, :])
            pivots.append(c)
            r += 1
        return a, pivots

    def rank(self, m: np.ndarray) -> int:
        m = np.asarray(m)
        if m.size == 0:
            return 0
        return len(self.rref(m)[1])

    def determined(self, m: np.ndarray, b: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray | None]:
        """Which unknowns of ``m @ x = b`` are pinned down by the equations.

        Unknown ``c`` is determined iff the unit vector ``e_c`` lies in the
        row space of ``m``.  Returns a boolean mask over columns and, when
        ``b`` is given, the values of the determined unknowns (zero elsewhere).
        """
        m = np.asarray(m, dtype=self.dtype)
        rows, cols = m.shape
        mask = np.zeros(cols, dtype=bool)
        if rows == 0 or cols == 0:
            return mask, (self.zeros(cols) if b is not None else None)
        if b is not None:
            b = np.asarray(b, dtype=self.dtype)
            if b.shape[0] != rows:
                raise ValueError("right-hand side length does not match the matrix")
            aug = np.concatenate([m, b.reshape(rows, -1)], axis=1)
        else:
            aug = m
        red, pivots = self.rref(aug, ncols=cols)
        if b is not None and len(pivots) < rows:
            tail = red[len(pivots):, cols:]
            if np.any(tail):
                raise Unsolvable("inconsistent system")
        free = np.ones(cols, dtype=bool)
        free[pivots] = False
        values = self.zeros((cols,) + b.shape[1:]) if b is not None else None
        for r, c in enumerate(pivots):
            if not np.any(red[r, :cols][free]):
                mask[c] = True
                if values is not None:
                    values[c] = red[r, cols:] if b.ndim > 1 else red[r, cols]
        return mask, values

    def solve_erasures(self, m: np.ndarray, b: np.ndarray, unknown_cols) -> np.ndarray | None:
        """Solve ``m[:, unknown_cols] @ x = b`` for the unknown columns.

        Known columns must already be folded into ``b``.  Returns the unique
        solution, or ``None`` when the restricted system is rank deficient or
        inconsistent.
        """
        m = np.asarray(m, dtype=self.dtype)
        b = np.asarray(b, dtype=self.dtype)
        if m.ndim != 2 or b.ndim != 1 or b.shape[0] != m.shape[0]:
            raise ValueError(f"dimension mismatch: matrix {m.shape}, rhs {b.shape}")
        cols = list(unknown_cols)
        if any(c < 0 or c >= m.shape[1] for c in cols):
            raise ValueError("unknown column index out of range")
        if not cols:
            return self.zeros(0)
        sub = m[:, cols]
        try:
            mask, values = self.determined(sub, b)
        except Unsolvable:
            return None
        if not mask.all():
            return None
        return values


@lru_cache(maxsize=None)
def _tables(w: int, poly: int) -> tuple[np.ndarray, np.ndarray]:
    q = 1 << w
    exp = np.zeros(4 * q + 1, dtype=np.uint32)
    log = np.zeros(q, dtype=np.intp)
    x = 1
    for i in range(q - 1):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & q:
            x ^= poly
    if x != 1 or len(set(exp[: q - 1].tolist())) != q - 1:
        raise ValueError(f"polynomial {poly:#x} is not primitive; x does not generate GF(2^{w})*")
    exp[q - 1: 2 * q - 2] = exp[: q - 1]
    # log(0) points into an all-zero tail so products with 0 vanish without branching
    log[0] = 2 * q
    exp.setflags(write=False)
    log.setflags(write=False)
    return exp, log


def _clmul_reduce(a: np.ndarray, b: np.ndarray, w: int, poly: int) -> np.ndarray:
    a, b = np.broadcast_arrays(a.astype(np.uint64), b.astype(np.uint64))
    shape = a.shape
    a, b = a.reshape(-1), b.reshape(-1)
    acc = np.zeros(a.shape, dtype=np.uint64)
    aa = a.copy()
    top = np.uint64(1 << (w - 1))
    low = np.uint64(poly & ((1 << w) - 1))
    mask = np.uint64((1 << w) - 1)
    one = np.uint64(1)
    for bit in range(w):
        sel = ((b >> np.uint64(bit)) & one).astype(bool)
        acc[sel] ^= aa[sel]
        carry = (aa & top) != 0
        aa = (aa << one) & mask
        aa[carry] ^= low
    return acc.reshape(shape)
