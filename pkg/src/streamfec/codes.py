"""Parameter derivation, codec construction and streaming encoders.

All four families share one layered layout.  A source symbol is split into
an urgent part ``u`` and a remaining part ``v``.  The channel symbol is

    x[i] = (u[i], v[i], q[i], p2[i], pu[i], pad)

where ``(q - u[i - delta], p2)`` are the parities of a convolutional code on
the ``v`` stream (``q`` carries the first ``u`` of them, superimposed with the
delayed ``u`` stream), ``pu`` are parities of a second code on ``u`` alone, and
``pad`` are inert zeros used to reach an externally requested rate.

    baseline   u = 0,  v = k,  p2 = n - k
    MS         u = B,  v = T - B, delta = T
    MiDAS      MS plus a pu layer of size K
    PRC        u, v, s from the shift delta, p2 = s
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .gf import GF
from .mdsconv import ConvCode, Target, burst_targets, gen_strongly_mds, p1_targets

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib
import tomli_w


class InvalidParams(ValueError):
    pass


class Family(str, Enum):
    BASELINE_MDS = "mds"
    MS = "ms"
    MIDAS = "midas"
    PRC = "prc"

    @classmethod
    def parse(cls, text: str) -> "Family":
        key = text.strip().lower()
        aliases = {"baseline": "mds", "baseline_mds": "mds", "strongly-mds": "mds"}
        key = aliases.get(key, key)
        for fam in cls:
            if fam.value == key or fam.name.lower() == key:
                return fam
        raise InvalidParams(f"unknown code family {text!r}")


@dataclass(frozen=True)
class CodeSpec:
    family: Family
    T: int
    B: int
    N: int
    delta: int
    u: int
    v: int
    s: int
    K: int
    expansion: int = 1
    pad: int = 0
    field_width: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("u", "v", "s", "K", "pad"):
            if getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be non-negative")
        if self.u + self.v <= 0 or self.parity_size <= 0:
            raise InvalidParams("layout needs source and parity sub-symbols")
        if self.u and not 0 < self.delta <= self.T:
            raise InvalidParams(f"shift must lie in (0, T], got {self.delta}")

    @property
    def k(self) -> int:
        return self.u + self.v

    @property
    def parity_size(self) -> int:
        """Parities of the v-stream code (the q part plus p2)."""
        return self.u + self.s

    @property
    def n(self) -> int:
        return self.u + self.v + self.u + self.s + self.K + self.pad

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    @property
    def natural_rate(self) -> Fraction:
        return Fraction(self.k, self.n - self.pad)

    @property
    def groups(self) -> list[tuple[str, int]]:
        if self.family is Family.BASELINE_MDS:
            out = [("s", self.v), ("p", self.s)]
        else:
            out = [("u", self.u), ("v", self.v), ("q", self.u)]
            if self.s:
                out.append(("p2", self.s))
            if self.K:
                out.append(("pu", self.K))
        if self.pad:
            out.append(("pad", self.pad))
        return out

    def slices(self) -> dict[str, slice]:
        """Positions of every group inside a channel symbol (internal order)."""
        u, v, s, K = self.u, self.v, self.s, self.K
        o = 0
        out = {}
        for name, size in (("u", u), ("v", v), ("q", u), ("p2", s), ("pu", K), ("pad", self.pad)):
            out[name] = slice(o, o + size)
            o += size
        return out

    def label(self) -> str:
        f = self.family
        if f is Family.MS:
            core = f"MS(B={self.B},T={self.T})"
        elif f is Family.MIDAS:
            core = f"MiDAS(N={self.N},B={self.B},T={self.T})"
        elif f is Family.PRC:
            core = f"PRC(B={self.B},T={self.T},delta={self.delta}" + (f",N={self.N})" if self.K else ")")
        else:
            core = f"MDS(N=B={self.B},T={self.T})"
        return f"{core}@{self.rate.numerator}/{self.rate.denominator}"

    # -- rate matching -------------------------------------------------------

    def scaled(self, factor: int) -> "CodeSpec":
        if factor < 1:
            raise InvalidParams("scale factor must be positive")
        return replace(self, u=self.u * factor, v=self.v * factor, s=self.s * factor, K=self.K * factor,
                       pad=self.pad * factor, expansion=self.expansion * factor)

    def padded_to(self, rate: Fraction | str) -> "CodeSpec":
        """Append inert zero sub-symbols so the rate equals ``rate`` exactly."""
        target = parse_rational(rate)
        if not 0 < target < 1:
            raise InvalidParams("target rate must lie in (0, 1)")
        if target > self.natural_rate:
            raise InvalidParams(f"cannot pad {self.natural_rate} up to a higher rate {target}")
        spec = replace(self, pad=0)
        num = spec.k * target.denominator
        factor = target.numerator // math.gcd(num, target.numerator)
        spec = spec.scaled(factor) if factor > 1 else spec
        n_total = spec.k * target.denominator // target.numerator
        return replace(spec, pad=n_total - spec.n)

    # -- serialization ---------------------------------------------------------

    def to_toml_dict(self) -> dict:
        code = {"family": self.family.value, "T": self.T, "B": self.B, "N": self.N,
                "delta": self.delta, "field_width": self.field_width, "seed": self.seed}
        if self.pad:
            code["pad_to_rate"] = f"{self.rate.numerator}/{self.rate.denominator}"
        return {"code": code}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_toml_dict())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        d["rate"] = f"{self.rate.numerator}/{self.rate.denominator}"
        d["n"] = self.n
        d["k"] = self.k
        return d


def parse_rational(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidParams(f"not a rational number: {text!r}") from exc


# -- parameter derivation -------------------------------------------------------


def ms_params(B: int, T: int) -> CodeSpec:
    if not 1 <= B <= T:
        raise InvalidParams(f"MS needs 1 <= B <= T, got B={B}, T={T}")
    return CodeSpec(Family.MS, T=T, B=B, N=1, delta=T, u=B, v=T - B, s=0, K=0)


def midas_params(N: int, B: int, T: int) -> CodeSpec:
    if N > B:
        raise InvalidParams(f"MiDAS needs N <= B, got N={N}, B={B}")
    if B > T:
        raise InvalidParams(f"MiDAS needs B <= T, got B={B}, T={T}")
    if N < 1:
        raise InvalidParams("MiDAS needs N >= 1")
    K = Fraction(N * B, T + 1 - N)
    e = K.denominator
    return CodeSpec(Family.MIDAS, T=T, B=B, N=N, delta=T, u=e * B, v=e * (T - B), s=0,
                    K=int(K * e), expansion=e)


def mds_params(T: int, B: int | None = None, rate: Fraction | str | None = None) -> CodeSpec:
    """Single-layer code with memory T.

    With ``rate`` the code is (q, p) for rate p/q and recovers
    floor((1-R)(T+1)) erasures per window; otherwise the smallest rate
    (T+1-B)/(T+1) reaching ``B`` is used.
    """
    if rate is not None:
        R = parse_rational(rate)
        if not 0 < R < 1:
            raise InvalidParams("rate must lie in (0, 1)")
        k, n = R.numerator, R.denominator
        nb = ((n - k) * (T + 1)) // n
        if B is not None and B > nb:
            raise InvalidParams(f"rate {R} at T={T} only reaches B=N={nb}")
        B = nb
    else:
        if B is None or not 1 <= B <= T:
            raise InvalidParams(f"baseline needs 1 <= B <= T, got B={B}, T={T}")
        k, n = T + 1 - B, T + 1
    if B < 1:
        raise InvalidParams("rate too high to correct any erasure")
    return CodeSpec(Family.BASELINE_MDS, T=T, B=B, N=B, delta=T, u=0, v=k, s=n - k, K=0)


def prc_rate(B: int, T: int, delta: int) -> Fraction:
    a = delta * (T - delta)
    return Fraction(a + (B + 1), a + (B + 1) * (T - delta + 2))


def prc_optimal(B: int, T: int) -> tuple[Fraction | float, Fraction | float]:
    """Real-valued optimal shift and rate; exact when T - B is a perfect square."""
    if T <= B:
        raise InvalidParams("PRC needs T > B")
    d = T - B
    r = math.isqrt(d)
    if r * r == d:
        root: Fraction | float = Fraction(r)
    else:
        root = math.sqrt(d)
    delta = T + 1 - root
    rate = ((T + 2) * root - 2 * d) / ((T + B + 3) * root - 2 * d)
    return delta, rate


def prc_params(B: int, T: int, delta: int | str | None = "auto", N: int = 0) -> CodeSpec:
    """Partial recovery code.  ``N > 0`` adds a pu layer on the u stream that
    corrects N erasures per window of T+1 (same mechanism as MiDAS)."""
    if T <= B:
        raise InvalidParams(f"PRC needs T > B, got B={B}, T={T}")
    if B < 1:
        raise InvalidParams("PRC needs B >= 1")
    if delta is None or (isinstance(delta, str) and delta.lower() == "auto"):
        candidates = [d for d in range(B + 2, T + 1) if (B + 1) * (T - d + 1) > d - B - 1]
        if not candidates:
            raise InvalidParams(f"no non-degenerate shift exists for B={B}, T={T}")
        star, _ = prc_optimal(B, T)
        delta = max(candidates, key=lambda d: (prc_rate(B, T, d), -abs(d - star)))
    delta = int(delta)
    if not B < delta <= T:
        raise InvalidParams(f"PRC needs B < delta <= T, got delta={delta}")
    if delta == B + 1:
        raise InvalidParams("delta = B+1 leaves the v-stream code with rate 0 (degenerate layout)")
    u = (B + 1) * (T - delta + 1) - (delta - B - 1)
    v = (T - delta + 1) * (delta - B - 1)
    s = delta - B - 1
    if u <= 0:
        raise InvalidParams(f"delta={delta} gives an empty u group")
    spec = CodeSpec(Family.PRC, T=T, B=B, N=1, delta=delta, u=u, v=v, s=s, K=0)
    if N:
        if not 1 <= N <= T:
            raise InvalidParams("N must lie in [1, T]")
        K = Fraction(N * u, T + 1 - N)
        e = K.denominator
        spec = replace(spec.scaled(e), N=N, K=int(K * e))
    return spec


def spec_from_params(family: str | Family, *, T: int, B: int | None = None, N: int | None = None,
                     delta: int | str | None = None, rate: str | Fraction | None = None,
                     pad_to_rate: str | Fraction | None = None, field_width: int = 16,
                     seed: int = 0) -> CodeSpec:
    fam = Family.parse(family) if isinstance(family, str) else family
    if fam is Family.MS:
        spec = ms_params(_need(B, "B"), T)
    elif fam is Family.MIDAS:
        spec = midas_params(_need(N, "N"), _need(B, "B"), T)
    elif fam is Family.PRC:
        # a plain PRC already handles one isolated loss; N > 1 adds the pu layer
        layer = int(N) if N is not None and int(N) > 1 else 0
        spec = prc_params(_need(B, "B"), T, "auto" if delta is None else delta, layer)
    else:
        spec = mds_params(T, B if B is not None else N, rate)
    spec = replace(spec, field_width=field_width, seed=seed)
    if pad_to_rate is not None:
        spec = spec.padded_to(pad_to_rate)
    return spec


def _need(x, name):
    if x is None:
        raise InvalidParams(f"parameter {name} is required for this family")
    return int(x)


def spec_from_toml(text: str) -> CodeSpec:
    doc = tomllib.loads(text)
    code = doc.get("code")
    if not isinstance(code, dict):
        raise InvalidParams("TOML document needs a [code] table")
    return spec_from_params(code["family"], T=int(code["T"]), B=code.get("B"), N=code.get("N"),
                            delta=code.get("delta"), pad_to_rate=code.get("pad_to_rate"),
                            field_width=int(code.get("field_width", 16)), seed=int(code.get("seed", 0)))


# -- codec construction ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Codec:
    """A CodeSpec together with the inner convolutional codes it uses."""

    spec: CodeSpec
    gf: GF
    v_code: ConvCode | None
    u_code: ConvCode | None

    @property
    def memory(self) -> int:
        return self.spec.T

    def composite(self) -> ConvCode:
        """The whole layered code written as one systematic (n, k, T) code."""
        return _composite(self)


def v_code_targets(spec: CodeSpec) -> list[Target]:
    V, P, T = spec.v, spec.parity_size, spec.T
    if spec.family is Family.BASELINE_MDS:
        nv = (P * (T + 1)) // (V + P)
        return p1_targets(T, nv, T + 1)
    if spec.family in (Family.MS, Family.MIDAS):
        nv = (P * T) // (V + P)
        return p1_targets(T, nv, T) + burst_targets(spec.B, T)
    # PRC: two-burst patterns inside [0, delta-1] and single losses decoded
    # from the p2 columns alone
    B, d = spec.B, spec.delta
    out: list[Target] = []
    for b in range(1, B + 1):
        out.append(Target.of(range(b), d - 1))
        for r in range(b, T + 1):
            if Fraction(r) < Fraction(b * d, B + 1) and r <= d - 1:
                out.append(Target.of(list(range(b)) + [r], d - 1))
        for r in range(1, d):
            if Fraction(r) < Fraction(d, B + 1) and r + b - 1 <= d - 1:
                out.append(Target.of([0] + list(range(r, r + b)), d - 1))
    span = T - d + 2
    mask = [[False] * spec.u + [True] * spec.s for _ in range(span)]
    out.append(Target.of([0], span - 1, parity_mask=mask))
    return out


def u_code_targets(spec: CodeSpec) -> list[Target]:
    return p1_targets(spec.T, spec.N, spec.T + 1)


@lru_cache(maxsize=64)
def build_codec(spec: CodeSpec, seed: int | None = None) -> Codec:
    """Generate and certify the inner codes of ``spec``.

    Sizes grow with the expansion factor; this is meant for layouts with
    tens of sub-symbols, not the hundreds some expanded MiDAS layouts need.
    """
    gf = GF(spec.field_width)
    seed = spec.seed if seed is None else seed
    v_code = u_code = None
    if spec.v:
        v_code = gen_strongly_mds(spec.v + spec.parity_size, spec.v, spec.T, v_code_targets(spec),
                                  seed=seed, gf=gf)
    if spec.K:
        u_code = gen_strongly_mds(spec.u + spec.K, spec.u, spec.T, u_code_targets(spec),
                                  seed=seed + 1, gf=gf)
    return Codec(spec, gf, v_code, u_code)


@lru_cache(maxsize=64)
def _composite(codec: Codec) -> ConvCode:
    sp, gf = codec.spec, codec.gf
    U, V, S, K = sp.u, sp.v, sp.s, sp.K
    k = U + V
    r = sp.n - k
    H = gf.zeros((sp.T, k, r))
    for t in range(1, sp.T + 1):
        if codec.v_code is not None:
            H[t - 1, U:U + V, 0:U + S] = codec.v_code.H[t - 1]
        if U and t == sp.delta:
            H[t - 1, 0:U, 0:U] = gf.eye(U)
        if codec.u_code is not None:
            H[t - 1, 0:U, U + S:U + S + K] = codec.u_code.H[t - 1]
    return ConvCode(sp.n, k, sp.T, H, gf, seed=codec.v_code.seed if codec.v_code else None)


# -- encoders -------------------------------------------------------------------------


class StreamEncoder:
    """Symbol-by-symbol encoder holding the last T source symbols."""

    def __init__(self, codec: Codec):
        self.codec = codec
        sp = codec.spec
        self._gf = codec.gf
        self._hist = self._gf.zeros((sp.T, sp.k))  # row j holds s[i-1-j]
        self.time = 0

    def encode(self, source) -> np.ndarray:
        sp, gf = self.codec.spec, self._gf
        s = np.asarray(source, dtype=gf.dtype).reshape(-1)
        if s.shape[0] != sp.k:
            raise ValueError(f"source symbol has {s.shape[0]} sub-symbols, expected {sp.k}")
        U, V = sp.u, sp.v
        pv = gf.zeros(sp.parity_size)
        if self.codec.v_code is not None:
            hv = self._hist[:, U:U + V]
            pv = np.bitwise_xor.reduce(
                gf.mul(hv[:, :, None], self.codec.v_code.H).reshape(-1, sp.parity_size), axis=0)
        q = pv[:U].copy()
        if U:
            q ^= self._hist[sp.delta - 1, 0:U]
        parts = [s, q, pv[U:]]
        if self.codec.u_code is not None:
            hu = self._hist[:, 0:U]
            parts.append(np.bitwise_xor.reduce(gf.mul(hu[:, :, None], self.codec.u_code.H).reshape(-1, sp.K), axis=0))
        parts.append(gf.zeros(sp.pad))
        self._hist = np.roll(self._hist, 1, axis=0)
        self._hist[0] = s
        self.time += 1
        return np.concatenate(parts).astype(gf.dtype)


def encode_stream(codec: Codec, sources: np.ndarray) -> np.ndarray:
    """Encode a whole (L, k) source block at once through the composite code."""
    return codec.composite().encode(sources)


def random_sources(codec: Codec, length: int, rng: np.random.Generator) -> np.ndarray:
    return codec.gf.random(rng, (length, codec.spec.k))


def iter_encode(codec: Codec, sources: Iterable) -> Iterable[np.ndarray]:
    enc = StreamEncoder(codec)
    for s in sources:
        yield enc.encode(s)
