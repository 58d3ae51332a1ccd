"""Streaming decoders for the layered codes.

``LayeredDecoder`` peels the layers in the order the constructions suggest:

* the v-stream code is solved from q (once the delayed u is known) and p2,
* u[i - delta] is read off q[i] as soon as every v that p1[i] depends on is known,
* the optional pu code recovers u directly.

Two engines share this control flow.  ``exact`` works on real field data and
solves each layer by Gaussian elimination.  ``ideal`` needs only the erasure
pattern: a layer recovers its earliest unknown as soon as some window starting
there holds no more unknown sub-symbols than usable parity sub-symbols, which
is what a code meeting the column-distance bound guarantees.  The ideal engine
is what makes long channel simulations affordable; the exact engine and
``generic_decode`` cross-check it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

import numpy as np

from .codes import Codec, CodeSpec
from .mdsconv import ConvCode

ERASED = None


class Status(str, Enum):
    RECEIVED = "received"
    RECOVERED_ON_TIME = "on_time"
    RECOVERED_LATE = "late"
    LOST = "lost"


class InadmissiblePattern(ValueError):
    pass


@dataclass
class RecoveryOutcome:
    status: dict[int, Status]
    recovered_at: dict[int, int] = field(default_factory=dict)
    case: str | None = None
    sacrificed: int | None = None
    fallback_calls: int = 0

    @property
    def lost(self) -> list[int]:
        return sorted(i for i, s in self.status.items() if s is Status.LOST)

    @property
    def missed(self) -> list[int]:
        """Indices not recovered by their deadline (lost or late)."""
        return sorted(i for i, s in self.status.items() if s in (Status.LOST, Status.RECOVERED_LATE))

    def on_time(self) -> list[int]:
        return sorted(i for i, s in self.status.items() if s is Status.RECOVERED_ON_TIME)

    def shifted(self, offset: int) -> "RecoveryOutcome":
        return RecoveryOutcome({i - offset: s for i, s in self.status.items()},
                               {i - offset: t - offset for i, t in self.recovered_at.items()},
                               self.case, None if self.sacrificed is None else self.sacrificed - offset,
                               self.fallback_calls)


class LayeredDecoder:
    """Sequential decoder; feed channel symbols (or ``None``) in time order."""

    def __init__(self, spec_or_codec: CodeSpec | Codec, mode: str = "exact", deadline: int | None = None,
                 fallback: bool = True, trace: TextIO | None = None):
        if isinstance(spec_or_codec, Codec):
            self.codec: Codec | None = spec_or_codec
            self.spec = spec_or_codec.spec
        else:
            self.codec = None
            self.spec = spec_or_codec
        if mode not in ("exact", "ideal"):
            raise ValueError("mode must be 'exact' or 'ideal'")
        if mode == "exact" and self.codec is None:
            raise ValueError("exact decoding needs a Codec with generated inner codes")
        self.mode = mode
        self.deadline = self.spec.T if deadline is None else deadline
        self.fallback = fallback
        self.trace = trace
        sp = self.spec
        self.T, self.U, self.V, self.S, self.K, self.D = sp.T, sp.u, sp.v, sp.s, sp.K, sp.delta
        self.P = sp.parity_size
        self.horizon = 2 * sp.T + sp.B + 1
        self.t = -1
        self.recv: list[bool] = []
        self.u_known: list[bool] = []
        self.v_known: list[bool] = []
        self.u_time: dict[int, int] = {}
        self.v_time: dict[int, int] = {}
        self.pending_u: set[int] = set()
        self.pending_v: set[int] = set()
        self.abandoned_u: set[int] = set()
        self.abandoned_v: set[int] = set()
        self.fallback_calls = 0
        # data (exact mode)
        self.u_val: dict[int, np.ndarray] = {}
        self.v_val: dict[int, np.ndarray] = {}
        self.obs: dict[int, np.ndarray] = {}
        if self.codec is not None:
            self._sl = sp.slices()
            self._gf = self.codec.gf

    # -- helpers ---------------------------------------------------------------

    def _ku(self, i: int) -> bool:
        return i < 0 or self.u_known[i]

    def _kv(self, i: int) -> bool:
        return i < 0 or self.v_known[i]

    def symbol_known(self, i: int) -> bool:
        return self._ku(i) and self._kv(i)

    def _set_u(self, i: int, value=None) -> None:
        self.u_known[i] = True
        self.u_time[i] = self.t
        self.pending_u.discard(i)
        self.abandoned_u.discard(i)
        if value is not None:
            self.u_val[i] = value

    def _set_v(self, i: int, value=None) -> None:
        self.v_known[i] = True
        self.v_time[i] = self.t
        self.pending_v.discard(i)
        self.abandoned_v.discard(i)
        if value is not None:
            self.v_val[i] = value

    # -- public API ------------------------------------------------------------

    def decode_step(self, y) -> list[tuple[int, np.ndarray | None]]:
        """Consume y[t]; return source symbols completed at this step."""
        self.t += 1
        t = self.t
        got = y is not None and y is not False
        self.recv.append(got)
        self.u_known.append(got or self.U == 0)
        self.v_known.append(got or self.V == 0)
        if got:
            if self.mode == "exact":
                y = np.asarray(y, dtype=self._gf.dtype)
                if y.shape != (self.spec.n,):
                    raise ValueError(f"channel symbol has shape {y.shape}, expected ({self.spec.n},)")
                self.obs[t] = y
                self.u_val[t] = y[self._sl["u"]]
                self.v_val[t] = y[self._sl["v"]]
        else:
            if self.U:
                self.pending_u.add(t)
            if self.V:
                self.pending_v.add(t)
        before = {i for i in self.pending_u | self.pending_v}
        self._resolve()
        if self.fallback and self._due_unrecovered():
            self.fallback_calls += 1
            if self.mode == "exact":
                self._joint_solve()
            else:
                self._joint_flow()
            self._resolve()
        done = []
        for i in sorted(before):
            if self.symbol_known(i) and i not in self.pending_u and i not in self.pending_v:
                val = None
                if self.mode == "exact":
                    val = np.concatenate([self.u_val.get(i, self._gf.zeros(0)), self.v_val.get(i, self._gf.zeros(0))])
                done.append((i, val))
        self._prune()
        if self.trace is not None:
            lost = [i for i in range(max(0, t - self.deadline), t + 1)
                    if i + self.deadline == t and not self.recv[i] and not self.symbol_known(i)]
            if done or lost:
                lo = max(0, t - self.horizon + 1)
                rec = {"t": t, "pattern": "".join("." if r else "x" for r in self.recv[lo:t + 1]),
                       "case_label": None, "recovered": [i for i, _ in done], "lost": lost}
                self.trace.write(json.dumps(rec) + "\n")
        return done

    def recovery_time(self, i: int) -> int | None:
        if self.recv[i]:
            return None
        if not self.symbol_known(i):
            return None
        return max(self.u_time.get(i, -1), self.v_time.get(i, -1))

    def outcome(self, indices: Iterable[int] | None = None) -> RecoveryOutcome:
        idx = range(len(self.recv)) if indices is None else indices
        status: dict[int, Status] = {}
        when: dict[int, int] = {}
        for i in idx:
            if self.recv[i]:
                status[i] = Status.RECEIVED
                continue
            rt = self.recovery_time(i)
            if rt is None:
                status[i] = Status.LOST
            else:
                when[i] = rt
                status[i] = Status.RECOVERED_ON_TIME if rt <= i + self.deadline else Status.RECOVERED_LATE
        return RecoveryOutcome(status, when, fallback_calls=self.fallback_calls)

    # -- peeling ---------------------------------------------------------------

    def _resolve(self) -> None:
        while True:
            progress = self._q_route()
            progress |= self._v_layer()
            progress |= self._q_route()
            if self.K:
                progress |= self._u_layer()
            if not progress:
                return

    def _q_route(self) -> bool:
        """u[i] = q[i + delta] - p1[i + delta] once p1 is computable."""
        if not self.U:
            return False
        progress = False
        for i in sorted(self.pending_u):
            j = i + self.D
            if j > self.t or not self.recv[j]:
                continue
            if not all(self._kv(x) for x in range(j - self.T, j)):
                continue
            value = None
            if self.mode == "exact":
                value = self.obs[j][self._sl["q"]] ^ self._p1(j)
            self._set_u(i, value)
            progress = True
        return progress

    def _p1(self, j: int) -> np.ndarray:
        gf = self._gf
        acc = gf.zeros(self.U)
        if self.codec.v_code is None:
            return acc
        H = self.codec.v_code.H
        for lag in range(1, self.T + 1):
            i = j - lag
            if i < 0:
                break
            acc ^= gf.matmul(self.v_val[i], H[lag - 1][:, :self.U])
        return acc

    def _earliest(self, pending: set[int], abandoned: set[int]) -> int | None:
        while True:
            live = [i for i in pending if i not in abandoned]
            if not live:
                return None
            i = min(live)
            if self.t > i + self.T:
                abandoned.add(i)
                continue
            return i

    def _v_layer(self) -> bool:
        if not self.V:
            return False
        if self.mode == "exact":
            return self._v_exact()
        progress = False
        while True:
            i = self._earliest(self.pending_v, self.abandoned_v)
            if i is None or not self._v_window_ok(i):
                return progress
            self._set_v(i)
            progress = True

    def _v_window_ok(self, i: int) -> bool:
        stale = [a for a in self.abandoned_v if a < i and a + self.T > i]
        return self._window_ok(i, self.V, self.P, stale, self._kv,
                               lambda tau: self.U if self.U and not self._ku(tau - self.D) else 0)

    def _window_ok(self, i: int, width: int, red: int, stale: list[int], known, partial) -> bool:
        """Count test for recovering the earliest unknown input ``i`` of a layer.

        Over a window [i, tau] the unknown sub-symbols must not exceed the usable
        parity sub-symbols.  Older unknowns that still feed rows in the window
        are handled either by skipping those rows, or by keeping the rows and
        counting the old unknowns as extra unknowns; either suffices.
        """
        last = max(stale) if stale else None
        extra = width * len(stale)
        skip_acc = keep_acc = 0
        for tau in range(i, self.t + 1):
            w = 0 if known(tau) else width
            if not self.recv[tau]:
                skip_w = keep_w = w + red
            else:
                miss = partial(tau)
                keep_w = w + miss
                skip_w = w + (red if last is not None and last >= tau - self.T else miss)
            skip_acc += skip_w
            keep_acc += keep_w
            budget = red * (tau - i + 1)
            if skip_acc <= budget or keep_acc + extra <= budget:
                return True
        return False

    def _u_layer(self) -> bool:
        if self.mode == "exact":
            return self._u_exact()
        progress = False
        while True:
            i = self._earliest(self.pending_u, self.abandoned_u)
            if i is None or not self._u_window_ok(i):
                return progress
            self._set_u(i)
            progress = True

    def _u_window_ok(self, i: int) -> bool:
        stale = [a for a in self.abandoned_u if a < i and a + self.T > i and not self._ku(a)]
        return self._window_ok(i, self.U, self.K, stale, self._ku, lambda tau: 0)

    # -- exact layer solves -----------------------------------------------------

    def _layer_solve(self, code: ConvCode, pending: set[int], abandoned: set[int], known, values: dict,
                     row_cols, row_obs) -> list[tuple[int, np.ndarray]]:
        """Solve one layer for its unknown inputs.

        Unknowns older than the horizon are treated as permanently missing;
        rows that depend on them are skipped.
        """
        gf = self._gf
        t, T = self.t, self.T
        live = sorted(i for i in pending if i >= t - self.horizon)
        for i in pending:
            if i < t - self.horizon:
                abandoned.add(i)
        if not live:
            return []
        stale = [i for i in pending if i < live[0]]
        last_stale = max(stale) if stale else None
        width = code.k
        rows = []
        rhs = []
        for tau in range(live[0] + 1, t + 1):
            if not self.recv[tau]:
                continue
            if last_stale is not None and last_stale >= tau - T:
                continue
            cols = row_cols(tau)
            if len(cols) == 0:
                continue
            obs = row_obs(tau)[cols]
            for lag in range(1, T + 1):
                i = tau - lag
                if i < 0:
                    break
                if known(i):
                    obs = obs ^ gf.matmul(values[i], code.H[lag - 1][:, cols])
            rows.append((tau, cols))
            rhs.append(obs)
        if not rows:
            return []
        from .mdsconv import window_system

        A = window_system(code, live, rows)
        b = np.concatenate(rhs)
        mask, vals = gf.determined(A, b)
        out = []
        for blk, i in enumerate(live):
            sl = slice(blk * width, (blk + 1) * width)
            if mask[sl].all():
                out.append((i, vals[sl].copy()))
        return out

    def _v_exact(self) -> bool:
        U, S = self.U, self.S
        all_cols = np.arange(U + S)
        p2_cols = np.arange(U, U + S)

        def row_cols(tau):
            return all_cols if self._ku(tau - self.D) else p2_cols

        def row_obs(tau):
            y = self.obs[tau]
            q = y[self._sl["q"]]
            if U and tau - self.D >= 0 and self._ku(tau - self.D):
                q = q ^ self.u_val[tau - self.D]
            return np.concatenate([q, y[self._sl["p2"]]])

        got = self._layer_solve(self.codec.v_code, self.pending_v, self.abandoned_v, self._kv, self.v_val,
                                row_cols, row_obs)
        for i, val in got:
            self._set_v(i, val)
        return bool(got)

    def _u_exact(self) -> bool:
        cols = np.arange(self.K)

        def row_obs(tau):
            return self.obs[tau][self._sl["pu"]]

        got = self._layer_solve(self.codec.u_code, self.pending_u, self.abandoned_u, self._ku, self.u_val,
                                lambda tau: cols, row_obs)
        for i, val in got:
            self._set_u(i, val)
        return bool(got)

    # -- joint fallback ----------------------------------------------------------

    def _due_unrecovered(self) -> bool:
        t = self.t
        return any(i + self.T == t for i in self.pending_u | self.pending_v)

    def _joint_solve(self) -> None:
        """Solve all layers at once through the composite code over the horizon."""
        sp, gf, t = self.spec, self._gf, self.t
        comp = self.codec.composite()
        lo = max(0, t - self.horizon)
        unknown: list[tuple[int, int]] = []  # (time, sub-symbol index within the source symbol)
        for i in range(lo, t + 1):
            if not self._ku(i):
                unknown.extend((i, a) for a in range(sp.u))
            if not self._kv(i):
                unknown.extend((i, sp.u + a) for a in range(sp.v))
        if not unknown:
            return
        older = [i for i in self.pending_u | self.pending_v if i < lo]
        last_stale = max(older) if older else None
        ncols_par = sp.n - sp.k - sp.pad
        rows_A = []
        rhs = []
        col_of = {key: c for c, key in enumerate(unknown)}
        for tau in range(lo, t + 1):
            if not self.recv[tau]:
                continue
            if last_stale is not None and last_stale >= tau - self.T:
                continue
            obs = self.obs[tau][sp.k:sp.k + ncols_par].copy()
            coef = gf.zeros((ncols_par, len(unknown)))
            touched = False
            for lag in range(1, self.T + 1):
                i = tau - lag
                if i < 0:
                    break
                Hl = comp.H[lag - 1][:, :ncols_par]
                src = np.concatenate([self.u_val[i] if self._ku(i) and sp.u else gf.zeros(sp.u),
                                      self.v_val[i] if self._kv(i) and sp.v else gf.zeros(sp.v)])
                obs = obs ^ gf.matmul(src, Hl)
                for a in range(sp.k):
                    c = col_of.get((i, a))
                    if c is not None:
                        coef[:, c] = Hl[a]
                        touched = True
            if touched:
                rows_A.append(coef)
                rhs.append(obs)
        if not rows_A:
            return
        A = np.concatenate(rows_A)
        b = np.concatenate(rhs)
        mask, vals = gf.determined(A, b)
        by_time: dict[int, list[int]] = {}
        for c, (i, a) in enumerate(unknown):
            by_time.setdefault(i, []).append(c)
        for i, cs in by_time.items():
            ucols = [c for c in cs if unknown[c][1] < sp.u]
            vcols = [c for c in cs if unknown[c][1] >= sp.u]
            if ucols and mask[ucols].all():
                self._set_u(i, vals[ucols].copy())
            if vcols and mask[vcols].all():
                self._set_v(i, vals[vcols].copy())

    def _joint_flow(self) -> None:
        """Pattern-level counterpart of ``_joint_solve``.

        Every block of the composite system is a dense random matrix, an
        identity (u onto q) or zero, so its generic rank is the maximum flow
        through sub-symbol groups, and an unknown group is determined exactly
        when no residual path leads from it to spare column capacity.
        """
        t, T, U, V = self.t, self.T, self.U, self.V
        lo = max(0, t - self.horizon)
        cols: dict[tuple[str, int], int] = {}
        sizes: list[int] = []
        for i in range(lo, t + 1):
            if U and not self._ku(i):
                cols[("u", i)] = len(sizes)
                sizes.append(U)
            if V and not self._kv(i):
                cols[("v", i)] = len(sizes)
                sizes.append(V)
        if not cols:
            return
        older = [i for i in self.pending_u | self.pending_v if i < lo]
        last_stale = max(older) if older else None
        rows: list[tuple[int, list[int]]] = []
        for tau in range(lo, t + 1):
            if not self.recv[tau] or (last_stale is not None and last_stale >= tau - T):
                continue
            vs = [cols[("v", j)] for j in range(max(lo, tau - T), tau) if ("v", j) in cols]
            us = [cols[("u", j)] for j in range(max(lo, tau - T), tau) if ("u", j) in cols]
            if U:
                q_adj = list(vs)
                if ("u", tau - self.D) in cols:
                    q_adj.append(cols[("u", tau - self.D)])
                if q_adj:
                    rows.append((U, q_adj))
            if self.S and vs:
                rows.append((self.S, vs))
            if self.K and us:
                rows.append((self.K, us))
        if not rows:
            return
        for c in _determined_groups(rows, sizes):
            kind, i = next(k for k, v in cols.items() if v == c)
            if kind == "u":
                self._set_u(i)
            else:
                self._set_v(i)

    def _prune(self) -> None:
        cut = self.t - self.horizon - self.T - 1
        if cut <= 0 or self.mode != "exact":
            return
        for d in (self.obs, self.u_val, self.v_val):
            for key in [k for k in d if k < cut]:
                del d[key]


def _determined_groups(rows: list[tuple[int, list[int]]], col_sizes: list[int]) -> list[int]:
    """Column groups fully determined by a generic block system.

    ``rows`` lists (row-group size, adjacent column groups).  Max flow from the
    row groups to the column groups gives the generic rank; a column group is
    determined iff it is saturated and cannot reach spare column capacity
    through the residual graph.
    """
    nr, nc = len(rows), len(col_sizes)
    src, snk = nr + nc, nr + nc + 1
    n = nr + nc + 2
    big = sum(col_sizes) + 1
    graph: list[list[int]] = [[] for _ in range(n)]
    to: list[int] = []
    cap: list[int] = []

    def edge(a: int, b: int, c: int) -> None:
        graph[a].append(len(to)); to.append(b); cap.append(c)
        graph[b].append(len(to)); to.append(a); cap.append(0)

    for r, (size, adj) in enumerate(rows):
        edge(src, r, size)
        for c in adj:
            edge(r, nr + c, big)
    for c, size in enumerate(col_sizes):
        edge(nr + c, snk, size)
    _dinic(graph, to, cap, src, snk)
    # nodes that can still push flow into the sink
    can = [False] * n
    can[snk] = True
    stack = [snk]
    while stack:
        x = stack.pop()
        for e in graph[x]:
            y = to[e]
            # residual y -> x exists iff the paired edge (e ^ 1) has capacity
            if not can[y] and cap[e ^ 1] > 0:
                can[y] = True
                stack.append(y)
    return [c for c in range(nc) if not can[nr + c]]


def _dinic(graph: list[list[int]], to: list[int], cap: list[int], s: int, t: int) -> int:
    n = len(graph)
    flow = 0
    while True:
        level = [-1] * n
        level[s] = 0
        queue = [s]
        for x in queue:
            for e in graph[x]:
                if cap[e] > 0 and level[to[e]] < 0:
                    level[to[e]] = level[x] + 1
                    queue.append(to[e])
        if level[t] < 0:
            return flow
        it = [0] * n

        def push(x: int, f: int) -> int:
            if x == t:
                return f
            while it[x] < len(graph[x]):
                e = graph[x][it[x]]
                y = to[e]
                if cap[e] > 0 and level[y] == level[x] + 1:
                    got = push(y, min(f, cap[e]))
                    if got:
                        cap[e] -= got
                        cap[e ^ 1] += got
                        return got
                it[x] += 1
            return 0

        while True:
            f = push(s, 1 << 60)
            if not f:
                break
            flow += f


# -- convenience runners -----------------------------------------------------------


def run_pattern(spec_or_codec: CodeSpec | Codec, erased: Sequence[bool], mode: str = "ideal",
                deadline: int | None = None, sources: np.ndarray | None = None,
                rng: np.random.Generator | None = None, trace: TextIO | None = None,
                fallback: bool = True) -> tuple[RecoveryOutcome, LayeredDecoder]:
    """Decode an erasure pattern, appending enough clear symbols to settle it.

    In exact mode random source data is drawn (or ``sources`` used) and every
    recovered symbol is checked against the truth.
    """
    dec = LayeredDecoder(spec_or_codec, mode=mode, deadline=deadline, fallback=fallback, trace=trace)
    L = len(erased)
    last = max((i for i, e in enumerate(erased) if e), default=-1)
    total = max(L, last + max(dec.deadline, dec.T) + 2)
    pattern = list(erased) + [False] * (total - L)
    if mode == "exact":
        codec = dec.codec
        if sources is None:
            rng = rng or np.random.default_rng(0)
            sources = codec.gf.random(rng, (total, codec.spec.k))
        X = codec.composite().encode(sources[:total])
        for i in range(total):
            for idx, val in dec.decode_step(None if pattern[i] else X[i]):
                if not np.array_equal(val, sources[idx]):
                    raise AssertionError(f"decoder produced a wrong value for symbol {idx}")
    else:
        for i in range(total):
            dec.decode_step(None if pattern[i] else True)
    return dec.outcome(range(L)), dec


def generic_decode(spec_or_codec: CodeSpec | Codec, erased: Sequence[bool], deadline: int | None = None) -> RecoveryOutcome:
    """Exact joint decoding of the whole window through the composite code.

    For every erased index the earliest time at which its source symbol is
    determined by the received symbols so far is found by rank computations.
    """
    codec = spec_or_codec if isinstance(spec_or_codec, Codec) else None
    if codec is None:
        from .codes import build_codec
        codec = build_codec(spec_or_codec)
    comp = codec.composite()
    gf = comp.gf
    T = codec.spec.T
    deadline = T if deadline is None else deadline
    L = len(erased)
    last = max((i for i in range(L) if erased[i]), default=-1)
    # clear symbols after the window let every deadline pass
    erased = list(erased) + [False] * max(0, last + max(deadline, T) + 2 - L)
    er = [i for i in range(L) if erased[i]]
    status = {i: Status.RECEIVED for i in range(L) if not erased[i]}
    when: dict[int, int] = {}
    if not er:
        return RecoveryOutcome(status)
    k = comp.k
    full = np.arange(comp.redundancy)
    rows: list[tuple[int, np.ndarray]] = []
    solved: set[int] = set()
    from .mdsconv import window_system

    for tau in range(er[0], len(erased)):
        if not erased[tau]:
            rows.append((tau, full))
        else:
            continue
        unknown = [i for i in er if i < tau]
        pend = [i for i in unknown if i not in solved]
        if not pend:
            continue
        A = window_system(comp, unknown, rows)
        mask, _ = gf.determined(A)
        for blk, i in enumerate(unknown):
            if i not in solved and mask[blk * k:(blk + 1) * k].all():
                solved.add(i)
                when[i] = tau
    for i in er:
        if i in when:
            status[i] = Status.RECOVERED_ON_TIME if when[i] <= i + deadline else Status.RECOVERED_LATE
        else:
            status[i] = Status.LOST
    return RecoveryOutcome(status, when)


# -- PRC events ---------------------------------------------------------------------------


def prc_case(spec: CodeSpec, burst_len: int, isolated_pos: int | None) -> str:
    """Decoding branch for a burst at [0, burst_len-1] plus one isolated loss.

    Burst first: simultaneous recovery iff t < b*delta/(B+1).  Isolated first
    at -t: simultaneous iff t < delta/(B+1).  Exact rationals throughout.
    """
    if isolated_pos is None:
        return "BURST"
    B, d = spec.B, spec.delta
    if isolated_pos >= burst_len:
        return "A1" if Fraction(isolated_pos) < Fraction(burst_len * d, B + 1) else "A3"
    gap = -isolated_pos
    return "B1" if Fraction(gap) < Fraction(d, B + 1) else "B3"


def prc_predicted_loss(spec: CodeSpec, burst_len: int, isolated_pos: int | None) -> int | None:
    """Index (relative to the burst start) expected to be sacrificed, if any."""
    if isolated_pos is None:
        return None
    d = spec.delta
    if isolated_pos >= burst_len:
        return isolated_pos - d if d <= isolated_pos <= d + burst_len - 1 else None
    # isolated at -g: its u is repeated at -g + delta
    rep = isolated_pos + d
    return isolated_pos if 0 <= rep <= burst_len - 1 else None


def check_cii_event(spec: CodeSpec, burst_len: int, isolated_pos: int | None) -> None:
    T, B = spec.T, spec.B
    if not 1 <= burst_len <= B:
        raise InadmissiblePattern(f"burst length {burst_len} outside [1, {B}]")
    if isolated_pos is None:
        return
    if not (-T <= isolated_pos <= -1 or burst_len <= isolated_pos <= burst_len + T - 1):
        raise InadmissiblePattern(f"isolated erasure at {isolated_pos} is not within T of the burst")


def decode_prc_event(spec_or_codec: CodeSpec | Codec, burst_start: int, burst_len: int,
                     isolated_pos: int | None, mode: str | None = None,
                     rng: np.random.Generator | None = None) -> RecoveryOutcome:
    """Decode one burst-plus-isolated event; indices are relative to the burst start.

    ``isolated_pos`` is absolute like ``burst_start``; pass ``None`` for a lone burst.
    """
    spec = spec_or_codec.spec if isinstance(spec_or_codec, Codec) else spec_or_codec
    rel = None if isolated_pos is None else isolated_pos - burst_start
    check_cii_event(spec, burst_len, rel)
    if mode is None:
        mode = "exact" if isinstance(spec_or_codec, Codec) else "ideal"
    lead = spec.T + 1
    L = lead + burst_len + spec.T + 1
    erased = [False] * L
    for b in range(burst_len):
        erased[lead + b] = True
    if rel is not None:
        erased[lead + rel] = True
    out, _ = run_pattern(spec_or_codec, erased, mode=mode, rng=rng)
    out = out.shifted(lead)
    out.status = {i: s for i, s in out.status.items() if s is not Status.RECEIVED}
    out.case = prc_case(spec, burst_len, rel)
    missed = out.missed
    out.sacrificed = missed[0] if len(missed) == 1 else None
    return out


def write_trace(records: Iterable[dict], fh: TextIO) -> None:
    for r in records:
        fh.write(json.dumps(r) + "\n")
