import io
import json
from fractions import Fraction

import numpy as np
import pytest

from streamfec.analysis import (
    SCHEMA_VERSION,
    SIM_COLUMNS,
    BurstClass,
    EventDecoder,
    SimReport,
    Source,
    burst_histogram,
    class_fractions,
    classify_bursts,
    clusters,
    hist_json,
    run_simulation,
    simreport_json,
    tradeoff_curves,
    tradeoff_json,
    write_hist_csv,
    write_simreport_csv,
    write_tradeoff_csv,
)
from streamfec.channels import ChannelSpec, ErasureSequence, ge_sample
from streamfec.codes import midas_params, ms_params, prc_params


def by_source(points, src):
    return [(p.B, p.N) for p in points if p.source is src]


def seq_of(length, erased):
    return ErasureSequence.from_positions(length, erased)


def test_tradeoff_half_rate_delay_100():
    pts = tradeoff_curves("1/2", 100)
    assert by_source(pts, Source.MS) == [(100, 1)]
    base = by_source(pts, Source.BASELINE_MDS)
    assert base == [(50, 50)]


def test_tradeoff_12_over_23():
    pts = tradeoff_curves("12/23", 12)
    assert by_source(pts, Source.BASELINE_MDS) == [(6, 6)]
    assert by_source(pts, Source.MS) == [(11, 1)]


@pytest.mark.parametrize("R,T", [("1/2", 100), ("12/23", 12), ("0.7", 100), ("0.6", 50), ("1/3", 30)])
def test_midas_within_one_of_bound(R, T):
    pts = tradeoff_curves(R, T)
    bound = dict(by_source(pts, Source.UPPER_BOUND))
    midas = dict(by_source(pts, Source.MIDAS))
    assert midas
    for B, N in midas.items():
        assert 0 <= bound[B] - N <= 1
    x = Fraction(R) / (1 - Fraction(R))
    for p in pts:
        if p.B:
            assert p.N <= T + 1 - x * p.B


@pytest.mark.parametrize("R,T", [("1/2", 100), ("0.7", 100), ("0.6", 50), ("12/23", 12)])
def test_erlc_never_beats_midas(R, T):
    pts = tradeoff_curves(R, T)
    midas = dict(by_source(pts, Source.MIDAS))
    erlc = by_source(pts, Source.ERLC)
    assert erlc
    for B, N in erlc:
        if B in midas:
            assert N <= midas[B]
    if R == "1/2":
        assert all(midas[B] == N for B, N in erlc if B in midas)


def test_erlc_absent_below_half_and_bound_intercept():
    assert by_source(tradeoff_curves("1/3", 30), Source.ERLC) == []
    assert (0, 101) in by_source(tradeoff_curves("0.7", 100), Source.UPPER_BOUND)
    with pytest.raises(ValueError):
        tradeoff_curves("1", 10)


def test_tradeoff_writers():
    pts = tradeoff_curves("1/2", 10)
    buf = io.StringIO()
    write_tradeoff_csv(pts, buf, {"rate": "1/2"})
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# config: ") and lines[1] == "R,T,source,B,N"
    assert len(lines) == len(pts) + 2
    doc = json.loads(tradeoff_json(pts))
    assert doc["schema_version"] == SCHEMA_VERSION and len(doc["points"]) == len(pts)


def test_classify_single_burst():
    c = classify_bursts(seq_of(100, [10, 11, 12]), 7)
    assert c[BurstClass.BURST_ONLY] == 1 and sum(c.values()) == 1


def test_classify_isolated_neighbours_and_gap():
    s = seq_of(200, [5, 20, 21, 22, 25, 60, 61, 64, 90, 100, 101])
    c = classify_bursts(s, 7)
    # 20-22 has one isolated (25); 60-61 sees 64 only; 100-101 follows 60-61 by far more than T
    assert c[BurstClass.BURST_PLUS_ISOLATED] == 2
    assert c[BurstClass.BURST_ONLY] == 1
    close = classify_bursts(seq_of(50, [10, 11, 15, 16]), 7)
    # the second burst starts within T of the first, which takes precedence
    assert close[BurstClass.GAP_LT_T] == 1
    multi = classify_bursts(seq_of(50, [10, 11, 14, 16]), 7)
    assert multi[BurstClass.BURST_PLUS_MULTI] == 1


def test_classify_threshold_and_padding_invariance():
    s = seq_of(100, [10, 30, 31, 32])
    assert sum(classify_bursts(s, 5, threshold=1).values()) == 2
    assert classify_bursts(s, 5) == classify_bursts(s.padded(40, 40), 5)


def test_class_fractions_and_histograms():
    empty = seq_of(10, [])
    assert burst_histogram(empty) == {}
    assert set(class_fractions(classify_bursts(empty, 3)).values()) == {0.0}
    s = seq_of(30, [1, 2, 3, 8, 20, 21])
    assert burst_histogram(s) == {1: 1, 2: 1, 3: 1}
    buf = io.StringIO()
    write_hist_csv(burst_histogram(s), buf)
    assert buf.getvalue().splitlines()[0] == "length,count"
    assert json.loads(hist_json({}))["histogram"] == []


def test_clusters_split_on_gaps():
    parts = clusters(np.array([0, 3, 11, 30]), 7)
    assert [p.tolist() for p in parts] == [[0, 3], [11], [30]]
    assert clusters(np.array([], dtype=np.int64), 7) == []


def test_zero_loss_channel():
    ch = ChannelSpec.ge(1e-9, 1.0, 0.0)
    rep = run_simulation(midas_params(2, 3, 7), ch, 20_000, seed=1)
    assert rep.lost_symbols == 0 and rep.residual_loss_rate == 0.0


def test_simulation_bounds_and_determinism():
    ch = ChannelSpec.ge(5e-3, 0.5, 1e-2)
    code = midas_params(2, 3, 7)
    a = run_simulation(code, ch, 200_000, seed=4)
    b = run_simulation(code, ch, 200_000, seed=4)
    assert a == b
    assert a.residual_loss_rate <= a.overall_loss_rate
    assert 0 < a.lost_symbols <= a.erased_symbols


def test_longer_deadline_never_hurts():
    ch = ChannelSpec.ge(5e-3, 0.5, 1e-2)
    code = prc_params(3, 7, 6)
    seq = ge_sample(ch, 200_000, 3)
    losses = [run_simulation(code, ch, seq.length, 3, deadline=d, seq=seq).lost_symbols for d in (3, 5, 7)]
    assert losses[0] >= losses[1] >= losses[2]


def test_event_decoder_memoises():
    dec = EventDecoder(ms_params(3, 7))
    first = dec((0, 5))
    assert dec.memo[(0, 5)] == first and first[0] >= 1
    assert dec((0,)) == (0, 0)


def test_report_merge_and_writers():
    ch = ChannelSpec.ge(5e-3, 0.5, 1e-2)
    code = midas_params(2, 3, 7)
    a = run_simulation(code, ch, 50_000, seed=1)
    b = run_simulation(code, ch, 50_000, seed=2)
    m = a.merge(b)
    assert m.symbols_simulated == 100_000
    assert m.lost_symbols == a.lost_symbols + b.lost_symbols
    assert m.residual_loss_rate == pytest.approx(m.lost_symbols / 100_000)
    other = run_simulation(ms_params(3, 7), ch, 50_000, seed=1)
    with pytest.raises(ValueError):
        a.merge(other)
    buf = io.StringIO()
    write_simreport_csv([a, b], buf, {"seed": 1})
    lines = buf.getvalue().splitlines()
    assert lines[1].split(",") == SIM_COLUMNS and len(lines) == 4
    doc = json.loads(simreport_json([a]))
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["reports"][0]["lost_symbols"] == a.lost_symbols
    assert isinstance(a, SimReport)


def test_simulation_rejects_bad_inputs():
    ch = ChannelSpec.ge(5e-3, 0.5, 1e-2)
    with pytest.raises(ValueError):
        run_simulation(ms_params(3, 7), ch, 0, seed=1)
    with pytest.raises(ValueError):
        run_simulation(ms_params(3, 7), ch, 100, seed=1, seq=seq_of(50, []))
