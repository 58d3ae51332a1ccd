"""End-to-end acceptance checks, one printed CRITERION line each.

Run alone with ``python tests/test_acceptance.py`` or ``pytest tests/test_acceptance.py -s``.
"""
import sys
from fractions import Fraction
from itertools import combinations

import pytest

from streamfec.analysis import (
    BurstClass,
    class_fractions,
    classify_bursts,
    erlc_points,
    loss_rate_stderr,
    midas_n,
    bound_n,
    run_simulation,
)
from streamfec.channels import (
    ChannelSpec,
    bad_state_runs,
    enumerate_ci_window,
    enumerate_cii_events,
    ge_loss_rate,
    ge_sample,
)
from streamfec.codes import (
    build_codec,
    mds_params,
    midas_params,
    ms_params,
    prc_optimal,
    prc_params,
    prc_rate,
)
from streamfec.decoders import Status, decode_prc_event, generic_decode, prc_predicted_loss, run_pattern

SEED = 1
GOOD = {Status.RECEIVED, Status.RECOVERED_ON_TIME}


def test_criterion_1_midas_exhaustive(criterion):
    spec = midas_params(2, 3, 7)
    codec = build_codec(spec)
    pats = enumerate_ci_window(2, 3, 7)
    bad, disagree = [], []
    for pat in pats:
        ex, _ = run_pattern(codec, pat, mode="exact")
        gen = generic_decode(codec, pat)
        if set(ex.status.values()) - GOOD:
            bad.append(pat)
        if ex.status != gen.status:
            disagree.append(pat)
    ok = spec.rate == Fraction(7, 11) and not bad and not disagree
    criterion(1, ok, f"MiDAS(2,3,7) R={spec.rate}: {len(pats)} patterns, {len(bad)} with a loss, "
                     f"{len(disagree)} decoder/oracle disagreements")


def test_criterion_2_ms_guarantee_and_fragility(criterion):
    spec = ms_params(3, 7)
    codec = build_codec(spec)
    bursts = [p for p in enumerate_ci_window(1, 3, 7)]
    failed = sum(bool(run_pattern(codec, p, mode="exact")[0].missed) for p in bursts)
    lost_pairs = []
    for j in range(1, 8):
        pat = [i in (0, j) for i in range(8)]
        if generic_decode(codec, pat).missed:
            lost_pairs.append(j)
    ok = spec.rate == Fraction(7, 10) and failed == 0 and bool(lost_pairs)
    criterion(2, ok, f"MS(B=3,T=7) R={spec.rate}: {len(bursts)} burst patterns, {failed} failed; "
                     f"isolated pairs (0,j) lost for j in {lost_pairs}")


def test_criterion_3_baseline_strongly_mds(criterion):
    spec = mds_params(12, rate="12/23")
    codec = build_codec(spec)
    comp = codec.composite()
    subsets = list(combinations(range(13), 6))
    failed = []
    for S in subsets:
        pat = [i in S for i in range(13)]
        if generic_decode(codec, pat).missed:
            failed.append(S)
    burst_fail = 0
    for start in range(7):
        pat = [start <= i < start + 6 for i in range(13)]
        ex, _ = run_pattern(codec, pat, mode="exact")
        burst_fail += bool(ex.missed)
    ok = ((comp.n, comp.k, spec.T) == (23, 12, 12) and spec.B == spec.N == 6
          and len(subsets) == 1716 and not failed and not burst_fail)
    criterion(3, ok, f"({comp.n},{comp.k},{spec.T}) B=N={spec.B}: {len(subsets)} subsets, {len(failed)} failed; "
                     f"{burst_fail} of 7 length-6 bursts failed")


def test_criterion_4_prc_partial_recovery(criterion):
    spec = prc_params(3, 7, 6)
    codec = build_codec(spec)
    events = enumerate_cii_events(3, 7)
    over, outside, missing = [], [], []
    for _, b, iso in events:
        out = decode_prc_event(codec, 0, b, iso)
        expect = prc_predicted_loss(spec, b, iso)
        if len(out.missed) > 1:
            over.append((b, iso))
        if out.missed and out.missed != [expect]:
            outside.append((b, iso, out.missed, out.status[out.missed[0]].name))
        if expect is not None and out.missed != [expect]:
            missing.append((b, iso))
    ok = spec.rate == Fraction(5, 9) and not over and not outside and not missing
    criterion(4, ok, f"PRC(3,7,6) R={spec.rate}: {len(events)} events, {len(over)} with >1 loss, "
                     f"{len(missing)} predicted losses absent, losses outside the predicted windows: {outside}")


def test_criterion_5_tradeoff(criterion):
    T = 100
    worst = []
    for R in (Fraction(1, 2), Fraction(3, 5), Fraction(7, 10)):
        gaps = [bound_n(R, T, B) - midas_n(R, T, B) for B in range(1, T + 1)]
        erlc_ok = all(N <= midas_n(R, T, B) for B, N in erlc_points(R, T))
        equal = all(N == midas_n(R, T, B) for B, N in erlc_points(R, T))
        worst.append((R, min(gaps), max(gaps), erlc_ok, equal))
    ok = all(lo >= 0 and hi <= 1 and e for _, lo, hi, e, _ in worst) and worst[0][4]
    detail = "; ".join(f"R={R}: gap in [{lo},{hi}] erlc<=midas={e} equal={eq}" for R, lo, hi, e, eq in worst)
    criterion(5, ok, detail)


TABLE2_T12 = {BurstClass.BURST_ONLY: 0.9642, BurstClass.BURST_PLUS_ISOLATED: 0.0268,
              BurstClass.BURST_PLUS_MULTI: 0.0032, BurstClass.GAP_LT_T: 0.0058}


def test_criterion_6_channel_statistics(criterion):
    ch = ChannelSpec.ge(5e-4, 0.5, 1e-3)
    seq = ge_sample(ch, 10 ** 7, SEED)
    rate = seq.n_erased / seq.length
    se = loss_rate_stderr(seq)
    rate_ok = abs(rate - 1.998e-3) < 3 * se and ge_loss_rate(ch) == pytest.approx(1.998e-3, rel=1e-3)
    fr = class_fractions(classify_bursts(seq, 12))
    frac_ok = all(abs(fr[c] - v) <= 0.02 for c, v in TABLE2_T12.items())
    ch2 = ChannelSpec.ge(5e-5, 0.2, 1e-2)
    seq2 = ge_sample(ch2, 10 ** 8, SEED)
    bpi = class_fractions(classify_bursts(seq2, 50))[BurstClass.BURST_PLUS_ISOLATED]
    bpi_ok = abs(bpi - 0.3698) <= 0.02
    shown = ", ".join(f"{c.value}={fr[c]:.4f}" for c in TABLE2_T12)
    criterion(6, rate_ok and frac_ok and bpi_ok,
              f"loss {rate:.4e} (3SE={3 * se:.2e}); T=12 fractions {shown}; T=50 BURST_PLUS_ISOLATED={bpi:.4f}")


def test_criterion_7_fig5_ordering(criterion):
    codes = {"midas": midas_params(2, 9, 12).padded_to("12/23"),
             "baseline": mds_params(12, rate="12/23"),
             "ms": ms_params(11, 12)}
    res: dict[float, dict[str, float]] = {}
    for eps in (1e-3, 5e-3, 1e-2):
        ch = ChannelSpec.ge(5e-4, 0.5, eps)
        seq = ge_sample(ch, 10 ** 7, SEED)
        res[eps] = {k: run_simulation(sp, ch, seq.length, SEED, seq=seq).residual_loss_rate
                    for k, sp in codes.items()}
    top = res[1e-2]
    order_ok = top["midas"] < top["baseline"] and top["midas"] < top["ms"]
    ms = [res[e]["ms"] for e in (1e-3, 5e-3, 1e-2)]
    mono = ms[0] < ms[1] < ms[2]
    criterion(7, order_ok and mono,
              f"eps=1e-2 midas={top['midas']:.3e} baseline={top['baseline']:.3e} ms={top['ms']:.3e}; "
              f"ms over eps {', '.join(f'{x:.3e}' for x in ms)}")


def test_criterion_8_fig6_ordering(criterion):
    ch = ChannelSpec.ge(5e-5, 0.2, 1e-2)
    seq = ge_sample(ch, 10 ** 8, SEED)
    prc = prc_params(25, 50, 46, N=4)
    midas = midas_params(4, 30, 50).padded_to("50/88")
    r_prc = run_simulation(prc, ch, seq.length, SEED, seq=seq).residual_loss_rate
    r_mid = run_simulation(midas, ch, seq.length, SEED, seq=seq).residual_loss_rate
    criterion(8, r_prc < r_mid,
              f"PRC(B=25,delta=46,N=4) R={float(prc.rate):.3f}: {r_prc:.3e} vs "
              f"MiDAS(N=4,B=30) R={float(midas.rate):.3f}: {r_mid:.3e}")


def test_criterion_9_prc_shift_cross_check(criterion):
    auto = prc_params(25, 50)
    star_delta, star_rate = prc_optimal(25, 50)
    discrete = max(range(27, 51), key=lambda d: prc_rate(25, 50, d))
    ok = (auto.delta == star_delta == discrete == 46
          and auto.rate == star_rate == prc_rate(25, 50, discrete) == Fraction(210, 340))
    criterion(9, ok, f"auto delta={auto.delta} rate={auto.rate}; closed form {star_delta}, {star_rate}; "
                     f"discrete argmax {discrete}")


def test_criterion_10_mean_burst_lengths(criterion):
    a = bad_state_runs(ge_sample(ChannelSpec.ge(5e-4, 0.5, 1e-3), 10 ** 7, SEED)).mean()
    b = bad_state_runs(ge_sample(ChannelSpec.ge(5e-5, 0.2, 1e-2), 10 ** 8, SEED)).mean()
    criterion(10, abs(a - 2) <= 0.1 and abs(b - 5) <= 0.1,
              f"beta=0.5 mean run {a:.3f} (target 2); beta=0.2 mean run {b:.3f} (target 5)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
