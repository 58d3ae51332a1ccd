from itertools import combinations

import numpy as np
import pytest

from streamfec.codes import StreamEncoder, build_codec, midas_params, prc_params
from streamfec.gf import GF
from streamfec.mdsconv import (
    ConvCode,
    RetryExhausted,
    Target,
    burst_targets,
    check_p2_periodic,
    check_two_bursts,
    column_distance_lb,
    gen_strongly_mds,
    meets_target,
    p1_targets,
    recoverable,
    truncated_generator,
)


@pytest.fixture(scope="module")
def code747():
    return gen_strongly_mds(7, 4, 7, burst_targets(3, 7) + p1_targets(7, 3, 7), seed=0)


@pytest.fixture(scope="module")
def code437():
    return gen_strongly_mds(4, 3, 7, p1_targets(7, 2, 8) + burst_targets(2, 8), seed=0)


def test_shape_validation():
    f = GF(16)
    with pytest.raises(ValueError):
        ConvCode(3, 3, 1, f.zeros((1, 3, 0)))
    with pytest.raises(ValueError):
        ConvCode(3, 2, 2, f.zeros((1, 2, 1)))


def test_truncated_generator_blocks(code747):
    g0 = truncated_generator(code747, 0).matrix
    assert np.array_equal(g0, np.concatenate([np.eye(4), np.zeros((4, 3))], axis=1).astype(g0.dtype))
    g2 = truncated_generator(code747, 2).matrix
    n, k = 7, 4
    assert np.array_equal(g2[0:k, 2 * n + k:3 * n], code747.H[1])
    assert not np.any(g2[0:k, 2 * n:2 * n + k])
    assert not np.any(g2[k:2 * k, 0:n])  # below-diagonal blocks vanish
    for r in range(3):
        assert np.array_equal(g2[r * k:(r + 1) * k, r * n:r * n + k], np.eye(k))


def test_generator_encoding_equals_streaming_encoder():
    codec = build_codec(prc_params(3, 7, 6))
    comp = codec.composite()
    j = 9
    rng = np.random.default_rng(0)
    S = comp.gf.random(rng, (j + 1, comp.k))
    G = truncated_generator(comp, j).matrix
    via_g = comp.gf.matmul(S.reshape(-1), G).reshape(j + 1, comp.n)
    enc = StreamEncoder(codec)
    streamed = np.array([enc.encode(s) for s in S])
    assert np.array_equal(via_g, streamed)
    assert np.array_equal(comp.encode(S), streamed)


def test_worked_examples_747(code747):
    burst = [True, True, True, False, False, False, False]
    for i in range(3):
        assert recoverable(code747, burst, i, 6)
    assert check_p2_periodic(code747, 3, 6)
    pat = [i in (0, 3) for i in range(7)]
    assert recoverable(code747, pat, 0, 6)


def test_worked_examples_437(code437):
    for pair in combinations(range(8), 2):
        if 0 in pair:
            pat = [i in pair for i in range(8)]
            assert recoverable(code437, pat, 0, 7)
    assert check_p2_periodic(code437, 2, 7)


def test_empty_targets_returns_first_draw():
    f = GF(16)
    code = gen_strongly_mds(5, 2, 3, seed=42)
    H = f.random(np.random.default_rng([42, 0]), (3, 2, 3))
    assert code.attempt == 0
    assert np.array_equal(code.H, H)


def test_generation_is_deterministic():
    a = gen_strongly_mds(5, 2, 4, p1_targets(4, 3, 5), seed=3)
    b = gen_strongly_mds(5, 2, 4, p1_targets(4, 3, 5), seed=3)
    assert np.array_equal(a.H, b.H)


def test_retry_exhausted_on_infeasible_target():
    impossible = Target.of([0, 1, 2], 2)  # rate 1/2 cannot repair a 3-burst by time 2
    with pytest.raises(RetryExhausted):
        gen_strongly_mds(2, 1, 2, [impossible], seed=0, max_retries=3)


def test_recoverable_trivial_cases(code747):
    clear = [False] * 7
    assert all(recoverable(code747, clear, i, 6) for i in range(7))
    assert not recoverable(code747, [True] * 7, 0, 6)
    with pytest.raises(ValueError):
        recoverable(code747, clear, 5, 3)


def test_recoverable_monotone_under_unerasure(code747):
    rng = np.random.default_rng(1)
    for _ in range(40):
        pat = list(rng.random(7) < 0.5)
        pat[0] = True
        if recoverable(code747, pat, 0, 6):
            for j in range(1, 7):
                if pat[j]:
                    fewer = pat.copy()
                    fewer[j] = False
                    assert recoverable(code747, fewer, 0, 6)


@pytest.mark.parametrize("n,k,m", [(3, 2, 4), (3, 1, 3), (5, 3, 4)])
def test_p1_p2_on_first_draw(n, k, m):
    """A random draw over GF(2^16) behaves Strongly-MDS on small windows."""
    code = gen_strongly_mds(n, k, m, seed=0)
    for j in range(m + 1):
        budget = ((n - k) * (j + 1)) // n
        for size in range(0, budget):
            for rest in combinations(range(1, j + 1), size):
                pat = [i == 0 or i in rest for i in range(j + 1)]
                assert recoverable(code, pat, 0, j)
        if budget:
            burst = [i < budget for i in range(j + 1)]
            assert meets_target(code, Target.of(range(budget), j))
            assert all(recoverable(code, burst, i, j) for i in range(budget))


def test_check_p2_zero_burst(code747):
    assert check_p2_periodic(code747, 0, 6)


def test_two_bursts_reduces_to_single(code747):
    single = meets_target(code747, Target.of(range(3), 6))
    assert check_two_bursts(code747, 3, 0, 3, 6) == single
    with pytest.raises(ValueError):
        check_two_bursts(code747, 3, 1, 2, 6)


def test_two_bursts_on_prc_inner_code():
    codec = build_codec(prc_params(3, 7, 6))
    v = codec.v_code
    assert (v.n, v.k) == (12, 4)
    assert check_two_bursts(v, 3, 1, 3, 5)


def test_two_bursts_lemma_conditions_on_random_code():
    code = gen_strongly_mds(5, 2, 6, seed=0)
    one_minus_r = 3 / 5
    j = 6
    checked = 0
    for B1 in range(1, 5):
        for B2 in range(0, 5):
            if B1 + B2 > one_minus_r * (j + 1):
                continue
            for r in range(B1, int(B1 / one_minus_r) + 1):
                assert check_two_bursts(code, B1, B2, r, j)
                checked += 1
    assert checked > 10


def test_column_distance_bound():
    assert column_distance_lb(2, 1, 0) == 1
    assert column_distance_lb(7, 4, 6) == 4
    assert column_distance_lb(4, 3, 7) == 3
    with pytest.raises(ValueError):
        column_distance_lb(3, 3, 1)


@pytest.mark.parametrize("w", [8, 16, 32])
def test_json_round_trip(w):
    code = gen_strongly_mds(5, 2, 3, seed=7, gf=GF(w))
    back = ConvCode.from_json(code.to_json())
    assert (back.n, back.k, back.m, back.seed, back.gf) == (code.n, code.k, code.m, code.seed, code.gf)
    assert np.array_equal(back.H, code.H)


def test_encode_is_systematic_and_linear(code747):
    f = code747.gf
    rng = np.random.default_rng(2)
    a, b = f.random(rng, (10, 4)), f.random(rng, (10, 4))
    c = f.random(rng, 1)[0] or 1
    X = code747.encode(a)
    assert np.array_equal(X[:, :4], a)
    lhs = code747.encode(f.mul(a, c) ^ b)
    assert np.array_equal(lhs, f.mul(X, c) ^ code747.encode(b))


def test_midas_inner_codes_certified():
    codec = build_codec(midas_params(2, 3, 7))
    assert (codec.v_code.n, codec.v_code.k) == (7, 4)
    assert (codec.u_code.n, codec.u_code.k) == (4, 3)
