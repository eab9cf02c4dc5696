import math

import numpy as np
import pytest

from lib.csit_model import gaps, is_balanced, split_separable, validate_profile
from lib.decomposition import (
    LARGEST_GAP,
    LOWEST_INDEX,
    decompose,
    pair_u0,
    reduce_to_balanced,
)
from lib.errors import DofCsitError, Unbalanced
from lib.region_geometry import dof_region, weights

P3 = validate_profile(3, (0.8, 0.6, 0.2), (0.5, 0.4, 0.7))
Q2 = validate_profile(2, (0.9, 0.5), (0.4, 0.7))
FIG4 = validate_profile(4, (0.7, 0.6, 0.4, 0.3), (0.3, 0.4, 0.7, 0.6))


def _balanced_profiles(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        L = int(rng.integers(1, 9))
        a = rng.random(L)
        yield validate_profile(L, a, rng.permutation(a))


def _random_profiles(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        L = int(rng.integers(1, 9))
        yield validate_profile(L, rng.random(L), rng.random(L))


@pytest.mark.parametrize(
    "pair,expected",
    [
        ((0.7, 0.3), (0.3, 0.4, 0.0, 0.3)),
        ((1.0, 1.0), (1.0, 0.0, 0.0, 0.0)),
        ((0.0, 1.0), (0.0, 0.0, 1.0, 0.0)),
    ],
)
def test_decompose_single_subband(pair, expected):
    (use,) = decompose(validate_profile(1, (pair[0],), (pair[1],)))
    assert (use.pp, use.pn, use.np, use.nn) == pytest.approx(expected)


def test_decompose_sums_match_weights():
    for p in _random_profiles(1, 200):
        uses = decompose(p)
        w = weights(p)
        assert math.fsum(u.pp + u.pn + u.np + u.nn for u in uses) == pytest.approx(p.L, abs=1e-12)
        assert all(min(u.pp, u.pn, u.np, u.nn) >= 0.0 for u in uses)
        assert all(u.pn == 0.0 or u.np == 0.0 for u in uses)
        assert math.fsum(u.pp for u in uses) == pytest.approx(w.r_bar, abs=1e-12)
        total_pn = math.fsum(u.pn for u in uses)
        total_np = math.fsum(u.np for u in uses)
        assert 2.0 * min(total_pn, total_np) == pytest.approx(w.r_hat, abs=1e-9)


def test_pair_u0_three_subbands():
    schedule = pair_u0(P3)
    assert [(m.id, m.donor, m.receiver) for m in schedule.messages] == [(1, 1, 3), (2, 2, 3)]
    assert [m.rate_prelog for m in schedule.messages] == pytest.approx([0.3, 0.2])
    assert schedule.layers(3) == (1, 2)
    assert schedule.layers(1) == (1,)
    assert schedule.tau(3) == pytest.approx([0.3, 0.2])


def test_pair_u0_matched_profile_is_empty():
    schedule = pair_u0(validate_profile(3, (0.3, 0.5, 0.9), (0.3, 0.5, 0.9)))
    assert schedule.messages == ()
    assert schedule.per_subband == {}
    assert schedule.total_rate == 0.0


def test_pair_u0_two_subbands_single_message():
    schedule = pair_u0(validate_profile(2, (0.7, 0.3), (0.3, 0.7)))
    (message,) = schedule.messages
    assert message.rate_prelog == pytest.approx(0.4)
    assert (message.donor, message.receiver) == (1, 2)


def test_pair_u0_rejects_unbalanced():
    with pytest.raises(Unbalanced):
        pair_u0(Q2)


def test_pair_u0_totals_and_layer_sums():
    for p in _balanced_profiles(8, 300):
        schedule = pair_u0(p)
        s = gaps(p)
        assert schedule.total_rate == pytest.approx(min(s.total_plus, s.total_minus), abs=1e-9)
        assert schedule.total_rate == pytest.approx(weights(p).r_hat / 2.0, abs=1e-9)
        assert len(schedule.messages) <= max(len(s.plus_set) + len(s.minus_set) - 1, 0)
        for j, ids in schedule.per_subband.items():
            assert math.fsum(schedule.tau(j)) == pytest.approx(abs(p.a[j - 1] - p.b[j - 1]), abs=1e-9)
        for m in schedule.messages:
            assert m.rate_prelog > 0
            assert m.donor in s.plus_set and m.receiver in s.minus_set
            appearances = [j for j, ids in schedule.per_subband.items() if m.id in ids]
            assert appearances == sorted([m.donor, m.receiver])


def test_inseparable_instance_uses_every_pairing_step():
    assert split_separable(FIG4) == [frozenset({1, 2, 3, 4})]
    schedule = pair_u0(FIG4)
    assert len(schedule.messages) == 3
    assert [(m.donor, m.receiver) for m in schedule.messages] == [(1, 3), (1, 4), (2, 4)]
    assert schedule.tau(4) == pytest.approx([0.1, 0.2])


def test_reduce_largest_gap_q2():
    r = reduce_to_balanced(Q2)
    assert r.side == "a"
    assert r.reduced.a == pytest.approx((0.6, 0.5))
    assert r.reduced.b == Q2.b
    assert r.deltas == {1: pytest.approx(0.3), 2: pytest.approx(0.0)}
    assert is_balanced(r.reduced)


def test_reduce_lowest_index_q2_takes_the_other_option():
    r = reduce_to_balanced(Q2, policy=LOWEST_INDEX)
    assert r.reduced.a == pytest.approx((0.9, 0.2))
    assert r.policy == LOWEST_INDEX
    assert is_balanced(r.reduced)


def test_reduce_single_subband():
    r = reduce_to_balanced(validate_profile(1, (0.8,), (0.5,)))
    assert r.reduced.a == (0.5,)


def test_reduce_mirrors_for_user_two():
    r = reduce_to_balanced(Q2.swapped())
    assert r.side == "b"
    assert r.reduced.b == pytest.approx((0.6, 0.5))
    assert r.reduced.a == Q2.b


def test_reduce_balanced_is_identity():
    r = reduce_to_balanced(P3)
    assert r.reduced == P3
    assert r.side is None
    assert set(r.deltas.values()) == {0.0}


def test_reduce_unknown_policy():
    with pytest.raises(DofCsitError):
        reduce_to_balanced(Q2, policy="random")


@pytest.mark.parametrize("policy", [LARGEST_GAP, LOWEST_INDEX])
def test_reduction_invariants(policy):
    for p in _random_profiles(42, 300):
        r = reduce_to_balanced(p, policy=policy)
        assert is_balanced(r.reduced)
        assert all(d >= 0.0 for d in r.deltas.values())
        assert math.fsum(r.deltas.values()) == pytest.approx(p.L * abs(p.a_e - p.b_e), abs=1e-9)
        lowered = r.reduced.a if r.side == "a" else r.reduced.b
        source = p.a if r.side == "a" else p.b
        assert all(x <= y + 1e-15 for x, y in zip(lowered, source))
        assert dof_region(r.reduced).min_avg == pytest.approx(dof_region(p).min_avg, abs=1e-9)
