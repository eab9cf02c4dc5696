import numpy as np
import pytest

from lib.csit_model import validate_profile
from lib.errors import NegativeWeight, OrderViolation, OutOfRange
from lib.region_geometry import (
    Weights,
    compose_weighted,
    composition_residual,
    composition_stages,
    contains,
    dof_region,
    dominant_face_point,
    scheme_channel_uses,
    sum_dof_from_uses,
    sum_dof_optimal,
    sum_dof_suboptimal,
    weights,
)

FIG4 = validate_profile(4, (0.7, 0.6, 0.4, 0.3), (0.3, 0.4, 0.7, 0.6))
FIG5A = validate_profile(4, (0.7, 0.6, 0.4, 0.3), (0.7, 0.6, 0.4, 0.3))
FIG5B = validate_profile(4, (1, 1, 0, 0), (0, 0, 1, 1))


def _random_profiles(seed, count, max_l=16):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        L = int(rng.integers(1, max_l + 1))
        yield validate_profile(L, rng.random(L), rng.random(L))


@pytest.mark.parametrize("profile", [FIG4, FIG5A, FIG5B], ids=["fig4", "fig5a", "fig5b"])
def test_remark_profiles_share_the_same_corners(profile):
    region = dof_region(profile)
    assert region.sum_bound == pytest.approx(1.5, abs=1e-12)
    expected = [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 1.0)]
    assert len(region.vertices) == len(expected)
    for got, want in zip(region.vertices, expected):
        assert got == pytest.approx(want, abs=1e-12)


def test_perfect_csit_region_is_unit_square():
    region = dof_region(validate_profile(3, (1, 1, 1), (1, 1, 1)))
    assert region.vertices == [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def test_fixed_pn_state_has_sum_dof_one():
    region = dof_region(validate_profile(1, (1,), (0,)))
    assert region.sum_bound == 1.0
    assert region.vertices == [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]


def test_contains():
    region = dof_region(FIG4)
    assert contains(region, (1.0, 0.5), tol=1e-9)
    assert not contains(region, (1.0, 0.5 + 1e-3), tol=1e-9)
    assert contains(region, (0.0, 0.0))
    assert not contains(region, (-0.1, 0.2))


def test_region_vertices_satisfy_every_halfplane():
    for p in _random_profiles(5, 200):
        region = dof_region(p)
        for vertex in region.vertices:
            assert contains(region, vertex, tol=1e-12)


def test_weights_examples():
    assert weights(FIG4).as_tuple() == pytest.approx((1.4, 1.2, 1.4, 0.0), abs=1e-12)
    w = weights(FIG5A)
    assert (w.r_bar, w.r_hat, w.r_tilde) == pytest.approx((2.0, 0.0, 2.0), abs=1e-12)
    w = weights(FIG5B)
    assert (w.r_bar, w.r_hat, w.r_tilde) == pytest.approx((0.0, 4.0, 0.0), abs=1e-12)


def test_weight_identities_on_random_profiles():
    for p in _random_profiles(2024, 1000):
        w = weights(p)
        assert min(w.as_tuple()) >= 0.0
        assert w.r_bar + w.r_hat + w.r_tilde == pytest.approx(p.L, abs=1e-9)
        assert w.r_bar + w.r_hat / 2.0 == pytest.approx(min(sum(p.a), sum(p.b)), abs=1e-9)


def test_composition_matches_direct_region():
    for p in _random_profiles(99, 1000):
        composed = compose_weighted(weights(p), p.L)
        direct = dof_region(p)
        assert composition_residual(p) <= 1e-9
        assert len(composed.vertices) == len(direct.vertices)


def test_compose_weighted_fig4_corners():
    region = compose_weighted(weights(FIG4), 4)
    assert region.corner_points[0] == pytest.approx((1.0, 0.5), abs=1e-12)
    assert region.corner_points[1] == pytest.approx((0.5, 1.0), abs=1e-12)


def test_compose_weighted_basis_regions():
    square = compose_weighted(Weights(3.0, 0.0, 0.0, 0.0), 3)
    assert square.vertices == [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    simplex = compose_weighted(Weights(0.0, 0.0, 3.0, 0.0), 3)
    assert simplex.vertices == [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]


def test_compose_weighted_rejects_negative_weight():
    with pytest.raises(NegativeWeight):
        compose_weighted(Weights(1.0, -0.1, 1.1, 0.0), 2)


def test_composition_stages_fig4():
    stages = composition_stages(weights(FIG4), 4)
    assert stages.pp_corner == pytest.approx((0.35, 0.35))
    assert stages.pn_np_corners[0] == pytest.approx((0.5, 0.65))
    assert stages.final_corners[0] == pytest.approx((0.5, 1.0))
    assert stages.final_corners[1] == pytest.approx((1.0, 0.5))


def test_dominant_face_point():
    region = dof_region(FIG4)
    assert dominant_face_point(region, 1.0) == pytest.approx((1.0, 0.5))
    assert dominant_face_point(region, 0.0) == pytest.approx((0.5, 1.0))
    d1, d2 = dominant_face_point(region, 0.3)
    assert d1 + d2 == pytest.approx(region.sum_bound)
    with pytest.raises(OutOfRange):
        dominant_face_point(region, 1.5)


def test_region_is_symmetric_under_user_swap():
    for p in _random_profiles(17, 100):
        direct, swapped = dof_region(p), dof_region(p.swapped())
        mirrored = [x for d1, d2 in reversed(direct.vertices[1:]) for x in (d2, d1)]
        assert mirrored == pytest.approx([x for v in swapped.vertices[1:] for x in v])


def test_raising_weaker_user_never_shrinks_region():
    p = validate_profile(3, (0.9, 0.8, 0.7), (0.1, 0.5, 0.2))
    before = dof_region(p).min_avg
    after = dof_region(validate_profile(3, p.a, (0.4, 0.5, 0.2))).min_avg
    assert after >= before


def test_sum_dof_closed_forms():
    assert sum_dof_optimal(0.0, 1.0) == 1.5
    assert sum_dof_suboptimal(0.0, 1.0) == 4.0 / 3.0
    assert sum_dof_optimal(0.3, 0.7) == pytest.approx(1.5, abs=1e-12)
    assert sum_dof_suboptimal(0.3, 0.7) == pytest.approx(1.5, abs=1e-12)
    assert sum_dof_optimal(1.0, 1.0) == 2.0
    assert sum_dof_suboptimal(1.0, 1.0) == 2.0


def test_sum_dof_order_violation():
    with pytest.raises(OrderViolation):
        sum_dof_optimal(0.7, 0.3)
    with pytest.raises(OrderViolation):
        sum_dof_suboptimal(0.7, 0.3)
    with pytest.raises(OutOfRange):
        sum_dof_optimal(0.2, 1.5)


def test_optimal_dominates_suboptimal_on_grid():
    for k in range(101):
        for i in range(k + 1):
            alpha, beta = i / 100, k / 100
            d_opt, d_sub = sum_dof_optimal(alpha, beta), sum_dof_suboptimal(alpha, beta)
            if 3 * k - i <= 200:
                assert d_opt == pytest.approx(d_sub, abs=1e-12)
            else:
                assert d_opt - d_sub > 1e-12


@pytest.mark.parametrize("alpha,beta", [(0.0, 1.0), (0.3, 0.7), (0.2, 0.9), (0.0, 0.0), (1.0, 1.0)])
def test_channel_use_breakdown_reproduces_closed_forms(alpha, beta):
    uses = scheme_channel_uses(alpha, beta)
    assert sum_dof_from_uses(uses["optimal"]) == pytest.approx(sum_dof_optimal(alpha, beta), abs=1e-12)
    assert sum_dof_from_uses(uses["suboptimal"]) == pytest.approx(sum_dof_suboptimal(alpha, beta), abs=1e-12)
    assert [u.technique for u in uses["suboptimal"]] == ["ZFBF", "MAT", "FDMA"]
