import math

import numpy as np
import pytest

from fel.errors import ConditionViolation, PointCapExceeded
from fel.ifs import (Similitude, apply_similitude, build, essential_fixed_points,
                     fixed_point, validate)
from fel.presets import load_maps

from helpers import (make_system, overlapping_interval_maps,
                     perturbed_gasket_maps, rotated_gasket_maps)

SQ3 = math.sqrt(3.0)


def closed_form_counts(system, up_to):
    """Lemma-1 style closed form from the measured v0, v1."""
    M = system.M
    v0, v1 = system.vertex_count(0), system.vertex_count(1)
    k0 = M * v0 - v1
    return [M**m * (v0 - k0 / (M - 1)) + k0 / (M - 1) for m in range(up_to + 1)]


class TestSimilitude:
    def test_apply_examples(self):
        maps, _ = load_maps("gasket2")
        assert np.allclose(apply_similitude(maps[1], [0.0, 0.0]), [0.5, 0.0])
        assert np.allclose(apply_similitude(maps[2], [1.0, 0.0]), [0.75, SQ3 / 4])

    def test_apply_fixed_point_is_fixed(self):
        maps, _ = load_maps("snowflake")
        for s in maps:
            x = fixed_point(s)
            assert np.linalg.norm(s.apply(x) - x) <= 1e-10 * (1 + np.linalg.norm(x))

    def test_fixed_points_gasket(self):
        maps, _ = load_maps("gasket2")
        assert np.allclose(fixed_point(maps[0]), [0.0, 0.0])
        assert np.allclose(fixed_point(maps[2]), [0.5, SQ3 / 2])

    def test_fixed_point_linear_map_origin(self):
        maps, _ = load_maps("snowflake")
        assert np.allclose(fixed_point(maps[6]), [0.0, 0.0])

    def test_contraction_exact_ratio(self):
        rng = np.random.default_rng(3)
        for name in ("gasket2", "gasket3", "snowflake"):
            maps, _ = load_maps(name)
            x = rng.normal(size=maps[0].dim)
            y = rng.normal(size=maps[0].dim)
            for s in maps:
                lhs = np.linalg.norm(s.apply(x) - s.apply(y))
                rhs = np.linalg.norm(x - y) / s.scale
                assert abs(lhs - rhs) <= 1e-12 * rhs

    def test_rejects_bad_rotation(self):
        with pytest.raises(ValueError):
            Similitude(scale=2.0, rotation=np.array([[1.0, 0.5], [0.0, 1.0]]),
                       translation=np.zeros(2))
        with pytest.raises(ValueError):
            Similitude(scale=0.5, rotation=np.eye(2), translation=np.zeros(2))


class TestEssentialFixedPoints:
    def test_gasket_all_essential(self):
        maps, _ = load_maps("gasket2")
        assert len(essential_fixed_points(maps)) == 3

    def test_snowflake_center_excluded(self):
        maps, _ = load_maps("snowflake")
        pts = essential_fixed_points(maps)
        assert len(pts) == 6
        assert np.linalg.norm(pts, axis=1).min() > 0.9  # origin not among them

    def test_single_essential_point_rejected(self):
        maps = [
            Similitude(scale=2.0, rotation=np.eye(2), translation=np.zeros(2)),
            Similitude(scale=2.0, rotation=-np.eye(2), translation=np.zeros(2)),
        ]
        with pytest.raises(ConditionViolation) as err:
            essential_fixed_points(maps)
        assert err.value.condition == 1

    def test_duplicate_maps_rejected_by_build(self):
        maps, _ = load_maps("gasket2")
        with pytest.raises(ValueError, match="identical"):
            build([maps[0], maps[0], maps[1]], 2)


class TestBuild:
    def test_gasket_level_counts(self, gasket2_l8):
        assert gasket2_l8.vertex_count(1) == 6
        assert gasket2_l8.vertex_count(2) == 15

    def test_snowflake_level1_count(self, snowflake_l5):
        assert snowflake_l5.vertex_count(1) == 6 * 7 - 12

    @pytest.mark.parametrize("fixture", ["gasket2_l8", "gasket3_l8", "snowflake_l5"])
    def test_counts_match_closed_form(self, fixture, request):
        system = request.getfixturevalue(fixture)
        expected = closed_form_counts(system, system.max_level)
        for m in range(system.max_level + 1):
            assert system.vertex_count(m) == round(expected[m])

    def test_interval_is_valid_nested_fractal(self, interval_l5):
        assert interval_l5.validation.all_ok
        assert [interval_l5.vertex_count(m) for m in range(4)] == [2, 3, 5, 9]

    def test_symplex_count_and_addresses(self, gasket2_l8):
        for m in (1, 2, 3):
            assert gasket2_l8.cells[m].shape == (3**m, 3)
        addr = [gasket2_l8.cell_address(2, k) for k in range(9)]
        assert len(set(addr)) == 9
        assert addr[0] == (1, 1) and addr[-1] == (3, 3)

    def test_monotone_inclusion(self, gasket2_l8):
        sys_ = gasket2_l8
        for m in range(sys_.max_level):
            lifted = sys_.promote[m]
            assert lifted.shape == (sys_.vertex_count(m),)
            np.testing.assert_allclose(
                sys_.points[m + 1][lifted], sys_.points[m], atol=1e-12
            )

    def test_points_in_symplex_counts(self, snowflake_l5):
        # #(V_n ∩ S) = #V_{n-m} for every level-m symplex
        for m in (1, 2):
            for n in (3, 4):
                for s in (0, snowflake_l5.M**m - 1):
                    got = len(snowflake_l5.points_in_symplex(m, s, n))
                    assert got == snowflake_l5.vertex_count(n - m)

    def test_counting_measure_weight(self, gasket2_l8):
        assert gasket2_l8.counting_measure_weight(1) == pytest.approx(1 / 6)
        assert gasket2_l8.counting_measure_weight(2) == pytest.approx(1 / 15)
        assert gasket2_l8.counting_measure_weight(0) == pytest.approx(1 / 3)
        with pytest.raises(ValueError):
            gasket2_l8.counting_measure_weight(99)

    def test_point_cap(self):
        maps, _ = load_maps("gasket2")
        with pytest.raises(PointCapExceeded):
            build(maps, 9, max_points=100)

    def test_build_reproducible_bitwise(self):
        a = make_system("gasket2", 4)
        b = make_system("gasket2", 4)
        for m in range(5):
            assert np.array_equal(a.points[m], b.points[m])
            assert np.array_equal(a.cells[m], b.cells[m])

    def test_count_vertices_agrees_with_stored(self):
        sys_small = make_system("gasket2", 3)
        counts = sys_small.count_vertices(8)
        full = make_system("gasket2", 8)
        assert counts == [full.vertex_count(m) for m in range(9)]

    def test_locate_roundtrip(self, gasket2_l8):
        ids = gasket2_l8.locate(gasket2_l8.points[2], 2)
        assert np.array_equal(ids, np.arange(gasket2_l8.vertex_count(2)))
        assert gasket2_l8.locate(np.array([[5.0, 5.0]]), 2)[0] == -1


class TestNeighborhoods:
    def test_self_membership_and_symmetry(self, gasket2_l8):
        hood = gasket2_l8.symplex_neighborhoods(2)
        for s, members in enumerate(hood.members):
            assert s in members
            for t in members:
                assert s in hood.of(t)

    def test_gasket_level1_all_touch(self, gasket2_l8):
        hood = gasket2_l8.symplex_neighborhoods(1)
        for s in range(3):
            assert list(hood.of(s)) == [0, 1, 2]

    def test_snowflake_center_touches_all(self, snowflake_l5):
        hood = snowflake_l5.symplex_neighborhoods(1)
        # the 7th map is the center cell
        assert len(hood.of(6)) == 7

    def test_sstar_guarantee_holds_at_m1(self, gasket2_l8, snowflake_l5):
        # Brute-force all-pairs check of the S_* localization at m = 1.
        for system, n in ((gasket2_l8, 4), (snowflake_l5, 3)):
            hood = system.symplex_neighborhoods(1)
            members = {s: set(system.points_in_symplex(1, s, n).tolist())
                       for s in range(system.M)}
            pts = system.points[n]
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
            ii, jj = np.nonzero((d < system.c0 / system.L) & (d > 0))
            for x, y in zip(ii.tolist(), jj.tolist()):
                ok = any(
                    x in members[s] and any(y in members[t] for t in hood.of(s))
                    for s in range(system.M)
                )
                assert ok

    @staticmethod
    def _sstar_violations(system, m, n):
        hood = system.symplex_neighborhoods(m)
        members = {s: set(system.points_in_symplex(m, s, n).tolist())
                   for s in range(system.M**m)}
        pts = system.points[n]
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        ii, jj = np.nonzero((d < system.c0 / system.L**m) & (d > 0))
        bad = []
        for x, y in zip(ii.tolist(), jj.tolist()):
            ok = any(
                any(y in members[t] for t in hood.of(s))
                for s in range(system.M**m)
                if x in members[s]
            )
            if not ok:
                bad.append((x, y))
        return bad

    def test_sstar_guarantee_clean_at_small_scale(self, gasket2_l8):
        # All-pairs scan to level 4 finds no pair violating the S_* guarantee.
        for m in (1, 2):
            for n in (3, 4):
                assert not self._sstar_violations(gasket2_l8, m, n)

    def test_sstar_guarantee_fails_at_m2_n5(self, gasket2_l8):
        # Known defect of the vertex-sharing neighborhood: 2-cells that touch
        # nowhere carry point pairs closer than c0/L^2 once both endpoints are
        # edge-interior (first at n = 5).  Pins the geometry that forced the
        # reach-based candidate filter in the pair enumeration.
        bad = self._sstar_violations(gasket2_l8, 2, 5)
        assert bad
        pts = gasket2_l8.points[5]
        x, y = bad[0]
        assert np.linalg.norm(pts[x] - pts[y]) < gasket2_l8.c0 / 4


class TestValidate:
    @pytest.mark.parametrize("name", ["gasket2", "gasket3", "snowflake"])
    def test_presets_pass(self, name, request):
        fixture = {"gasket2": "gasket2_l8", "gasket3": "gasket3_l8",
                   "snowflake": "snowflake_l5"}[name]
        system = request.getfixturevalue(fixture)
        report = system.validation
        assert report.all_ok
        assert report.nesting_depth == 3

    def test_perturbed_gasket_fails_symmetry(self):
        # A horizontal slide of psi_3 keeps the three cells meeting in single
        # shared vertices (nesting survives) but makes V_0 scalene, so the
        # symmetry condition is what breaks.
        maps = perturbed_gasket_maps(0.1, 0.0)
        with pytest.raises(ConditionViolation) as err:
            build(maps, 3)
        assert err.value.condition == 5
        system = build(maps, 3, run_validation=False)
        report = validate(system)
        assert report.nesting_ok
        assert not report.symmetry_ok
        assert report.first_violation() == 5

    def test_overlapping_interval_fails_nesting(self):
        # The middle copy of [0,1] overlaps its neighbors on whole segments,
        # producing coincident non-vertex points at depth 1.
        system = build(overlapping_interval_maps(), 3, run_validation=False)
        report = validate(system)
        assert not report.nesting_ok
        assert report.first_violation() == 3
        with pytest.raises(ConditionViolation) as err:
            build(overlapping_interval_maps(), 3)
        assert err.value.condition == 3

    def test_rotated_gasket_fails_connectivity(self):
        # psi_3 rotated: its fixed point stops being essential and its cell
        # floats free of the other two.
        system = build(rotated_gasket_maps(), 3, run_validation=False)
        assert system.M0 == 2
        report = validate(system)
        assert report.nesting_ok
        assert not report.connectivity_ok
        assert report.first_violation() == 4
