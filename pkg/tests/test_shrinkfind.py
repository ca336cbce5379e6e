import numpy as np
import pytest

from bcres.cyclealg import cycle_matrices, linear_cycle, word_orbit
from bcres.shrinkfind import (
    CURVES, HypothesisError, NoLocusError, NoRootError, _line_angle, _scaled_det, build_report,
    border_collision_trace, delta_ratio_residual, find_shrinking_point, intersection_point,
    saddle_node_trace, shrink_residual, variants,
)
from bcres.symbolic import SymbolWord, rotational_word

from conftest import BOX_2_7, BOX_2_7_LOWER

W27 = rotational_word(2, 2, 7)


def test_variants_are_flips():
    v = variants(W27)
    ld = 2 * 4 % 7
    assert v["S"] == W27
    assert v["check"] == W27.flip(0) and v["hat"] == W27.flip(ld)
    assert str(v["check"]) == "RRRRLRR"


def test_shrink_residual_examples(plane_c0, sp_2_7):
    a, b = shrink_residual(plane_c0, W27, *sp_2_7.location)
    assert abs(a) <= 1e-10 and abs(b) <= 1e-10
    a, b = shrink_residual(plane_c0, W27, 0.287, 0.95)
    assert abs(a) > 1e-3 and abs(b) > 1e-3


def test_terminating_roots_are_excluded(plane_c0):
    # the residuals vanish as s_R -> 1 at omega = 2/7, but that root is discarded
    a, b = shrink_residual(plane_c0, W27, 2 / 7, 1 - 1e-9)
    assert abs(a) < 1e-8 and abs(b) < 1e-8
    with pytest.raises(NoRootError):
        find_shrinking_point(plane_c0, W27, ((0.27, 0.30), (0.97, 0.99999999)))


def test_no_root_in_box(plane_c0):
    with pytest.raises(NoRootError):
        find_shrinking_point(plane_c0, W27, ((0.40, 0.45), (0.50, 0.55)))


def test_shrinking_point_structure(sp_2_7):
    sp = sp_2_7
    assert sp.location == pytest.approx((0.28796433865, 0.88218690802), abs=1e-9)
    for key in ("det_P_S", "det_P_S_shift", "t_0", "t_ld", "det_I_minus_M_S", "max_det_P_cyclic"):
        assert sp.residuals[key] <= 1e-9, key
    tv = sp.t_values
    assert tv["d"] < 0 and tv["(l-1)d"] < 0 and tv["-d"] > 0 and tv["(l+1)d"] > 0
    assert sp.sign_pattern and sp.admissible
    assert sp.min_distance > 1e-6
    assert delta_ratio_residual(sp) <= 1e-6


def test_location_does_not_depend_on_nonlinearity(sp_2_7, sp_2_7_linear):
    assert np.allclose(sp_2_7.location, sp_2_7_linear.location, atol=1e-12)
    assert sp_2_7_linear.k0 == 0.0 and sp_2_7_linear.orientation == "linear"


def test_cyclic_singularity(sp_2_7, plane_c0):
    lin = plane_c0.map_at(*sp_2_7.location, 1.0)
    for i in range(7):
        assert abs(_scaled_det(cycle_matrices(lin, W27.shift(i)).P)) <= 1e-8


def test_k0_along_axis(sp_2_7):
    sp = sp_2_7
    assert sp.k0_richardson_rel <= 1e-4
    assert sp.k0_tilde == pytest.approx(-sp.k0, rel=1e-4)
    assert sp.k0 == pytest.approx(1.09689, rel=1e-4)
    # the sign convention fails for this family, so the mirrored arrangement is used
    assert not sp.sign_convention_holds and sp.orientation == "mirrored"


def test_second_shrinking_point(plane_c0, sp_2_7):
    # the next lobe down the 2/7 tongue belongs to the word with l = 3
    sp2 = find_shrinking_point(plane_c0, rotational_word(3, 2, 7), BOX_2_7_LOWER)
    assert str(sp2.word) == "LLRRLRR"
    assert np.linalg.norm(np.subtract(sp2.location, sp_2_7.location)) > 0.1
    assert sp2.admissible and sp2.sign_pattern
    assert delta_ratio_residual(sp2) <= 1e-6


def test_delta_ratio_grows_linearly_off_point(plane_c0, sp_2_7):
    p = np.array(sp_2_7.location)
    direction = np.array([0.6, 0.8])
    res = [delta_ratio_residual(build_report(plane_c0, W27, p + h * direction)) for h in (1e-5, 2e-5, 4e-5)]
    assert res[0] > 1e-8
    assert res[1] / res[0] == pytest.approx(2.0, rel=0.05)
    assert res[2] / res[1] == pytest.approx(2.0, rel=0.05)


def test_renormalized_cycle_is_the_check_cycle(sp_2_7, plane_c0):
    lin = plane_c0.map_at(*sp_2_7.location, 1.0)
    cyc = linear_cycle(lin, variants(W27)["check"])
    assert np.allclose(cyc.points, sp_2_7.y_points)
    # points 0 and ld lie on the switching manifold, so the orbit is also an S-cycle
    _, end, _ = word_orbit(lin, W27, cyc.points[0])
    assert np.allclose(end, cyc.points[0], atol=1e-12)


# -- linear boundary cone -------------------------------------------------------


@pytest.fixture(scope="module")
def linear_traces(plane_c0, sp_2_7_linear):
    out = {}
    for mu in (1.0, 2.0):
        O = intersection_point(plane_c0, sp_2_7_linear, mu)
        out[mu] = {c: border_collision_trace(plane_c0, sp_2_7_linear, c, mu, O=O, radius=0.01)
                   for c in CURVES}
    return out


def test_linear_common_point_is_the_shrinking_point(plane_c0, sp_2_7_linear):
    O = intersection_point(plane_c0, sp_2_7_linear, 0.5)
    assert np.allclose(O["point"], sp_2_7_linear.location, atol=1e-10)


def test_linear_cone_is_pairwise_tangent(linear_traces):
    t = {c: tp for c, (_, tp) in linear_traces[1.0].items()}
    assert _line_angle(t["check_0"], t["hat_ld"]) <= 1e-6
    assert _line_angle(t["check_ld"], t["hat_0"]) <= 1e-6
    assert _line_angle(t["check_0"], t["check_ld"]) > 0.05


def test_linear_traces_independent_of_mu(linear_traces, plane_c0):
    for c in CURVES:
        halves1, _ = linear_traces[1.0][c]
        halves2, _ = linear_traces[2.0][c]
        for h1, h2 in zip(halves1, halves2):
            # samples of one trace lie on the other (the plane picture is mu-independent)
            P1, P2 = h1.array()[:, 2:], h2.array()[:, 2:]
            for q in P1[1:]:
                seg = np.min(np.linalg.norm(P2 - q, axis=1))
                assert seg < 2e-3
            # check directly: the mu=1 points satisfy the mu=2 boundary condition
            key, pt = CURVES[c]
            w = variants(W27)[key]
            j = {"0": 0, "ld": 1}[pt]
            for u in h1.points[::5]:
                cyc = linear_cycle(plane_c0.map_at(u[2], u[3], 2.0), w)
                assert abs(cyc.s_values[j]) <= 1e-9


def test_linear_boundaries_are_singular_p(linear_traces, plane_c0):
    """Where a variant cycle has point j on s = 0, P of the variant shifted to j is singular."""
    idx = {"0": 0, "ld": 1}
    for c, (halves, _) in linear_traces[1.0].items():
        key, pt = CURVES[c]
        w = variants(W27)[key].shift(idx[pt])
        for br in halves:
            for u in br.points[::4]:
                lin = plane_c0.map_at(u[2], u[3], 1.0)
                assert abs(_scaled_det(cycle_matrices(lin, w).P)) <= 1e-8


def test_linear_family_has_no_saddle_node_locus(plane_c0, sp_2_7_linear):
    with pytest.raises(NoLocusError):
        saddle_node_trace(plane_c0, sp_2_7_linear, 0.5)


def test_intersection_needs_positive_mu(plane_c1, sp_2_7):
    with pytest.raises(ValueError):
        intersection_point(plane_c1, sp_2_7, 0.0)


def test_word_must_be_rotational(plane_c0):
    with pytest.raises(ValueError):
        find_shrinking_point(plane_c0, SymbolWord.parse("LRRRLRR"), BOX_2_7)


def test_singular_delta_violates_hypotheses(plane_c0):
    # the l = 4 root shares its location with the l = 3 point but has a singular check-cycle
    with pytest.raises(HypothesisError, match="singular"):
        find_shrinking_point(plane_c0, rotational_word(4, 2, 7), BOX_2_7_LOWER)


# -- unfolding at small mu ------------------------------------------------------


def test_unfold_small_mu(unfold):
    rep = unfold(0.125)
    assert rep.orientation == "mirrored"
    assert rep.O_spread <= 1e-6
    assert max(rep.tangency_angles.values()) <= 1e-3
    assert rep.theta1 < rep.theta2
    assert rep.theta_exact["theta1"] < rep.theta_exact["theta2"]
    assert rep.probes_ok and rep.ok
    for region in ("Psi1", "Psi2", "Psi3"):
        assert sum(p.region == region for p in rep.region_samples) >= 3


def test_unfold_residuals(unfold):
    rep = unfold(0.125)
    assert np.max(rep.sn_residuals) <= 1e-8
    for pts, res in rep.boundary_curves.values():
        assert np.max(res) <= 1e-10
        assert len(pts) > 10


def test_saddle_node_multipliers(unfold):
    for c in unfold(0.125).sn_checks:
        assert c["multiplier_minus_one"] <= 1e-6
        assert min(c["others_from_unit_circle"]) >= 1e-3
        assert c["counts"] == {"inside": 2, "outside": 0}
        assert c["admissible"] and c["ok"]


def test_persistence_boundaries(unfold):
    checks = unfold(0.125).persistence_checks
    assert [c["boundary"] for c in checks] == ["OA", "OB"]
    for c in checks:
        assert c["ok"] and c["variant_admissible_outside"]
        assert c["s_cycles_inside"] >= 2 and c["s_cycles_outside"] >= 1


def test_coefficient_signs(unfold):
    fits = unfold(0.125).coefficient_fits
    for key in ("phi1", "phi2"):
        assert fits[key]["intercept_sign_ok"] and fits[key]["slope_sign_ok"], fits[key]


def test_region_table_at_half(unfold):
    rep = unfold(0.5)
    psi1 = [p for p in rep.region_samples if p.region == "Psi1"]
    psi3 = [p for p in rep.region_samples if p.region == "Psi3"]
    for p in psi1:
        assert p.check_admissible and any(a for a, _, _ in p.s_cycles)
    for p in psi3:
        dets = [dt for a, dt, _ in p.s_cycles if a]
        assert len(dets) >= 2 and min(dets) < 0 < max(dets)
    assert rep.ok


def test_curve_rows(unfold):
    rep = unfold(0.125)
    rows = list(rep.curve_rows())
    ids = {r[0] for r in rows}
    assert ids == set(CURVES) | {"saddle_node"}
    assert all(len(r) == 4 for r in rows)


@pytest.mark.slow
def test_unfold_at_one(unfold):
    rep = unfold(1.0)
    assert rep.ok and rep.theta1 < rep.theta2
