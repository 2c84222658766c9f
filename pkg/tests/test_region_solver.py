"""Trade-off region optimizer, oracle, and the two-sided reduction."""

import numpy as np
import pytest

import rdpsi
from rdpsi.errors import InfeasibleError
from rdpsi.info_measures import conditional_mutual_information, mutual_information
from rdpsi.prob_core import Channel, FinitePmf
from rdpsi.region_solver import (
    OptimizerOptions,
    SourceSpec,
    assemble,
    augment_source,
    brute_force_min_rate,
    ed_min_rate,
    evaluate,
    markov_check,
    min_rate,
    region_curve,
)
from rdpsi.seeds import derived_rng

FAST = OptimizerOptions(workers=1)


def h2(p):
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def random_channel(rng, in_axes, out_axes):
    in_shape = tuple(size for _, size in in_axes)
    out_n = int(np.prod([size for _, size in out_axes]))
    rows = rng.dirichlet(np.ones(out_n), size=int(np.prod(in_shape)))
    probs = rows.reshape(in_shape + tuple(size for _, size in out_axes))
    return Channel(tuple(in_axes), tuple(out_axes), probs)


class TestSourceSpec:
    def test_dsbs_layout(self):
        s = SourceSpec.dsbs(0.2)
        np.testing.assert_allclose(s.pxz.probs, [[0.4, 0.1], [0.1, 0.4]])
        np.testing.assert_allclose(s.distortion, [[0.0, 1.0], [1.0, 0.0]])
        assert s.d_max == 1.0

    def test_independent_factory(self):
        s = SourceSpec.independent([0.25, 0.75], [0.5, 0.5])
        np.testing.assert_allclose(s.pxz.probs, np.outer([0.25, 0.75], [0.5, 0.5]))

    def test_rejects_bad_distortion(self):
        pxz = FinitePmf((("X", 2), ("Z", 2)), np.full((2, 2), 0.25))
        with pytest.raises(ValueError):
            SourceSpec(pxz, np.zeros((3, 3)))
        with pytest.raises(ValueError):
            SourceSpec(pxz, np.array([[0.0, -1.0], [1.0, 0.0]]))

    def test_dict_round_trip(self):
        s = SourceSpec.dsbs(0.3)
        s2 = SourceSpec.from_dict(s.to_dict())
        np.testing.assert_array_equal(s2.pxz.probs, s.pxz.probs)
        np.testing.assert_array_equal(s2.distortion, s.distortion)


class TestAssembleEvaluate:
    def test_markov_chains_hold_by_construction(self):
        rng = derived_rng(30, "assemble")
        s = SourceSpec.dsbs(0.2)
        for _ in range(25):
            enc = random_channel(rng, [("X", 2)], [("V", 3)])
            dec = random_channel(rng, [("Z", 2), ("V", 3)], [("Y", 2)])
            point = assemble(s, enc, dec)
            gap_zv, gap_y = markov_check(point.joint)
            assert gap_zv <= 1e-10
            assert gap_y <= 1e-10

    def test_evaluate_matches_direct_information_quantities(self):
        rng = derived_rng(31, "evaluate")
        s = SourceSpec.dsbs(0.1)
        enc = random_channel(rng, [("X", 2)], [("V", 2)])
        dec = random_channel(rng, [("Z", 2), ("V", 2)], [("Y", 2)])
        point = assemble(s, enc, dec)
        rp = evaluate(point, s)
        joint = point.joint
        assert rp.rate == pytest.approx(
            conditional_mutual_information(joint, ["X"], ["V"], ["Z"]), abs=1e-12
        )
        assert rp.rc_sum == pytest.approx(
            mutual_information(joint, ["Y"], ["V"])
            - mutual_information(joint, ["Z"], ["V"]),
            abs=1e-12,
        )
        py = joint.probs.sum(axis=(0, 1, 2))
        px = s.pxz.probs.sum(axis=1)
        assert rp.realism_gap == pytest.approx(
            0.5 * float(np.abs(py - px).sum()), abs=1e-12
        )

    def test_assemble_rejects_mismatched_axes(self):
        s = SourceSpec.dsbs(0.2)
        rng = derived_rng(32, "mismatch")
        enc = random_channel(rng, [("X", 3)], [("V", 2)])
        dec = random_channel(rng, [("Z", 2), ("V", 2)], [("Y", 2)])
        with pytest.raises(ValueError):
            assemble(s, enc, dec)


class TestMinRate:
    def test_dsbs_point_match_with_oracle(self):
        s = SourceSpec.dsbs(0.2)
        rp, point = min_rate(s, 0.10, v_size=3, opts=FAST)
        assert rp.rate == pytest.approx(0.3312607082723256, abs=1e-4)
        assert rp.feasible
        assert rp.distortion <= 0.10 + 1e-9
        assert rp.realism_gap <= 1e-6
        gap_zv, gap_y = markov_check(point.joint)
        assert max(gap_zv, gap_y) <= 1e-10

    def test_never_above_the_lattice_oracle(self):
        s = SourceSpec.dsbs(0.2)
        for delta in (0.10, 0.15):
            rp, _ = min_rate(s, delta, v_size=3, opts=FAST)
            oracle = brute_force_min_rate(s, delta, v_size=3, grid_step=0.05)
            assert rp.rate <= oracle.rate + 1e-9

    def test_rate_zero_region(self):
        # emitting Y from Z alone already meets a 0.25 budget on DSBS(0.2)
        s = SourceSpec.dsbs(0.2)
        rp, point = min_rate(s, 0.25, v_size=2, opts=FAST)
        assert rp.rate == 0.0
        assert rp.distortion <= 0.25 + 1e-9
        assert rp.realism_gap <= 1e-6
        assert evaluate(point, s).rate <= 1e-9

    def test_perfect_reconstruction_needs_full_conditional_entropy(self):
        # independent side information, zero budget: V must carry X itself
        s = SourceSpec.independent([0.5, 0.5], [0.5, 0.5])
        rp, _ = min_rate(s, 0.0, v_size=4, opts=FAST)
        assert rp.rate == pytest.approx(1.0, abs=1e-5)

    def test_deterministic_given_options(self):
        s = SourceSpec.dsbs(0.2)
        r1, p1 = min_rate(s, 0.15, v_size=2, opts=FAST)
        r2, p2 = min_rate(s, 0.15, v_size=2, opts=FAST)
        assert r1.rate == r2.rate
        np.testing.assert_array_equal(p1.enc.probs, p2.enc.probs)

    def test_infeasible_budget_raises(self):
        pxz = FinitePmf((("X", 2), ("Z", 2)), np.full((2, 2), 0.25))
        s = SourceSpec(pxz, np.ones((2, 2)))  # distortion 1 everywhere
        with pytest.raises(InfeasibleError):
            min_rate(s, 0.5, v_size=2, opts=FAST)


class TestBruteForce:
    def test_budget_monotonicity(self):
        s = SourceSpec.dsbs(0.2)
        rates = [
            brute_force_min_rate(s, d, v_size=3, grid_step=0.05).rate
            for d in (0.05, 0.10, 0.15, 0.25)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))

    def test_finer_grid_never_worse(self):
        s = SourceSpec.dsbs(0.2)
        coarse = brute_force_min_rate(s, 0.15, v_size=2, grid_step=0.1)
        fine = brute_force_min_rate(s, 0.15, v_size=2, grid_step=0.05)
        assert fine.rate <= coarse.rate + 1e-9

    def test_larger_alphabet_never_worse(self):
        s = SourceSpec.dsbs(0.2)
        v2 = brute_force_min_rate(s, 0.10, v_size=2, grid_step=0.05)
        v3 = brute_force_min_rate(s, 0.10, v_size=3, grid_step=0.05)
        assert v3.rate <= v2.rate + 1e-9

    def test_winner_is_feasible(self):
        s = SourceSpec.dsbs(0.2)
        rp = brute_force_min_rate(s, 0.10, v_size=3, grid_step=0.05)
        assert rp.distortion <= 0.10 + 1e-9
        assert rp.realism_gap <= 1e-9


class TestEdReduction:
    def test_augmented_source_layout(self):
        s = SourceSpec.dsbs(0.2)
        aug = augment_source(s)
        nx, nz = s.pxz.sizes
        assert aug.pxz.sizes == (nx * nz, nz)
        # lifted distortion reads only the x coordinates of both pair letters
        d = aug.distortion
        for x in range(nx):
            for z in range(nz):
                for xp in range(nx):
                    for zp in range(nz):
                        assert d[x * nz + z, xp * nz + zp] == s.distortion[x, xp]

    def test_independent_side_information_changes_nothing(self):
        s = SourceSpec.independent([0.5, 0.5], [0.5, 0.5])
        rp_d, _ = min_rate(s, 0.11, v_size=3, opts=FAST)
        rp_ed, _ = ed_min_rate(s, 0.11, v_size=3, opts=FAST)
        assert rp_ed.rate == pytest.approx(rp_d.rate, abs=1e-6)
        assert rp_ed.rate <= rp_d.rate + 1e-9


class TestRegionCurve:
    def test_envelope_is_non_increasing(self):
        s = SourceSpec.dsbs(0.2)
        pts = region_curve(s, [0.10, 0.18, 0.25], v_size=2, opts=FAST)
        rates = [p.rate for p in pts]
        assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))
        assert all(p.feasible for p in pts)

    def test_infeasible_budgets_marked_inline(self):
        pxz = FinitePmf((("X", 2), ("Z", 2)), np.full((2, 2), 0.25))
        s = SourceSpec(pxz, np.ones((2, 2)))
        pts = region_curve(s, [0.5], v_size=2, opts=FAST)
        assert len(pts) == 1
        assert not pts[0].feasible

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            region_curve(SourceSpec.dsbs(0.2), [0.2], mode="X")
