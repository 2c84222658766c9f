"""Pmf/channel algebra and the total-variation toolbox."""

import numpy as np
import pytest

from rdpsi.errors import CapacityError
from rdpsi.prob_core import (
    Channel,
    FinitePmf,
    apply_channel,
    compose,
    condition,
    coupling_to_channel,
    marginalize,
    maximal_coupling,
    product_power,
    rename_axes,
    total_variation,
)
from rdpsi.seeds import derived_rng


def random_pmf(rng, axes):
    shape = tuple(size for _, size in axes)
    probs = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    return FinitePmf(tuple(axes), probs)


def random_channel(rng, in_axes, out_axes):
    in_shape = tuple(size for _, size in in_axes)
    out_n = int(np.prod([size for _, size in out_axes]))
    rows = rng.dirichlet(np.ones(out_n), size=int(np.prod(in_shape)))
    probs = rows.reshape(in_shape + tuple(size for _, size in out_axes))
    return Channel(tuple(in_axes), tuple(out_axes), probs)


class TestFinitePmf:
    def test_rejects_negative_mass(self):
        with pytest.raises(ValueError):
            FinitePmf((("X", 2),), np.array([1.2, -0.2]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            FinitePmf((("X", 3),), np.array([0.5, 0.5]))

    def test_renormalizes_at_construction(self):
        p = FinitePmf((("X", 2),), np.array([0.7, 0.7]))
        np.testing.assert_allclose(p.probs, [0.5, 0.5])
        with pytest.raises(ValueError):
            FinitePmf((("X", 2),), np.array([0.0, 0.0]))

    def test_dict_round_trip(self):
        rng = derived_rng(3, "pmf-roundtrip")
        p = random_pmf(rng, [("A", 2), ("B", 3)])
        q = FinitePmf.from_dict(p.to_dict())
        assert q.axes == p.axes
        np.testing.assert_array_equal(q.probs, p.probs)


class TestChannelOps:
    def test_compose_preserves_source_marginal(self):
        rng = derived_rng(4, "compose")
        p = random_pmf(rng, [("X", 3), ("Z", 2)])
        ch = random_channel(rng, [("X", 3)], [("V", 4)])
        joint = compose(p, ch)
        assert joint.names == ("X", "Z", "V")
        back = marginalize(joint, ["X", "Z"])
        np.testing.assert_allclose(back.probs, p.probs, atol=1e-15)

    def test_compose_rejects_colliding_output_name(self):
        rng = derived_rng(4, "collide")
        p = random_pmf(rng, [("X", 2), ("Z", 2)])
        ch = random_channel(rng, [("X", 2)], [("Z", 2)])
        with pytest.raises(ValueError):
            compose(p, ch)

    def test_condition_then_compose_recovers_joint(self):
        rng = derived_rng(5, "condition")
        joint = random_pmf(rng, [("X", 2), ("Y", 3)])
        ch = condition(joint, ["X"])
        rebuilt = compose(marginalize(joint, ["X"]), ch)
        np.testing.assert_allclose(
            marginalize(rebuilt, ["X", "Y"]).probs, joint.probs, atol=1e-12
        )

    def test_apply_channel_allows_name_reuse(self):
        # compose would reject the output name "Y"; apply_channel sums the
        # old axes out, so the collision is harmless
        rng = derived_rng(6, "apply")
        p = random_pmf(rng, [("W", 2), ("Y", 3)])
        ch = random_channel(rng, [("W", 2)], [("Y", 3)])
        out = apply_channel(p, ch)
        assert out.names == ("Y",)
        np.testing.assert_allclose(out.probs.sum(), 1.0, atol=1e-12)

    def test_product_power_flat_order_is_lexicographic(self):
        p = FinitePmf((("Y", 2),), np.array([0.75, 0.25]))
        block = product_power(p, 3)
        assert block.names == ("Y.0", "Y.1", "Y.2")
        # flat index 6 = (1, 1, 0)
        assert block.probs.ravel()[6] == pytest.approx(0.25 * 0.25 * 0.75)

    def test_product_power_guard(self):
        p = FinitePmf((("Y", 16),), np.full(16, 1 / 16))
        with pytest.raises(CapacityError):
            product_power(p, 8)

    def test_rename_axes(self):
        p = FinitePmf((("A", 2),), np.array([0.5, 0.5]))
        q = rename_axes(p, {"A": "B"})
        assert q.names == ("B",)


class TestTotalVariation:
    def test_identical_pmfs(self):
        p = FinitePmf((("X", 3),), np.array([0.2, 0.3, 0.5]))
        assert total_variation(p, p) == 0.0

    def test_disjoint_supports(self):
        p = FinitePmf((("X", 2),), np.array([1.0, 0.0]))
        q = FinitePmf((("X", 2),), np.array([0.0, 1.0]))
        assert total_variation(p, q) == pytest.approx(1.0)

    def test_axes_must_match(self):
        p = FinitePmf((("X", 2),), np.array([0.5, 0.5]))
        q = FinitePmf((("Y", 2),), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            total_variation(p, q)

    def test_marginals_never_increase_tv(self):
        rng = derived_rng(7, "tv-marginal")
        for _ in range(200):
            p = random_pmf(rng, [("W", 3), ("L", 2)])
            q = random_pmf(rng, [("W", 3), ("L", 2)])
            tv_joint = total_variation(p, q)
            tv_marg = total_variation(marginalize(p, ["W"]), marginalize(q, ["W"]))
            assert tv_marg <= tv_joint + 1e-12

    def test_shared_channel_preserves_tv(self):
        rng = derived_rng(8, "tv-channel")
        for _ in range(200):
            p = random_pmf(rng, [("W", 3)])
            q = random_pmf(rng, [("W", 3)])
            ch = random_channel(rng, [("W", 3)], [("L", 4)])
            tv_in = total_variation(p, q)
            tv_out = total_variation(compose(p, ch), compose(q, ch))
            assert abs(tv_out - tv_in) <= 1e-12

    def test_joint_tv_equals_expected_row_tv(self):
        rng = derived_rng(9, "tv-rows")
        for _ in range(200):
            pw = random_pmf(rng, [("W", 4)])
            ch_a = random_channel(rng, [("W", 4)], [("L", 3)])
            ch_b = random_channel(rng, [("W", 4)], [("L", 3)])
            tv_joint = total_variation(compose(pw, ch_a), compose(pw, ch_b))
            rows = 0.5 * np.abs(ch_a.probs - ch_b.probs).sum(axis=1)
            assert abs(tv_joint - float(pw.probs @ rows)) <= 1e-12

    def test_disagreement_probability_bounds_tv(self):
        rng = derived_rng(10, "tv-disagree")
        for _ in range(200):
            joint = random_pmf(rng, [("U", 3), ("W", 3), ("L", 2)])
            eta = float(
                sum(
                    joint.probs[u, w, :].sum()
                    for u in range(3)
                    for w in range(3)
                    if u != w
                )
            )
            p_ul = marginalize(joint, ["U", "L"])
            p_wl = rename_axes(marginalize(joint, ["W", "L"]), {"W": "U"})
            assert total_variation(p_ul, p_wl) <= eta + 1e-12


class TestMaximalCoupling:
    def test_marginals_and_mismatch(self):
        rng = derived_rng(11, "coupling")
        for _ in range(100):
            p = random_pmf(rng, [("Y", 4)])
            q = random_pmf(rng, [("Y", 4)])
            c = maximal_coupling(p, q)
            np.testing.assert_allclose(c.joint.probs.sum(axis=1), p.probs, atol=1e-12)
            np.testing.assert_allclose(c.joint.probs.sum(axis=0), q.probs, atol=1e-12)
            assert c.mismatch_probability == pytest.approx(
                total_variation(p, q), abs=1e-12
            )

    def test_no_coupling_beats_the_diagonal(self):
        # diagonal mass = sum of pointwise minima, the known optimum
        p = FinitePmf((("Y", 3),), np.array([0.5, 0.3, 0.2]))
        q = FinitePmf((("Y", 3),), np.array([0.2, 0.3, 0.5]))
        c = maximal_coupling(p, q)
        assert c.diagonal_mass == pytest.approx(
            np.minimum(p.probs, q.probs).sum(), abs=1e-12
        )

    def test_channel_embedding_is_stochastic_and_exact(self):
        rng = derived_rng(12, "coupling-channel")
        p = random_pmf(rng, [("Y", 5)])
        q = random_pmf(rng, [("Y", 5)])
        ch = coupling_to_channel(maximal_coupling(p, q))
        rows = ch.row_matrix()
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(p.probs @ rows, q.probs, atol=1e-12)
