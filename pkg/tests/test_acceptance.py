"""End-to-end acceptance gate: ten pinned checks with runtime budgets.

Every test records one PASS/FAIL summary line through the record_check
fixture (printed after the run) and then asserts. Seeds, tolerances and
runtime caps are frozen so the whole gate is reproducible bit for bit.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

import rdpsi
from rdpsi import coding_sim as cs
from rdpsi import gaussian_model as gm
from rdpsi import region_solver as rs
from rdpsi.info_measures import (
    conditional_mutual_information,
    gaussian_cond_entropy,
    mutual_information,
)
from rdpsi.prob_core import (
    Channel,
    FinitePmf,
    compose,
    marginalize,
    product_power,
    rename_axes,
    total_variation,
)

LN2 = math.log(2.0)
FAST = rs.OptimizerOptions(workers=1)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def h2(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# checks 07 and 08 share the solver curves; built lazily so either test
# can run standalone
GRID8 = [round(0.05 * k, 2) for k in range(1, 9)]
_CURVE_CACHE: dict[str, list] = {}


def _sources() -> dict[str, rdpsi.SourceSpec]:
    return {
        "independent": rdpsi.SourceSpec.independent([0.5, 0.5], [0.5, 0.5]),
        "dsbs": rdpsi.SourceSpec.dsbs(0.2),
    }


def _curve_results() -> dict[str, list]:
    if not _CURVE_CACHE:
        for name, source in _sources().items():
            _CURVE_CACHE[name] = rs.region_curve(
                source, GRID8, v_size=3, opts=FAST, return_points=True
            )
    return _CURVE_CACHE


def test_01_gaussian_closed_form_matches_entropy_difference(record_check):
    with Timer() as t:
        worst = 0.0
        for eta in np.linspace(0.0, 0.9, 10):
            for j in range(10):
                delta = (2.0 - 2.0 * eta) * (j + 1) / 10.0
                params = gm.make_params(float(eta), float(delta))
                cov = gm.covariance_zxv(params)
                h_x_z = gaussian_cond_entropy(cov, [1], [0])
                h_x_zv = gaussian_cond_entropy(cov, [1], [0, 2])
                diff = abs(gm.min_rate(params) - (h_x_z - h_x_zv) / LN2)
                worst = max(worst, diff)
    ok = worst <= 1e-9 and t.seconds < 1.0
    record_check(
        1, ok, f"closed form vs entropy difference, max dev {worst:.2e} "
        f"over 100 grid points in {t.seconds:.2f}s",
    )
    assert worst <= 1e-9
    assert t.seconds < 1.0


def test_02_gaussian_mc_moment_identities(record_check):
    with Timer() as t:
        stats = gm.mc_validate(gm.make_params(0.3, 0.8), 10**6, seed=2024)
    devs = {
        "mean_sq_err": abs(stats.mean_sq_err - stats.target_mean_sq_err)
        / stats.se_mean_sq_err,
        "var_y": abs(stats.var_y - stats.target_var_y) / stats.se_var_y,
        "mean_sq_cond": abs(stats.mean_sq_cond - stats.target_mean_sq_cond)
        / stats.se_mean_sq_cond,
    }
    ok = all(v <= 5.0 for v in devs.values()) and not stats.flags and t.seconds < 10.0
    record_check(
        2, ok, "moment identities at (0.3, 0.8), deviations "
        + ", ".join(f"{k}={v:.2f} s.e." for k, v in devs.items())
        + f", {t.seconds:.1f}s",
    )
    assert stats.target_mean_sq_cond == pytest.approx(0.36, abs=1e-12)
    for name, dev in devs.items():
        assert dev <= 5.0, f"{name} off by {dev:.2f} standard errors"
    assert stats.flags == ()
    assert t.seconds < 10.0


def test_03_soft_covering_tv_decreases_with_blocklength(record_check):
    # binary auxiliary through a BSC whose capacity-style MI is 0.3 bits
    q = brentq(lambda p: 1.0 - h2(p) - 0.3, 1e-6, 0.5 - 1e-9)
    emit = np.array([[1.0 - q, q], [q, 1.0 - q]])
    with Timer() as t:
        rows = cs.soft_cover_sweep(
            np.array([0.5, 0.5]), emit, rates=[0.6], ns=[4, 6, 8, 10],
            codebooks_per_cell=32, seed=31,
        )
    means = [r["tv_mean"] for r in rows]
    decreasing = all(a > b for a, b in zip(means, means[1:]))
    ok = (
        decreasing
        and not any(r["skipped"] for r in rows)
        and t.seconds < 120.0
    )
    record_check(
        3, ok, "mean exact TV over n=4,6,8,10: "
        + " > ".join(f"{m:.4f}" for m in means) + f", {t.seconds:.1f}s",
    )
    assert not any(r["skipped"] for r in rows)
    assert decreasing, f"TV means not strictly decreasing: {means}"
    assert t.seconds < 120.0


def test_04_virtual_message_error_drops_with_blocklength(
    record_check, dsbs_operating_point
):
    source, point, region, epsilon = dsbs_operating_point
    i_zv = mutual_information(point.joint, ["Z"], ["V"])
    assert i_zv >= 0.1
    pv = marginalize(point.joint, ["V"])
    n_codebooks, trials_each = 30, 500
    with Timer() as t:
        errors = {}
        for n in (8, 16):
            plan = cs.plan_rates(point, n, epsilon)
            wrong = 0
            for k in range(n_codebooks):
                cb = cs.gen_codebook(pv, plan, seed=5000 + k)
                rep = cs.simulate(
                    source, point, plan, trials=trials_each, seed=9000 + k,
                    delta_typ=0.2, exact_tv=False, codebook=cb,
                )
                wrong += round(rep.mprime_error_rate * trials_each)
            errors[n] = wrong / (n_codebooks * trials_each)
    total = n_codebooks * trials_each
    ok = errors[16] < errors[8] and total >= 2000 and t.seconds < 300.0
    record_check(
        4, ok, f"virtual-message error {errors[8]:.4f} (n=8) -> "
        f"{errors[16]:.4f} (n=16), {total} trials each, {t.seconds:.0f}s",
    )
    assert total >= 2000
    assert errors[16] < errors[8]
    assert t.seconds < 300.0


def test_05_end_to_end_distortion_and_realism(record_check, dsbs_operating_point):
    source, point, region, epsilon = dsbs_operating_point
    with Timer() as t:
        rep12 = cs.simulate(
            source, point, cs.plan_rates(point, 12, epsilon),
            trials=5000, seed=4200, delta_typ=0.2, exact_tv=True,
        )
        rep6 = cs.simulate(
            source, point, cs.plan_rates(point, 6, epsilon),
            trials=1000, seed=4200, delta_typ=0.2, exact_tv=True,
        )
    budget = region.distortion + 0.05
    ok = (
        rep12.avg_distortion <= budget
        and rep12.tv_exact < rep6.tv_exact
        and t.seconds < 600.0
    )
    record_check(
        5, ok, f"distortion {rep12.avg_distortion:.4f} <= {budget:.3f}, "
        f"block TV {rep6.tv_exact:.4f} (n=6) -> {rep12.tv_exact:.4f} (n=12), "
        f"{t.seconds:.0f}s",
    )
    assert rep12.trials == 5000
    assert rep12.avg_distortion <= budget
    assert rep12.tv_exact < rep6.tv_exact
    assert t.seconds < 600.0


def test_06_perfect_realism_correction_is_exact(record_check, dsbs_operating_point):
    source, point, region, epsilon = dsbs_operating_point
    with Timer() as t:
        plan = cs.plan_rates(point, 6, epsilon)
        joint = point.joint.probs
        pv = joint.sum(axis=(0, 1, 3))
        pvz = joint.sum(axis=(0, 3)).T
        pz_given_v = pvz / pv[:, None]
        emit_eff = np.einsum("vz,zvy->vy", pz_given_v, np.asarray(point.dec.probs))
        px = marginalize(source.pxz, ["X"]).probs
        target = product_power(FinitePmf((("Y", px.size),), px), 6)

        worst_marginal = 0.0
        worst_mismatch = 0.0
        for seed in (77, 78, 79):
            cb = cs.gen_codebook(pv, plan, seed=seed)
            gamma = cs.exact_output_marginal(cb, emit_eff)
            corr, mismatch = cs.perfect_realism_correct(gamma, target)
            corrected = gamma.probs.ravel() @ corr.row_matrix()
            worst_marginal = max(
                worst_marginal,
                float(np.abs(corrected - target.probs.ravel()).max()),
            )
            worst_mismatch = max(
                worst_mismatch, abs(mismatch - total_variation(gamma, target))
            )

        rep = cs.simulate(
            source, point, plan, trials=4000, seed=88, delta_typ=0.2,
            exact_tv=True, correct_realism=True,
        )
        increase = rep.corrected_avg_distortion - rep.avg_distortion
        bound = source.d_max * rep.tv_exact
    ok = (
        worst_marginal <= 1e-12
        and worst_mismatch <= 1e-12
        and increase <= bound
        and t.seconds < 60.0
    )
    record_check(
        6, ok, f"corrected marginal dev {worst_marginal:.1e}, mismatch dev "
        f"{worst_mismatch:.1e}, distortion +{increase:.4f} <= {bound:.4f}, "
        f"{t.seconds:.0f}s",
    )
    assert worst_marginal <= 1e-12
    assert worst_mismatch <= 1e-12
    assert not rep.correction_skipped
    assert increase <= bound
    assert t.seconds < 60.0


def test_07_region_solver_matches_grid_oracle(record_check):
    with Timer() as t:
        curves = _curve_results()
        worst = {}
        monotone = {}
        for name, source in _sources().items():
            devs = []
            rates = []
            for rp, _ in curves[name]:
                oracle = rs.brute_force_min_rate(
                    source, rp.delta, v_size=3, grid_step=0.05
                )
                devs.append(abs(rp.rate - oracle.rate))
                rates.append(rp.rate)
                assert rp.feasible
            worst[name] = max(devs)
            monotone[name] = all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))
    ok = all(v <= 0.02 for v in worst.values()) and all(monotone.values())
    ok = ok and t.seconds < 600.0
    record_check(
        7, ok, "solver vs oracle max |dev| "
        + ", ".join(f"{k}={v:.4f}" for k, v in worst.items())
        + f" over 8 budgets, {t.seconds:.0f}s",
    )
    for name, dev in worst.items():
        assert dev <= 0.02, f"{name}: solver strays {dev:.4f} bits from oracle"
        assert monotone[name], f"{name}: curve not non-increasing"
    assert t.seconds < 600.0


def test_08_encoder_side_reduction_consistency(record_check):
    with Timer() as t:
        curves = _curve_results()
        one_sided_ok = True
        indep_dev = 0.0
        worst_excess = -math.inf
        for name, source in _sources().items():
            for rp, pt in curves[name]:
                ed_rp, _ = rs.ed_min_rate(
                    source, rp.delta, v_size=3, opts=FAST, d_solution=pt
                )
                excess = ed_rp.rate - rp.rate
                worst_excess = max(worst_excess, excess)
                if excess > 1e-9:
                    one_sided_ok = False
                if name == "independent":
                    indep_dev = max(indep_dev, abs(excess))
    ok = one_sided_ok and indep_dev <= 0.02
    record_check(
        8, ok, f"two-sided access never costs rate (max excess "
        f"{worst_excess:.2e}), independent-Z gap {indep_dev:.4f} "
        f"over 16 instances, {t.seconds:.0f}s",
    )
    assert one_sided_ok, f"augmented solver exceeded base rate by {worst_excess:.2e}"
    assert indep_dev <= 0.02


def test_09_total_variation_lemma_suite(record_check):
    rng = np.random.default_rng(7)
    trials = 1000
    tol = 1e-10

    def rand_joint():
        return FinitePmf(
            (("U", 3), ("W", 3)), rng.dirichlet(np.ones(9)).reshape(3, 3)
        )

    def rand_pmf(name, size):
        return FinitePmf(((name, size),), rng.dirichlet(np.ones(size)))

    def rand_channel(in_axes, out_name, out_size):
        shape = tuple(s for _, s in in_axes) + (out_size,)
        rows = rng.dirichlet(np.ones(out_size), size=int(np.prod(shape[:-1])))
        return Channel(in_axes, ((out_name, out_size),), rows.reshape(shape))

    with Timer() as t:
        worst = {"marginal": 0.0, "channel": 0.0, "rows": 0.0, "disagree": 0.0}
        for _ in range(trials):
            # dropping an axis can only shrink the distance
            p, q = rand_joint(), rand_joint()
            gap = total_variation(
                marginalize(p, ["U"]), marginalize(q, ["U"])
            ) - total_variation(p, q)
            worst["marginal"] = max(worst["marginal"], gap)

            # a shared channel leaves the distance unchanged
            pu, qu = rand_pmf("U", 3), rand_pmf("U", 3)
            ch = rand_channel((("U", 3),), "W", 3)
            dev = abs(
                total_variation(compose(pu, ch), compose(qu, ch))
                - total_variation(pu, qu)
            )
            worst["channel"] = max(worst["channel"], dev)

            # joint distance with a shared input is the mean row distance
            c1 = rand_channel((("U", 3),), "W", 3)
            c2 = rand_channel((("U", 3),), "W", 3)
            row_tv = 0.5 * np.abs(c1.probs - c2.probs).sum(axis=1)
            dev = abs(
                total_variation(compose(pu, c1), compose(pu, c2))
                - float(pu.probs @ row_tv)
            )
            worst["rows"] = max(worst["rows"], dev)

            # swapping a coordinate for another costs at most their
            # disagreement probability
            triple = FinitePmf(
                (("U", 2), ("W", 2), ("L", 3)),
                rng.dirichlet(np.ones(12)).reshape(2, 2, 3),
            )
            eta = float(
                triple.probs[0, 1].sum() + triple.probs[1, 0].sum()
            )
            left = marginalize(triple, ["U", "L"])
            right = rename_axes(marginalize(triple, ["W", "L"]), {"W": "U"})
            gap = total_variation(left, right) - eta
            worst["disagree"] = max(worst["disagree"], gap)
    ok = all(v <= tol for v in worst.values()) and t.seconds < 30.0
    record_check(
        9, ok, "four coupling bounds x 1000 trials, worst slack "
        + ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
        + f", {t.seconds:.0f}s",
    )
    for name, value in worst.items():
        assert value <= tol, f"{name} violated by {value:.2e}"
    assert t.seconds < 30.0


def test_10_markov_mutual_information_identity(record_check):
    rng = np.random.default_rng(11)
    with Timer() as t:
        worst = 0.0
        for i in range(1000):
            nx, nz, nv, ny = 2, 2, int(rng.integers(2, 4)), 2
            pxz = FinitePmf(
                (("X", nx), ("Z", nz)),
                rng.dirichlet(np.ones(nx * nz)).reshape(nx, nz),
            )
            source = rdpsi.SourceSpec(pxz, np.zeros((nx, ny)))
            enc = Channel(
                (("X", nx),), (("V", nv),),
                rng.dirichlet(np.ones(nv), size=nx),
            )
            dec = Channel(
                (("Z", nz), ("V", nv)), (("Y", ny),),
                rng.dirichlet(np.ones(ny), size=nz * nv).reshape(nz, nv, ny),
            )
            point = rdpsi.assemble(source, enc, dec)
            cmi = conditional_mutual_information(point.joint, ["X"], ["V"], ["Z"])
            split = mutual_information(point.joint, ["X"], ["V"]) - (
                mutual_information(point.joint, ["Z"], ["V"])
            )
            worst = max(worst, abs(cmi - split))
    ok = worst <= 1e-9 and t.seconds < 30.0
    record_check(
        10, ok, f"chain identity max dev {worst:.1e} over 1000 random "
        f"points, {t.seconds:.0f}s",
    )
    assert worst <= 1e-9
    assert t.seconds < 30.0
