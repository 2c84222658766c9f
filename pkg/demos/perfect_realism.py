"""Trading a little distortion for exact realism.

At finite blocklength the simulated output law only approaches the i.i.d.
source law. A correction channel built from the maximal coupling of the
two laws repairs this exactly: it keeps the sequence whenever a coupling
can, so the probability of touching it equals the total variation being
removed, and the distortion cost is bounded by d_max times that TV.
"""

import numpy as np

import rdpsi
from rdpsi.coding_sim import (
    exact_output_marginal,
    gen_codebook,
    perfect_realism_correct,
    plan_rates,
    simulate,
)
from rdpsi.info_measures import mutual_information
from rdpsi.prob_core import FinitePmf, product_power, total_variation

from layered_pipeline import operating_point


def main():
    source, point = operating_point()
    i_zv = mutual_information(point.joint, ["Z"], ["V"])
    epsilon = 2.0 * (i_zv - 0.126)
    n = 8
    plan = plan_rates(point, n, epsilon)

    joint = point.joint.probs
    pv = joint.sum(axis=(0, 1, 3))
    pvz = joint.sum(axis=(0, 3)).T
    emit_eff = np.einsum("vz,zvy->vy", pvz / pv[:, None],
                         np.asarray(point.dec.probs))
    px = source.pxz.probs.sum(axis=1)
    target = product_power(FinitePmf((("Y", px.size),), px), n)

    cb = gen_codebook(pv, plan, seed=5)
    gamma = exact_output_marginal(cb, emit_eff)
    corr, mismatch = perfect_realism_correct(gamma, target)
    corrected = gamma.probs.ravel() @ corr.row_matrix()
    residual = np.abs(corrected - target.probs.ravel()).max()

    print(f"Blocklength {n}, one codebook of {plan.n_words} words")
    print(f"  TV(mixture, product law) = {total_variation(gamma, target):.4f}")
    print(f"  correction touch probability = {mismatch:.4f} (equal by design)")
    print(f"  max abs residual after correction = {residual:.1e}")
    print()

    rep = simulate(source, point, plan, trials=3000, seed=5, delta_typ=0.2,
                   exact_tv=True, correct_realism=True)
    bound = source.d_max * rep.tv_exact
    print(f"Pipeline with the correction applied per emitted sequence:")
    print(f"  distortion before  = {rep.avg_distortion:.4f}")
    print(f"  distortion after   = {rep.corrected_avg_distortion:.4f}")
    print(f"  increase {rep.corrected_avg_distortion - rep.avg_distortion:+.4f}"
          f"  <=  d_max * TV = {bound:.4f}")
    print()
    print("After correction the output block law IS the product law, not an")
    print("approximation of it; the entire realism budget is paid in a small,")
    print("bounded amount of extra distortion.")


if __name__ == "__main__":
    main()
