"""The layered coding pipeline end to end at small blocklengths.

Fixes a feasible operating point for a doubly symmetric binary source,
plans the two code layers (transmitted message plus a virtual message the
decoder must recover from its side information alone), then runs the
stochastic encoder / typicality decoder pipeline at a few blocklengths.
Reported: empirical distortion, virtual-message error rate, and the exact
total variation between the induced output block law and the i.i.d.
source law, all from one seed.
"""

import numpy as np

import rdpsi
from rdpsi.coding_sim import plan_rates, simulate
from rdpsi.info_measures import mutual_information
from rdpsi.prob_core import Channel


def operating_point():
    source = rdpsi.SourceSpec.dsbs(0.2)
    # encoder: flip X with probability 0.05 to get V
    enc = Channel((("X", 2),), (("V", 2),),
                  np.array([[0.95, 0.05], [0.05, 0.95]]))
    # decoder: emit V with probability 0.3, else copy Z; symmetric, so the
    # output marginal is exactly uniform and realism holds with equality
    probs = np.zeros((2, 2, 2))
    for z in range(2):
        for v in range(2):
            probs[z, v, v] += 0.3
            probs[z, v, z] += 0.7
    dec = Channel((("Z", 2), ("V", 2)), (("Y", 2),), probs)
    return source, rdpsi.assemble(source, enc, dec)


def main():
    source, point = operating_point()
    region = rdpsi.evaluate(point, source)
    i_zv = mutual_information(point.joint, ["Z"], ["V"])
    print("Operating point: DSBS(0.2), BSC(0.05) encoder, copy-or-emit decoder")
    print(f"  rate I(X;V|Z)    = {region.rate:.4f} bits")
    print(f"  I(Z;V)           = {i_zv:.4f} bits (virtual-message budget)")
    print(f"  distortion       = {region.distortion:.4f}")
    print(f"  realism gap      = {region.realism_gap:.2e}")
    print()

    epsilon = 2.0 * (i_zv - 0.126)
    print("   n   words  m'   distortion  m'-errors  flag rate  block TV")
    for n in (6, 9, 12):
        plan = plan_rates(point, n, epsilon)
        rep = simulate(source, point, plan, trials=2000, seed=42,
                       delta_typ=0.2, exact_tv=True)
        print(f"{n:4d}  {plan.n_words:6d}  {plan.mprime_size:2d}  "
              f"{rep.avg_distortion:10.4f}  {rep.mprime_error_rate:9.4f}  "
              f"{rep.decoder_flag_rate:9.4f}  {rep.tv_exact:8.4f}")
    print()
    print("The virtual message is never transmitted: the decoder identifies")
    print("it from its own observation by matching empirical pair types, and")
    print("a wrong pick is used as-is (no genie). Distortion hugs the target")
    print("while the block-level realism gap shrinks with n as the codebook")
    print("mixture smooths toward the product law.")


if __name__ == "__main__":
    main()
