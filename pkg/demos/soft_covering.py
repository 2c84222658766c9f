"""Soft covering at finite blocklength: rate above vs below the threshold.

A random codebook of rate R, pushed through a memoryless channel, induces
an output mixture. When R exceeds the mutual information between codeword
letter and output, the mixture converges to the i.i.d. product law in
total variation; below the threshold it cannot. The total variations here
are exact (full enumeration of the output space), not sampled.
"""

import numpy as np

from rdpsi.coding_sim import soft_cover_sweep

# binary-symmetric emission with I(V;Y) close to 0.30 bits
Q = 0.189298
EMIT = np.array([[1 - Q, Q], [Q, 1 - Q]])


def main():
    rates = [0.15, 0.45, 0.75]
    ns = [4, 6, 8, 10, 12]
    rows = soft_cover_sweep(np.array([0.5, 0.5]), EMIT, rates, ns,
                            codebooks_per_cell=24, seed=3)
    by_rate = {r: [row for row in rows if row["rate"] == r] for r in rates}

    print("Mean exact TV between codebook mixture and the product law")
    print("(binary emission, I(V;Y) ~ 0.30 bits; 24 codebooks per cell)")
    print()
    print("  n   " + "".join(f"  R={r:4.2f}" for r in rates))
    for i, n in enumerate(ns):
        cells = "".join(f"{by_rate[r][i]['tv_mean']:8.4f}" for r in rates)
        print(f"{n:4d} " + cells)
    print()
    print("Above the threshold (R=0.45, 0.75) the distance trends down with")
    print("n, faster at the larger excess rate; the wiggles at small n come")
    print("from the integer word count floor(2^(nR)). Below the threshold")
    print("(R=0.15) the codebook is too sparse to imitate the product law and")
    print("the distance climbs toward its maximum instead.")


if __name__ == "__main__":
    main()
