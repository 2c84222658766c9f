"""Entropy and mutual-information functionals on finite pmfs, plus the
Gaussian conditional differential entropy via Schur complements.

Discrete quantities are reported in bits. Gaussian differential entropies
are computed in nats (callers convert with log2(e) where a bit value is
wanted). Tiny negative information values caused by float cancellation,
in [-1e-9, 0), are clipped to zero; anything more negative raises
:class:`~rdpsi.errors.NumericError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError
from .prob_core import FinitePmf, marginalize

LOG2E = math.log2(math.e)

# Negative-information noise floor: clip above, raise below.
NEG_CLIP = 1e-9

# Condition-number guard for conditioning blocks of covariance matrices.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class InfoReport:
    """A value in bits with an optional named decomposition (chain-rule terms)."""

    value: float
    decomposition: tuple[tuple[str, float], ...] = ()


def _clip_info(value: float, what: str) -> float:
    if value < -NEG_CLIP:
        raise NumericError(f"{what} = {value:.6e} is negative beyond the 1e-9 noise floor")
    return max(value, 0.0)


def entropy(p: FinitePmf) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    arr = p.probs.ravel()
    pos = arr[arr > 0.0]
    return float(-(pos * np.log2(pos)).sum())


def _grouped(p: FinitePmf, groups: Sequence[Sequence[str]]) -> np.ndarray:
    """Marginal of p on the union of the groups, reshaped to one dimension
    per group (group order as given). Groups must be disjoint and non-empty."""
    flat: list[str] = []
    for g in groups:
        g = list(g)
        if not g:
            raise ValueError("every axis group must be non-empty")
        flat.extend(g)
    if len(set(flat)) != len(flat):
        raise ValueError(f"axis groups overlap: {groups}")
    m = marginalize(p, flat)
    # reorder to group order, then collapse each group to a single dim
    order = [m.axis_index(name) for name in flat]
    arr = np.transpose(m.probs, order)
    sizes = [s for _, s in (m.axes[i] for i in order)]
    shape = []
    pos = 0
    for g in groups:
        k = len(list(g))
        shape.append(int(np.prod(sizes[pos : pos + k])))
        pos += k
    return arr.reshape(shape)


def mutual_information(p: FinitePmf, group_a: Sequence[str], group_b: Sequence[str]) -> float:
    """I(A; B) in bits; axes outside the two groups are marginalized out."""
    pab = _grouped(p, [group_a, group_b])
    pa = pab.sum(axis=1)
    pb = pab.sum(axis=0)
    mask = pab > 0.0
    num = pab[mask]
    den = np.outer(pa, pb)[mask]
    val = float((num * (np.log2(num) - np.log2(den))).sum())
    return _clip_info(val, "mutual information")


def conditional_mutual_information(
    p: FinitePmf,
    group_a: Sequence[str],
    group_b: Sequence[str],
    group_c: Sequence[str],
) -> float:
    """I(A; B | C) in bits, by explicit conditioning: the pmf of C weights
    the plain mutual information of each conditional slice."""
    pabc = _grouped(p, [group_a, group_b, group_c])
    pc = pabc.sum(axis=(0, 1))
    total = 0.0
    for k in range(pabc.shape[2]):
        w = pc[k]
        if w <= 0.0:
            continue
        slab = pabc[:, :, k] / w
        pa = slab.sum(axis=1)
        pb = slab.sum(axis=0)
        mask = slab > 0.0
        num = slab[mask]
        den = np.outer(pa, pb)[mask]
        total += w * float((num * (np.log2(num) - np.log2(den))).sum())
    return _clip_info(total, "conditional mutual information")


def chain_rule_report(
    p: FinitePmf,
    group_a: Sequence[str],
    group_b: Sequence[str],
    group_c: Sequence[str],
) -> InfoReport:
    """I(A; B, C) with its chain-rule decomposition I(A;C) + I(A;B|C)."""
    i_ac = mutual_information(p, group_a, group_c)
    i_ab_c = conditional_mutual_information(p, group_a, group_b, group_c)
    i_joint = mutual_information(p, group_a, list(group_b) + list(group_c))
    return InfoReport(
        value=i_joint,
        decomposition=(("I(A;C)", i_ac), ("I(A;B|C)", i_ab_c)),
    )


def gaussian_cond_entropy(
    cov: np.ndarray, target: Sequence[int], given: Sequence[int] = ()
) -> float:
    """h(target | given) in nats for a jointly Gaussian vector with the given
    covariance: 0.5 * log((2*pi*e)^k det(Schur complement)).

    ``target`` and ``given`` are disjoint index sets into ``cov``. With an
    empty ``given`` this is the unconditional differential entropy. The
    conditioning block must be well conditioned (condition number <= 1e12).
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"cov must be square, got shape {cov.shape}")
    scale = max(1.0, float(np.abs(cov).max()))
    if np.max(np.abs(cov - cov.T)) > 1e-9 * scale:
        raise ValueError("cov must be symmetric")
    t = list(int(i) for i in target)
    g = list(int(i) for i in given)
    if not t:
        raise ValueError("target must be non-empty")
    if set(t) & set(g):
        raise ValueError("target and given must be disjoint")
    n = cov.shape[0]
    for i in t + g:
        if not (0 <= i < n):
            raise ValueError(f"index {i} out of range for {n}x{n} covariance")
    stt = cov[np.ix_(t, t)]
    if g:
        sgg = cov[np.ix_(g, g)]
        cond = float(np.linalg.cond(sgg))
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise NumericError(
                f"conditioning block is ill-conditioned (condition number {cond:.3e} "
                f"> {MAX_CONDITION:.1e})"
            )
        stg = cov[np.ix_(t, g)]
        schur = stt - stg @ np.linalg.solve(sgg, stg.T)
    else:
        schur = stt
    sign, logdet = np.linalg.slogdet(schur)
    if sign <= 0:
        raise NumericError(
            f"conditional covariance is not positive definite (det sign {sign})"
        )
    k = len(t)
    return 0.5 * (k * math.log(2.0 * math.pi * math.e) + float(logdet))
