"""Finite-blocklength simulation of the layered random-coding scheme.

The scheme draws a bank of auxiliary codewords V^n indexed by a message m,
a virtual message m' and a common-randomness index j. The encoder observes
x^n and samples (m, m') from the likelihood posterior (proportional to the
product of per-letter p_{X|V} likelihoods); only m is transmitted. The
decoder recovers m' from its side information z^n by joint typicality over
the sub-bank {V^n(m, a, j)}_a, then passes (z^n, v^n) letterwise through
the decoder channel to emit y^n.

Realism of the output is tracked two ways: an empirical pooled per-letter
marginal, and, when the alphabet and bank sizes permit, the exact n-letter
output law of the uniform mixture over the bank, whose total variation to
the product target is the soft-covering quantity. A maximal coupling
between that mixture and the product target yields a correction channel
that restores the product law exactly, at a distortion cost bounded by
d_max times the total variation.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError
from .info_measures import mutual_information
from .prob_core import (
    Channel,
    FinitePmf,
    coupling_to_channel,
    maximal_coupling,
    product_power,
    total_variation,
)
from .region_solver import FeasiblePoint, SourceSpec
from .seeds import derived_rng

MAX_CODEBOOK_SYMBOLS = 2**26
MAX_EXACT_OUTCOMES = 2**20
MAX_EXACT_WORDS = 2**14
_LOG_FLOOR = -745.0  # stands in for log(0); exp() underflows beyond it


def default_delta_typ(n: int) -> float:
    """Default additive typicality width, shrinking like n^(-1/3)."""
    return 0.15 * float(n) ** (-1.0 / 3.0)


# ---------------------------------------------------------------------------
# rate planning


@dataclass(frozen=True)
class RatePlan:
    """Blocklength-n operating point of the layered random code.

    Rates are in bits per source letter. ``rate_m`` indexes the transmitted
    message, ``rate_mprime`` the virtual message recovered from side
    information, ``rate_j`` the common randomness. Sizes are the floored
    codebook dimensions, never below 1; ``warnings`` lists the
    floor-induced violations of the covering / decodability / realism
    margins (the planned real-valued rates satisfy them by construction
    whenever ``planned_ok`` holds).
    """

    n: int
    epsilon: float
    rate_m: float
    rate_mprime: float
    rate_j: float
    m_size: int
    mprime_size: int
    j_size: int
    i_zv: float
    i_xv: float
    i_yv: float
    planned_ok: bool
    warnings: tuple[str, ...] = ()

    @property
    def eff_rate_m(self) -> float:
        return math.log2(self.m_size) / self.n

    @property
    def eff_rate_mprime(self) -> float:
        return math.log2(self.mprime_size) / self.n

    @property
    def eff_rate_j(self) -> float:
        return math.log2(self.j_size) / self.n

    @property
    def n_words(self) -> int:
        return self.m_size * self.mprime_size * self.j_size

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "rate_m": self.rate_m,
            "rate_mprime": self.rate_mprime,
            "rate_j": self.rate_j,
            "m_size": self.m_size,
            "mprime_size": self.mprime_size,
            "j_size": self.j_size,
            "i_zv": self.i_zv,
            "i_xv": self.i_xv,
            "i_yv": self.i_yv,
            "planned_ok": self.planned_ok,
            "warnings": list(self.warnings),
        }


def plan_rates(
    point: FeasiblePoint,
    n: int,
    epsilon: float,
    rc: float = 0.0,
) -> RatePlan:
    """Derive the layered code rates for a feasible point at blocklength n.

    The virtual-message rate sits at the midpoint of (I(Z;V) - epsilon,
    I(Z;V)), clipped below at 0, so it is both coverable and decodable
    with margin; it is exactly 0 when I(Z;V) vanishes. The message rate
    tops the pair up to I(X;V) + epsilon so the two layers jointly cover
    the source; ``rc`` is the common-randomness budget. Floors to integer
    sizes can break the margins at small n; such violations are recorded
    in ``warnings``, never raised.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if rc < 0.0:
        raise ValueError(f"rc must be >= 0, got {rc}")
    joint = point.joint
    xn = point.enc.input_axes[0][0]
    vn = point.enc.output_axes[0][0]
    zn = point.dec.input_axes[0][0]
    yn = point.dec.output_axes[0][0]
    i_zv = mutual_information(joint, [zn], [vn])
    i_xv = mutual_information(joint, [xn, zn], [vn])  # equals I(X;V) by the chain
    i_yv = mutual_information(joint, [yn], [vn])

    if i_zv <= 1e-9:
        rate_mprime = 0.0
    else:
        rate_mprime = 0.5 * (max(i_zv - epsilon, 0.0) + i_zv)
    rate_m = max(i_xv + epsilon - rate_mprime, 0.0)
    rate_j = float(rc)

    m_size = max(1, math.floor(2.0 ** (n * rate_m)))
    mprime_size = max(1, math.floor(2.0 ** (n * rate_mprime)))
    j_size = max(1, math.floor(2.0 ** (n * rate_j)))

    planned_ok = (rate_m + rate_mprime > i_xv - 1e-12) and (
        rate_m + rate_mprime + rate_j > i_yv - 1e-12
    )
    warnings = []
    eff_m = math.log2(m_size) / n
    eff_mp = math.log2(mprime_size) / n
    eff_j = math.log2(j_size) / n
    if eff_m + eff_mp <= i_xv - 1e-12:
        warnings.append(
            f"floored covering rate {eff_m + eff_mp:.6f} <= I(X;V) = {i_xv:.6f}"
        )
    if i_zv > 1e-9 and eff_mp >= i_zv + 1e-12:
        warnings.append(
            f"floored virtual-message rate {eff_mp:.6f} >= I(Z;V) = {i_zv:.6f}; "
            "side-information decoding margin lost"
        )
    if eff_m + eff_mp + eff_j <= i_yv - 1e-12:
        warnings.append(
            f"floored total randomness {eff_m + eff_mp + eff_j:.6f} <= "
            f"I(Y;V) = {i_yv:.6f}; output-realism margin lost"
        )
    return RatePlan(
        n=n,
        epsilon=float(epsilon),
        rate_m=rate_m,
        rate_mprime=rate_mprime,
        rate_j=rate_j,
        m_size=m_size,
        mprime_size=mprime_size,
        j_size=j_size,
        i_zv=i_zv,
        i_xv=i_xv,
        i_yv=i_yv,
        planned_ok=planned_ok,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# codebooks


_MAGIC = b"RDPSICB1"


def _word_dtype(v_size: int):
    if v_size <= 2**8:
        return np.uint8
    if v_size <= 2**16:
        return np.uint16
    return np.uint32


@dataclass(frozen=True)
class Codebook:
    """The iid auxiliary bank: words[m, mprime, j] is a length-n sequence
    of V-symbols."""

    words: np.ndarray  # (M, Mp, J, n) unsigned ints
    v_size: int
    seed: int | None = None

    def __post_init__(self):
        w = np.asarray(self.words)
        if w.ndim != 4:
            raise ValueError(f"words must be 4-d (M, Mp, J, n), got shape {w.shape}")
        if w.size and int(w.max()) >= self.v_size:
            raise ValueError("codeword symbol out of range")
        w = np.ascontiguousarray(w)
        w.setflags(write=False)
        object.__setattr__(self, "words", w)

    @property
    def m_size(self) -> int:
        return self.words.shape[0]

    @property
    def mprime_size(self) -> int:
        return self.words.shape[1]

    @property
    def j_size(self) -> int:
        return self.words.shape[2]

    @property
    def n(self) -> int:
        return self.words.shape[3]

    def sub_bank(self, j: int) -> np.ndarray:
        """All words sharing common-randomness index j: shape (M, Mp, n)."""
        return self.words[:, :, j, :]

    def save(self, path) -> None:
        header = json.dumps(
            {
                "shape": list(self.words.shape),
                "dtype": str(self.words.dtype),
                "v_size": self.v_size,
                "seed": self.seed,
            }
        ).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(len(header).to_bytes(4, "big"))
            fh.write(header)
            fh.write(self.words.tobytes())

    @staticmethod
    def load(path) -> "Codebook":
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != _MAGIC:
                raise ValueError(f"not a codebook file (magic {magic!r})")
            hlen = int.from_bytes(fh.read(4), "big")
            header = json.loads(fh.read(hlen).decode())
            shape = tuple(header["shape"])
            dtype = np.dtype(header["dtype"])
            raw = fh.read()
        expected = int(np.prod(shape)) * dtype.itemsize
        if len(raw) != expected:
            raise ValueError(
                f"codebook payload is {len(raw)} bytes, expected {expected}"
            )
        words = np.frombuffer(raw, dtype=dtype).reshape(shape)
        return Codebook(words=words, v_size=header["v_size"], seed=header["seed"])


def gen_codebook(pv: FinitePmf | np.ndarray, plan: RatePlan, seed: int) -> Codebook:
    """Draw the bank iid from the auxiliary marginal p_V."""
    probs = pv.probs if isinstance(pv, FinitePmf) else np.asarray(pv, dtype=np.float64)
    if probs.ndim != 1:
        raise ValueError("pv must be one-dimensional")
    v_size = probs.size
    total = plan.m_size * plan.mprime_size * plan.j_size * plan.n
    if total > MAX_CODEBOOK_SYMBOLS:
        raise CapacityError(
            f"codebook would hold {total} symbols "
            f"(limit {MAX_CODEBOOK_SYMBOLS}); reduce rates or blocklength"
        )
    rng = derived_rng(seed, "codebook")
    shape = (plan.m_size, plan.mprime_size, plan.j_size, plan.n)
    words = rng.choice(v_size, size=shape, p=probs / probs.sum()).astype(
        _word_dtype(v_size)
    )
    return Codebook(words=words, v_size=v_size, seed=seed)


# ---------------------------------------------------------------------------
# encoder and decoders


def log_likelihood_table(point: FeasiblePoint) -> np.ndarray:
    """Per-letter log p_{X|V} lookup for the likelihood encoder.

    Entry [v, x] holds log p_{X|V}(x|v); zero-probability pairs carry a
    large negative floor instead of -inf so codeword scores stay NaN-free.
    Symbols v outside the support of p_V get a uniform row (they never
    appear in codebooks drawn from p_V).
    """
    joint = point.joint.probs  # (x, z, v, y)
    pxv = joint.sum(axis=(1, 3))
    pv = pxv.sum(axis=0)
    nx = pxv.shape[0]
    px_given_v = np.where(pv[None, :] > 0.0, pxv / np.where(pv > 0, pv, 1.0), 1.0 / nx)
    table = np.full((pxv.shape[1], nx), _LOG_FLOOR)
    pos = px_given_v.T > 0.0
    table[pos] = np.log(px_given_v.T[pos])
    return table


def _bank_log_scores(
    sub_bank: np.ndarray, xn: np.ndarray, log_px_given_v: np.ndarray
) -> np.ndarray:
    return log_px_given_v[sub_bank, xn[None, None, :]].sum(axis=-1)


def encoder_posterior(
    cb: Codebook, xn: np.ndarray, j: int, log_px_given_v: np.ndarray
) -> np.ndarray:
    """Exact likelihood-encoder posterior over (m, m') for observation x^n.

    Degenerate all-floor scores yield the uniform posterior (matching the
    sampling fallback in :func:`encode`).
    """
    scores = _bank_log_scores(cb.sub_bank(j), np.asarray(xn), log_px_given_v)
    top = float(scores.max())
    if top <= _LOG_FLOOR * max(xn.size, 1) * 0.5:
        return np.full(scores.shape, 1.0 / scores.size)
    w = np.exp(scores - top)
    tot = float(w.sum())
    if not np.isfinite(tot) or tot <= 0.0:
        return np.full(scores.shape, 1.0 / scores.size)
    return w / tot


def encode(
    cb: Codebook,
    xn: np.ndarray,
    j: int,
    log_px_given_v: np.ndarray,
    rng: np.random.Generator,
) -> tuple[int, int, bool]:
    """Likelihood encoder: sample (m, m') from the posterior induced by the
    word likelihoods, in log-space with max-subtraction.

    Returns (m, mprime, flagged); ``flagged`` marks a degenerate posterior
    replaced by the uniform one.
    """
    xn = np.asarray(xn)
    scores = _bank_log_scores(cb.sub_bank(j), xn, log_px_given_v)
    top = float(scores.max())
    flagged = False
    if top <= _LOG_FLOOR * max(xn.size, 1) * 0.5:
        weights = np.full(scores.size, 1.0 / scores.size)
        flagged = True
    else:
        w = np.exp(scores - top).ravel()
        tot = float(w.sum())
        if not np.isfinite(tot) or tot <= 0.0:
            weights = np.full(scores.size, 1.0 / scores.size)
            flagged = True
        else:
            weights = w / tot
    cdf = np.cumsum(weights)
    flat = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    flat = min(flat, scores.size - 1)
    m, mprime = divmod(flat, scores.shape[1])
    return m, mprime, flagged


@dataclass(frozen=True)
class DecodeResult:
    mprime_hat: int
    flagged: bool
    n_typical: int


def _joint_type(v_seq: np.ndarray, z_seq: np.ndarray, nv: int, nz: int) -> np.ndarray:
    counts = np.zeros((nv, nz))
    np.add.at(counts, (v_seq, z_seq), 1.0)
    return counts / v_seq.size


def decode_mprime(
    cb: Codebook,
    m: int,
    j: int,
    zn: np.ndarray,
    pvz: np.ndarray,
    delta_typ: float | None = None,
) -> DecodeResult:
    """Recover the virtual message from side information by robust
    typicality over the sub-bank {V^n(m, a, j)}_a.

    ``pvz`` is the single-letter joint of (V, Z). A candidate is typical
    when every cell of its empirical (v, z) type is within ``delta_typ``
    of pvz and no cell outside the support of pvz is occupied. A unique
    typical candidate is returned unflagged. With several typical
    candidates, the one of smallest L1 type deviation among them is
    returned flagged; with none, the decoder has no evidence and returns
    index 0 flagged. Errors are data, not exceptions.
    """
    zn = np.asarray(zn)
    n = zn.size
    if delta_typ is None:
        delta_typ = default_delta_typ(n)
    sub_words = cb.words[m, :, j, :]
    nv, nz = pvz.shape
    deviations = np.empty(sub_words.shape[0])
    typical = np.zeros(sub_words.shape[0], dtype=bool)
    in_support = pvz > 0.0
    for a in range(sub_words.shape[0]):
        t = _joint_type(sub_words[a].astype(np.int64), zn, nv, nz)
        diff = np.abs(t - pvz)
        deviations[a] = float(diff.sum())
        typical[a] = bool(
            (diff.max() <= delta_typ) and not np.any((t > 0.0) & ~in_support)
        )
    n_typ = int(typical.sum())
    if n_typ == 1:
        return DecodeResult(int(np.argmax(typical)), flagged=False, n_typical=1)
    if n_typ == 0:
        return DecodeResult(0, flagged=True, n_typical=0)
    pool = np.flatnonzero(typical)
    best = pool[int(np.argmin(deviations[pool]))]
    return DecodeResult(int(best), flagged=True, n_typical=n_typ)


def _emit_letterwise(
    zn: np.ndarray, vn: np.ndarray, dec_probs: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    rows = dec_probs[zn, vn]  # (n, ny)
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(zn.size) * cdf[:, -1]
    return (u[:, None] >= cdf).sum(axis=1).astype(np.int64)


def decode_output(
    cb: Codebook,
    m: int,
    mprime_hat: int,
    j: int,
    zn: np.ndarray,
    dec: Channel | np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Emit y^n letterwise through the decoder channel p_{Y|Z,V} using the
    decoded codeword."""
    dec_probs = dec.probs if isinstance(dec, Channel) else np.asarray(dec)
    vn = cb.words[m, mprime_hat, j, :].astype(np.int64)
    return _emit_letterwise(np.asarray(zn), vn, dec_probs, rng)


# ---------------------------------------------------------------------------
# exact output marginals and soft covering


def exact_output_marginal(
    cb: Codebook | np.ndarray,
    emit: Channel | np.ndarray,
    axis_name: str = "Y",
) -> FinitePmf:
    """Exact n-letter output law of the uniform mixture over a word bank.

    Each word w contributes the product measure with per-letter rows
    emit[w_t]; the result is their average, a pmf over the n-fold output
    alphabet with axes named ``{axis_name}.t``. ``cb`` may be a Codebook
    (all its words are used) or a plain (count, n) index array. Guarded:
    at most 2**14 words and 2**20 outcomes.
    """
    if isinstance(cb, Codebook):
        words = cb.words.reshape(-1, cb.n)
    else:
        words = np.asarray(cb)
    if words.ndim != 2:
        raise ValueError(f"words must be 2-d (count, n), got shape {words.shape}")
    emit_probs = emit.probs if isinstance(emit, Channel) else np.asarray(emit)
    if emit_probs.ndim != 2:
        raise ValueError("emit must be a (v, y) matrix or single-in/out Channel")
    count, n = words.shape
    ny = emit_probs.shape[1]
    outcomes = ny**n
    if count > MAX_EXACT_WORDS:
        raise CapacityError(
            f"{count} words exceed the exact-marginal limit {MAX_EXACT_WORDS}"
        )
    if outcomes > MAX_EXACT_OUTCOMES:
        raise CapacityError(
            f"{outcomes} outcomes exceed the exact-marginal limit {MAX_EXACT_OUTCOMES}"
        )
    acc = np.zeros(outcomes)
    batch = max(1, (2**24) // max(outcomes, 1))
    for lo in range(0, count, batch):
        chunk = words[lo : lo + batch].astype(np.int64)
        arr = np.ones((chunk.shape[0], 1))
        for t in range(n):
            rows = emit_probs[chunk[:, t]]  # (B, ny)
            arr = (arr[:, :, None] * rows[:, None, :]).reshape(chunk.shape[0], -1)
        acc += arr.sum(axis=0)
    acc /= count
    axes = tuple((f"{axis_name}.{t}", ny) for t in range(n))
    return FinitePmf(axes, acc.reshape((ny,) * n))


def soft_cover_sweep(
    pv: FinitePmf | np.ndarray,
    emit: Channel | np.ndarray,
    rates: Sequence[float],
    ns: Sequence[int],
    codebooks_per_cell: int = 8,
    seed: int = 0,
    axis_name: str = "Y",
) -> list[dict]:
    """Exact soft-covering total variation over a (rate, blocklength) grid.

    For each cell, ``codebooks_per_cell`` independent banks of
    floor(2**(n*rate)) words are drawn iid from pv and the TV between the
    mixture output law and the product target is computed exactly. Cells
    whose exact computation would breach the guards are reported with
    ``skipped=True`` instead of raising.
    """
    pv_arr = pv.probs if isinstance(pv, FinitePmf) else np.asarray(pv, dtype=np.float64)
    emit_probs = emit.probs if isinstance(emit, Channel) else np.asarray(emit)
    py = pv_arr @ emit_probs
    ny = emit_probs.shape[1]
    rows = []
    for n in ns:
        n_fits = ny**n <= MAX_EXACT_OUTCOMES
        target = (
            product_power(FinitePmf(((axis_name, ny),), py), int(n)) if n_fits else None
        )
        for rate in rates:
            ell = max(1, math.floor(2.0 ** (n * rate)))
            row = {
                "n": int(n),
                "rate": float(rate),
                "n_words": ell,
                "draws": int(codebooks_per_cell),
                "tv_mean": float("nan"),
                "tv_sd": float("nan"),
                "skipped": False,
            }
            if ell > MAX_EXACT_WORDS or not n_fits:
                row["skipped"] = True
                rows.append(row)
                continue
            tvs = np.empty(codebooks_per_cell)
            for i in range(codebooks_per_cell):
                rng = derived_rng(seed, "soft-cover", n, round(rate, 12), i)
                words = rng.choice(pv_arr.size, size=(ell, n), p=pv_arr / pv_arr.sum())
                gamma = exact_output_marginal(words, emit_probs, axis_name=axis_name)
                tvs[i] = total_variation(gamma, target)
            row["tv_mean"] = float(tvs.mean())
            row["tv_sd"] = (
                float(tvs.std(ddof=1)) if codebooks_per_cell > 1 else 0.0
            )
            rows.append(row)
    return rows


def perfect_realism_correct(
    p_out: FinitePmf, target: FinitePmf
) -> tuple[Channel, float]:
    """Correction channel mapping the simulated output law exactly onto the
    target law.

    Built from the maximal coupling of the two pmfs: the channel keeps the
    sequence unchanged with the largest probability a mass-transport with
    these marginals allows, so the chance of altering the output (and
    hence the per-symbol distortion increase, scaled by d_max) equals
    TV(p_out, target). Returns (channel, mismatch probability).
    """
    coupling = maximal_coupling(p_out, target)
    return coupling_to_channel(coupling), coupling.mismatch_probability


# ---------------------------------------------------------------------------
# full pipeline


@dataclass(frozen=True)
class SimReport:
    """Measured behaviour of the layered scheme at one operating point.

    ``tv_exact`` is the exact block TV between the uniform-mixture output
    law of the drawn bank and the product realism target, present only
    when the instance fits the enumeration guards; ``tv_per_letter``
    compares the pooled empirical single-letter Y marginal to p_X and is
    always present. ``correction_skipped`` is set when correction was
    requested but the exact path was unavailable.
    """

    plan: RatePlan
    trials: int
    seed: int
    delta_typ: float
    avg_distortion: float
    se_distortion: float
    mprime_error_rate: float
    encoder_flag_rate: float
    decoder_flag_rate: float
    tv_per_letter: float
    tv_exact: float | None
    corrected: bool = False
    correction_skipped: bool = False
    corrected_avg_distortion: float | None = None
    corrected_tv_per_letter: float | None = None
    wall_clock_s: float | None = None

    def to_dict(self, include_timing: bool = False) -> dict:
        doc = {
            "plan": self.plan.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
            "delta_typ": self.delta_typ,
            "avg_distortion": self.avg_distortion,
            "se_distortion": self.se_distortion,
            "mprime_error_rate": self.mprime_error_rate,
            "encoder_flag_rate": self.encoder_flag_rate,
            "decoder_flag_rate": self.decoder_flag_rate,
            "tv_per_letter": self.tv_per_letter,
            "tv_exact": self.tv_exact,
            "corrected": self.corrected,
            "correction_skipped": self.correction_skipped,
            "corrected_avg_distortion": self.corrected_avg_distortion,
            "corrected_tv_per_letter": self.corrected_tv_per_letter,
        }
        if include_timing:
            doc["wall_clock_s"] = self.wall_clock_s
        return doc

    def csv_row(self) -> dict:
        return {
            "n": self.plan.n,
            "rate_m": self.plan.rate_m,
            "rate_mprime": self.plan.rate_mprime,
            "rate_j": self.plan.rate_j,
            "trials": self.trials,
            "avg_distortion": self.avg_distortion,
            "mprime_error_rate": self.mprime_error_rate,
            "tv_exact": "" if self.tv_exact is None else self.tv_exact,
            "tv_per_letter": self.tv_per_letter,
            "seed": self.seed,
        }


def _sample_iid_joint(
    pxz: np.ndarray, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    nx, nz = pxz.shape
    flat = rng.choice(nx * nz, size=n, p=pxz.ravel() / pxz.sum())
    return flat // nz, flat % nz


def simulate(
    source: SourceSpec,
    point: FeasiblePoint,
    plan: RatePlan,
    trials: int,
    seed: int,
    delta_typ: float | None = None,
    exact_tv: bool | None = None,
    correct_realism: bool = False,
    codebook: Codebook | None = None,
) -> SimReport:
    """Run the full encode/decode pipeline and measure distortion and
    realism.

    Per trial: draw (x^n, z^n) iid from the source, draw j uniformly,
    encode, decode m' from z^n, emit y^n through the decoder channel. The
    wrong codeword is used as-is after a decoding error (no genie).

    ``exact_tv=None`` computes the exact mixture-output total variation
    when the guard limits allow and skips it otherwise; True insists (and
    may raise CapacityError); False always skips. ``correct_realism=True``
    additionally passes every emitted sequence through the maximal-coupling
    correction channel and reports corrected statistics; when the exact
    path is unavailable the correction is skipped and flagged, not raised.
    """
    t_start = time.perf_counter()
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    n = plan.n
    if delta_typ is None:
        delta_typ = default_delta_typ(n)
    pxz = source.pxz.probs
    d = source.distortion
    dec_probs = np.asarray(point.dec.probs)  # (nz, nv, ny)
    nz = pxz.shape[1]
    ny = dec_probs.shape[2]

    log_px_given_v = log_likelihood_table(point)
    joint = point.joint.probs
    pv = joint.sum(axis=(0, 1, 3))
    pvz = joint.sum(axis=(0, 3)).T  # (v, z)

    if codebook is None:
        codebook = gen_codebook(pv, plan, seed)

    # exact mixture output law, when within guard limits
    tv_exact_val: float | None = None
    gamma = None
    target = None
    want_exact = exact_tv is not False
    flat_count = codebook.m_size * codebook.mprime_size * codebook.j_size
    fits = flat_count <= MAX_EXACT_WORDS and ny**n <= MAX_EXACT_OUTCOMES
    if want_exact and (fits or exact_tv is True):
        pz_given_v = np.where(
            pv[:, None] > 0.0, pvz / np.where(pv[:, None] > 0, pv[:, None], 1.0),
            1.0 / nz,
        )
        emit_eff = np.einsum("vz,zvy->vy", pz_given_v, dec_probs)
        gamma = exact_output_marginal(codebook, emit_eff, axis_name="Y")
        px = pxz.sum(axis=1)
        # realism target: n-fold product of the source X marginal
        target = product_power(FinitePmf((("Y", ny),), px), n)
        tv_exact_val = total_variation(gamma, target)

    correction_skipped = False
    apply_correction = False
    if correct_realism:
        if gamma is None:
            correction_skipped = True
        else:
            correction, _ = perfect_realism_correct(gamma, target)
            corr_cdf = np.cumsum(correction.row_matrix(), axis=1)
            y_weights = ny ** np.arange(n - 1, -1, -1)
            apply_correction = True

    dist_per_trial = np.empty(trials)
    corr_dist_per_trial = np.empty(trials) if apply_correction else None
    mprime_errors = 0
    enc_flags = 0
    dec_flags = 0
    y_hist = np.zeros(ny)
    y_corr_hist = np.zeros(ny) if apply_correction else None

    for t in range(trials):
        rng = derived_rng(seed, "trial", t)
        x_seq, z_seq = _sample_iid_joint(pxz, n, rng)
        j = int(rng.integers(plan.j_size))
        m, mprime, eflag = encode(codebook, x_seq, j, log_px_given_v, rng)
        enc_flags += int(eflag)
        res = decode_mprime(codebook, m, j, z_seq, pvz, delta_typ=delta_typ)
        dec_flags += int(res.flagged)
        mprime_errors += int(res.mprime_hat != mprime)
        y_seq = decode_output(codebook, m, res.mprime_hat, j, z_seq, dec_probs, rng)
        dist_per_trial[t] = d[x_seq, y_seq].mean()
        np.add.at(y_hist, y_seq, 1.0)
        if apply_correction:
            idx = int(y_seq @ y_weights)
            u = rng.random() * corr_cdf[idx, -1]
            out = int(np.searchsorted(corr_cdf[idx], u, side="right"))
            out = min(out, corr_cdf.shape[1] - 1)
            y_corr = (out // y_weights) % ny
            corr_dist_per_trial[t] = d[x_seq, y_corr].mean()
            np.add.at(y_corr_hist, y_corr, 1.0)

    px = pxz.sum(axis=1)
    emp = y_hist / y_hist.sum()
    return SimReport(
        plan=plan,
        trials=trials,
        seed=seed,
        delta_typ=float(delta_typ),
        avg_distortion=float(dist_per_trial.mean()),
        se_distortion=(
            float(dist_per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        ),
        mprime_error_rate=mprime_errors / trials,
        encoder_flag_rate=enc_flags / trials,
        decoder_flag_rate=dec_flags / trials,
        tv_per_letter=0.5 * float(np.abs(emp - px).sum()),
        tv_exact=tv_exact_val,
        corrected=apply_correction,
        correction_skipped=correction_skipped,
        corrected_avg_distortion=(
            float(corr_dist_per_trial.mean()) if apply_correction else None
        ),
        corrected_tv_per_letter=(
            0.5 * float(np.abs(y_corr_hist / y_corr_hist.sum() - px).sum())
            if apply_correction
            else None
        ),
        wall_clock_s=time.perf_counter() - t_start,
    )
