"""Single-letter trade-off region for lossy coding with decoder side
information under an output-realism constraint.

A source is a joint pmf p_{X,Z} plus a distortion matrix d(x, y) on the
source alphabet. A feasible point fixes an encoder test channel p_{V|X}
and a decoder channel p_{Y|Z,V}; the induced joint

    p(x, z, v, y) = p(x, z) * p(v|x) * p(y|z, v)

automatically satisfies the two Markov chains Z - X - V and X - (Z,V) - Y.
The point's coordinates are

    rate        = I(X; V | Z)
    rc_sum      = I(Y; V) - I(Z; V)   (rate + common-randomness floor)
    distortion  = E[d(X, Y)]
    realism_gap = TV(p_Y, p_X)

``min_rate`` minimizes the rate over feasible points subject to a
distortion budget and (near-)exact realism, by multi-start projected
gradient descent with finite-difference gradients, quadratic penalties on
the two constraints over a five-stage schedule, and a final exact linear
repair of the decoder toward p_Y = p_X. ``brute_force_min_rate`` is an
independent grid oracle for small instances. ``ed_min_rate`` solves the
variant where the encoder sees Z too, by reduction to an augmented source
whose "X" is the pair (X, Z) and whose realism constraint pins the whole
pair marginal.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product as _iterproduct
from typing import Mapping, Sequence

import numpy as np

from .errors import InfeasibleError, NumericError
from .info_measures import (
    conditional_mutual_information,
    mutual_information,
)
from .prob_core import (
    Channel,
    FinitePmf,
    compose,
    marginalize,
    rename_axes,
    total_variation,
)
from .seeds import derive_seed

DIST_SLACK = 1e-9  # distortion budget comparisons
MARKOV_TOL = 1e-10  # assembled joints must pass markov_check below this


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class SourceSpec:
    """A finite source: joint pmf over (X, Z) and a distortion matrix.

    The reconstruction alphabet equals the X alphabet (the realism
    constraint pins p_Y to p_X), so ``distortion`` is |X| x |X| with
    entry [x, y] = d(x, y) >= 0.
    """

    pxz: FinitePmf
    distortion: np.ndarray

    def __post_init__(self):
        if len(self.pxz.axes) != 2:
            raise ValueError(f"pxz must have exactly two axes, got {self.pxz.axes}")
        d = np.asarray(self.distortion, dtype=np.float64)
        nx = self.pxz.sizes[0]
        if d.shape != (nx, nx):
            raise ValueError(f"distortion must be {nx}x{nx}, got {d.shape}")
        if not np.all(np.isfinite(d)) or d.min() < 0.0:
            raise ValueError("distortion entries must be finite and >= 0")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "distortion", d)

    @property
    def x_axis(self):
        return self.pxz.axes[0]

    @property
    def z_axis(self):
        return self.pxz.axes[1]

    @property
    def p_x(self) -> FinitePmf:
        return marginalize(self.pxz, [self.x_axis[0]])

    @property
    def d_max(self) -> float:
        return float(self.distortion.max())

    @staticmethod
    def dsbs(q: float, names: tuple[str, str] = ("X", "Z")) -> "SourceSpec":
        """Doubly symmetric binary source: X ~ Bern(1/2), Z = X xor Bern(q),
        Hamming distortion."""
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"q must be in [0, 1], got {q}")
        xn, zn = names
        probs = np.array([[0.5 * (1 - q), 0.5 * q], [0.5 * q, 0.5 * (1 - q)]])
        pxz = FinitePmf(((xn, 2), (zn, 2)), probs)
        return SourceSpec(pxz, 1.0 - np.eye(2))

    @staticmethod
    def independent(
        px: Sequence[float],
        pz: Sequence[float],
        distortion: np.ndarray | None = None,
        names: tuple[str, str] = ("X", "Z"),
    ) -> "SourceSpec":
        """Product source p_X x p_Z; default distortion is Hamming."""
        px = np.asarray(px, dtype=np.float64)
        pz = np.asarray(pz, dtype=np.float64)
        xn, zn = names
        pxz = FinitePmf(((xn, px.size), (zn, pz.size)), np.outer(px, pz))
        if distortion is None:
            distortion = 1.0 - np.eye(px.size)
        return SourceSpec(pxz, distortion)

    def to_dict(self) -> dict:
        return {"pxz": self.pxz.to_dict(), "distortion": self.distortion.tolist()}

    @staticmethod
    def from_dict(doc: Mapping) -> "SourceSpec":
        return SourceSpec(
            FinitePmf.from_dict(doc["pxz"]),
            np.asarray(doc["distortion"], dtype=np.float64),
        )


@dataclass(frozen=True)
class FeasiblePoint:
    """An encoder/decoder pair together with the induced joint over
    (X, Z, V, Y)."""

    enc: Channel
    dec: Channel
    joint: FinitePmf

    @property
    def v_size(self) -> int:
        return self.enc.output_axes[0][1]


@dataclass(frozen=True)
class RegionPoint:
    """Coordinates of a point in the trade-off region.

    ``rc_sum`` = I(Y;V) - I(Z;V) may be negative; it is reported raw and
    only clipped at zero when exported as a rate. ``delta`` records the
    requested distortion budget when the point came from an optimizer.
    """

    rate: float
    rc_sum: float
    distortion: float
    realism_gap: float
    delta: float | None = None
    v_size: int | None = None
    feasible: bool = True


@dataclass(frozen=True)
class OptimizerOptions:
    """Knobs of the multi-start projected-gradient search."""

    starts: int = 32
    seed: int = 0
    stages: int = 5
    iters_per_stage: int = 40
    step_init: float = 0.25
    fd_step: float = 1e-6
    repair_iters: int = 400
    realism_stage_start: float = 0.05
    workers: int = 1


# ---------------------------------------------------------------------------
# assembly and evaluation


def assemble(source: SourceSpec, enc: Channel, dec: Channel) -> FeasiblePoint:
    """Compose source, encoder and decoder into the induced joint.

    ``enc`` must map the X axis to a single V axis; ``dec`` must map
    (Z, V) (in that order) to a single Y axis of the same size as X.
    """
    xn, nx = source.x_axis
    zn, nz = source.z_axis
    if enc.input_axes != ((xn, nx),):
        raise ValueError(f"enc input axes {enc.input_axes} != (({xn!r}, {nx}),)")
    if len(enc.output_axes) != 1:
        raise ValueError("enc must have a single output axis")
    vn, nv = enc.output_axes[0]
    if dec.input_axes != ((zn, nz), (vn, nv)):
        raise ValueError(
            f"dec input axes {dec.input_axes} != (({zn!r}, {nz}), ({vn!r}, {nv}))"
        )
    if len(dec.output_axes) != 1:
        raise ValueError("dec must have a single output axis")
    yn, ny = dec.output_axes[0]
    if ny != nx:
        raise ValueError(f"dec output size {ny} != source alphabet size {nx}")
    if yn in (xn, zn, vn):
        raise ValueError(f"dec output axis name {yn!r} collides with source/V axes")
    joint = compose(compose(source.pxz, enc), dec)
    return FeasiblePoint(enc=enc, dec=dec, joint=joint)


def evaluate(point: FeasiblePoint, source: SourceSpec) -> RegionPoint:
    """Rate, rc_sum, distortion and realism gap of a feasible point."""
    joint = point.joint
    xn, zn = source.x_axis[0], source.z_axis[0]
    vn = point.enc.output_axes[0][0]
    yn = point.dec.output_axes[0][0]
    rate = conditional_mutual_information(joint, [xn], [vn], [zn])
    rc_sum = mutual_information(joint, [yn], [vn]) - mutual_information(
        joint, [zn], [vn]
    )
    pxy = marginalize(joint, [xn, yn]).probs
    distortion = float(np.sum(pxy * source.distortion))
    py = rename_axes(marginalize(joint, [yn]), {yn: xn})
    gap = total_variation(py, source.p_x)
    return RegionPoint(
        rate=rate,
        rc_sum=rc_sum,
        distortion=distortion,
        realism_gap=gap,
        v_size=point.v_size,
    )


def markov_check(joint: FinitePmf, names: Sequence[str] | None = None) -> tuple[float, float]:
    """Largest conditional-TV violations of the two chains.

    Returns (gap_zxv, gap_xzvy): the first is max over (x, z) cells of
    TV(p(V|x,z), p(V|x)), the second max over (x, z, v) cells of
    TV(p(Y|x,z,v), p(Y|z,v)). Cells with zero probability are skipped.
    """
    if names is None:
        names = joint.names
    if len(names) != 4:
        raise ValueError("markov_check needs the four axis names (x, z, v, y)")
    order = [joint.axis_index(n) for n in names]
    arr = np.transpose(joint.probs, order)
    nx, nz, nv, ny = arr.shape

    pxzv = arr.sum(axis=3)
    pxz = pxzv.sum(axis=2)
    pxv = pxzv.sum(axis=1)
    px = pxz.sum(axis=1)
    gap1 = 0.0
    for x in range(nx):
        if px[x] <= 0.0:
            continue
        ref = pxv[x] / px[x]
        for z in range(nz):
            if pxz[x, z] <= 0.0:
                continue
            row = pxzv[x, z] / pxz[x, z]
            gap1 = max(gap1, 0.5 * float(np.abs(row - ref).sum()))

    pzvy = arr.sum(axis=0)
    pzv = pzvy.sum(axis=2)
    gap2 = 0.0
    for z in range(nz):
        for v in range(nv):
            if pzv[z, v] <= 0.0:
                continue
            ref = pzvy[z, v] / pzv[z, v]
            for x in range(nx):
                if pxzv[x, z, v] <= 0.0:
                    continue
                row = arr[x, z, v] / pxzv[x, z, v]
                gap2 = max(gap2, 0.5 * float(np.abs(row - ref).sum()))
    return gap1, gap2


# ---------------------------------------------------------------------------
# fast internal metrics on raw arrays (optimizer hot path)


def _metrics(pxz: np.ndarray, px: np.ndarray, d: np.ndarray, E: np.ndarray, D: np.ndarray):
    """(rate_bits, distortion, realism_gap) for raw channel tensors.

    E is (x, v), D is (z, v, y). Tolerates slightly unnormalized rows (the
    finite-difference probe points), which is why it does not go through
    FinitePmf.
    """
    pxzv = pxz[:, :, None] * E[:, None, :]
    pzv = pxzv.sum(axis=0)
    pz = pzv.sum(axis=1)
    py = np.tensordot(pzv, D, axes=([0, 1], [0, 1]))
    dist = float(np.tensordot(np.tensordot(pxzv, D, axes=([1, 2], [0, 1])), d, axes=2))
    # I(X;V|Z) = sum p(x,z,v) log2( p(x,z,v) p(z) / (p(x,z) p(z,v)) )
    mask = pxzv > 0.0
    num = pxzv * pz[None, :, None]
    den = pxz[:, :, None] * pzv[None, :, :]
    ratio = np.divide(num, den, out=np.ones_like(num), where=mask & (den > 0.0))
    rate = float((pxzv[mask] * np.log2(ratio[mask])).sum())
    gap = 0.5 * float(np.abs(py - px).sum())
    return max(rate, 0.0), dist, gap


def _project_rows_to_simplex(rows: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    n = rows.shape[1]
    srt = np.sort(rows, axis=1)[:, ::-1]
    css = np.cumsum(srt, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = srt - css / idx > 0.0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(rows.shape[0]), rho] / (rho + 1.0)
    return np.clip(rows - theta[:, None], 0.0, None)


def _repair_decoder(
    D: np.ndarray,
    pzv: np.ndarray,
    px: np.ndarray,
    A: np.ndarray,
    delta: float,
    iters: int,
) -> np.ndarray:
    """Cyclic projections of the decoder tensor onto the exact constraints.

    Sets: (1) the affine set {row sums = 1, sum_r w_r D[r, :] = px};
    (2) the halfspace {distortion <= delta} (A holds the per-entry linear
    distortion coefficients); (3) the product of row simplices. Converges
    to the intersection when it is non-empty; returns the best effort
    otherwise. A final affine projection makes the output marginal exact
    when the simplex constraints are already essentially inactive.
    """
    nz, nv, ny = D.shape
    R = nz * nv
    w = pzv.reshape(R)
    Dm = D.reshape(R, ny).copy()
    a = A.reshape(R, ny)
    a_norm2 = float((a * a).sum())

    # KKT system for the affine projection: variables lambda (R + ny)
    # G = Amat Amat^T with Amat the stacked row-sum and marginal constraints.
    G = np.zeros((R + ny, R + ny))
    G[:R, :R] = np.eye(R) * ny
    G[:R, R:] = w[:, None] * np.ones((1, ny))
    G[R:, :R] = G[:R, R:].T
    G[R:, R:] = np.eye(ny) * float((w * w).sum())
    Ginv = np.linalg.pinv(G)
    b = np.concatenate([np.ones(R), px])

    def affine_project(M: np.ndarray) -> np.ndarray:
        resid = np.concatenate([M.sum(axis=1), M.T @ w])
        lam = Ginv @ (b - resid)
        return M + lam[:R, None] + w[:, None] * lam[R:][None, :]

    for _ in range(iters):
        Dm = affine_project(Dm)
        if a_norm2 > 0.0:
            dist = float((a * Dm).sum())
            if dist > delta:
                Dm = Dm - ((dist - delta) / a_norm2) * a
        Dm = _project_rows_to_simplex(Dm)
        gap = 0.5 * float(np.abs(Dm.T @ w - px).sum())
        dist = float((a * Dm).sum())
        if gap <= 1e-13 and dist <= delta + DIST_SLACK:
            break
    # exact finish: land on the affine set; keep only if it stays a valid
    # channel (tiny negatives are clipped at construction) and in budget
    Df = affine_project(Dm)
    if Df.min() >= -1e-12 and float((a * Df).sum()) <= delta + DIST_SLACK:
        Dm = np.clip(Df, 0.0, None)
    return Dm.reshape(nz, nv, ny)


def _repair_for_enc(
    pxz: np.ndarray,
    px: np.ndarray,
    d: np.ndarray,
    E: np.ndarray,
    D_warm: np.ndarray,
    delta: float,
    iters: int,
) -> tuple[np.ndarray, bool]:
    """Repair a decoder for the given encoder; returns (D, feasible)."""
    pxzv = pxz[:, :, None] * E[:, None, :]
    pzv = pxzv.sum(axis=0)
    A = np.einsum("xzv,xy->zvy", pxzv, d)
    D = _repair_decoder(D_warm, pzv, px, A, delta, iters)
    _, dist, gap = _metrics(pxz, px, d, E, D)
    return D, (gap <= 1e-9 and dist <= delta + DIST_SLACK)


def _min_dist_repair(
    pxz: np.ndarray,
    px: np.ndarray,
    d: np.ndarray,
    E: np.ndarray,
    D_warm: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Distortion-minimal decoder under exact realism for a fixed encoder.

    Linear program over the decoder entries: minimize expected distortion
    subject to row-stochasticity and the exact output-marginal equality.
    Always feasible (broadcasting the source marginal satisfies both).
    Used to shape the encoder-polish landscape; returned candidates are
    still certified by the projection repair.
    """
    from scipy.optimize import linprog

    nz, nv, ny = D_warm.shape
    R = nz * nv
    pxzv = pxz[:, :, None] * E[:, None, :]
    w = pxzv.sum(axis=0).reshape(R)
    A = np.einsum("xzv,xy->zvy", pxzv, d).reshape(R, ny)

    A_eq = np.zeros((R + ny - 1, R * ny))
    for r in range(R):
        A_eq[r, r * ny : (r + 1) * ny] = 1.0
    for y in range(ny - 1):  # last marginal row is redundant
        A_eq[R + y, y::ny] = w
    b_eq = np.concatenate([np.ones(R), px[: ny - 1]])
    res = linprog(
        A.reshape(-1), A_eq=A_eq, b_eq=b_eq, bounds=(0.0, 1.0), method="highs"
    )
    if not res.success:
        return D_warm, float((A * D_warm.reshape(R, ny)).sum())
    Dm = res.x.reshape(R, ny)
    return Dm.reshape(nz, nv, ny), float(res.fun)


def _certify_enc(
    pxz: np.ndarray,
    px: np.ndarray,
    d: np.ndarray,
    E: np.ndarray,
    D_warm: np.ndarray,
    delta: float,
    repair_iters: int,
) -> tuple[np.ndarray, bool, float]:
    """Feasibility certificate for an encoder: (decoder, feasible, rate).

    The distortion-minimal exact-realism decoder (a small LP) decides
    feasibility; the projection repair then settles the witness to exact
    realism at floating precision.
    """
    D_lp, dist = _min_dist_repair(pxz, px, d, E, D_warm)
    rate = _metrics(pxz, px, d, E, D_lp)[0]
    if dist > delta + DIST_SLACK:
        return D_warm, False, rate
    D_fin, ok = _repair_for_enc(pxz, px, d, E, D_lp, delta, repair_iters)
    if ok:
        return D_fin, True, _metrics(pxz, px, d, E, D_fin)[0]
    _, dist_lp, gap_lp = _metrics(pxz, px, d, E, D_lp)
    ok_lp = gap_lp <= 1e-9 and dist_lp <= delta + DIST_SLACK
    return D_lp, ok_lp, rate


def _polish_rate(
    pxz: np.ndarray,
    px: np.ndarray,
    d: np.ndarray,
    E: np.ndarray,
    D: np.ndarray,
    delta: float,
    fd_h: float,
    repair_iters: int,
    iters: int = 60,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Descent on the encoder alone along the feasibility boundary.

    The rate depends only on the encoder; an encoder is feasible when its
    distortion-minimal exact-realism decoder fits the budget. The
    composite objective rate + penalty(excess of that minimal distortion)
    lets finite-difference steps slide along the tight-distortion face
    instead of stalling at first contact. The iterates may wander slightly
    outside the budget; the best certified-feasible visit is what is
    returned (None when no visit certifies).
    """
    nx, nv = E.shape
    penalty_w = 2000.0
    best = None  # (rate, E, D_lp)

    def objective(M, D_warm):
        rate, _, _ = _metrics(pxz, px, d, M, D_warm)
        D_min, dist = _min_dist_repair(pxz, px, d, M, D_warm)
        return rate + penalty_w * max(dist - delta, 0.0) ** 2, D_min, dist, rate

    def note(M, D_min, dist, rate):
        nonlocal best
        if dist <= delta + DIST_SLACK and (best is None or rate < best[0]):
            best = (rate, M.copy(), D_min)

    f0, D, dist0, rate0 = objective(E, D)
    note(E, D, dist0, rate0)
    step = 0.15
    for _ in range(iters):
        grad = np.empty(nx * nv)
        flat = E.ravel().copy()
        for i in range(flat.size):
            t = flat[i]
            flat[i] = t + fd_h
            fval, _, _, _ = objective(flat.reshape(nx, nv), D)
            grad[i] = (fval - f0) / fd_h
            flat[i] = t
        gn = float(np.linalg.norm(grad))
        if gn < 1e-12:
            break
        accepted = False
        for _try in range(6):
            cand = _project_rows_to_simplex(
                (E.ravel() - step * grad / gn).reshape(nx, nv)
            )
            f1, D_cand, dist1, rate1 = objective(cand, D)
            if f1 < f0 - 1e-12:
                note(cand, D_cand, dist1, rate1)
                E, D, f0 = cand, D_cand, f1
                step *= 1.3
                accepted = True
                break
            step *= 0.5
        if not accepted and step < 1e-8:
            break
    if best is None:
        return None
    D_fin, ok = _repair_for_enc(pxz, px, d, best[1], best[2], delta, repair_iters)
    return best[1], (D_fin if ok else best[2])


def _pg_search(args) -> tuple:
    """One projected-gradient start. Pure function of its arguments so it
    can run in a worker process; returns raw candidate tensors."""
    (pxz, px, d, E0, D0, delta, realism_tol, stages, iters, step_init, fd_h,
     repair_iters, stage_floor) = args
    nx, nz = pxz.shape
    nv = E0.shape[1]
    ny = d.shape[1]

    taus = np.geomspace(max(stage_floor, realism_tol), max(realism_tol, 1e-12), stages)
    weights = 50.0 * (8.0 ** np.arange(stages))

    def objective(E, D, w, tau):
        rate, dist, gap = _metrics(pxz, px, d, E, D)
        pen = w * max(dist - delta, 0.0) ** 2 + w * max(gap - tau, 0.0) ** 2
        return rate + pen

    best = None  # (rate, E, D) over certified-feasible visits

    def consider(Ec, Dc):
        nonlocal best
        D_w, ok, rate = _certify_enc(pxz, px, d, Ec, Dc, delta, repair_iters)
        if ok and (best is None or rate < best[0]):
            best = (rate, Ec.copy(), D_w)
        return D_w, ok

    E, D = E0.copy(), D0.copy()
    consider(E, D)  # a warm start must survive even if the stages wander off
    n_e = nx * nv
    n_d = nz * nv * ny
    for k in range(stages):
        w, tau = float(weights[k]), float(taus[k])
        step = step_init if k == 0 else step_init * 0.4
        f0 = objective(E, D, w, tau)
        for _ in range(iters):
            theta = np.concatenate([E.ravel(), D.ravel()])
            grad = np.empty_like(theta)
            for i in range(theta.size):
                t = theta[i]
                theta[i] = t + fd_h
                Ep = theta[:n_e].reshape(nx, nv)
                Dp = theta[n_e:].reshape(nz, nv, ny)
                grad[i] = (objective(Ep, Dp, w, tau) - f0) / fd_h
                theta[i] = t
            gn = float(np.linalg.norm(grad))
            if gn < 1e-12:
                break
            accepted = False
            for _try in range(6):
                cand = theta - step * grad / gn
                Ec = _project_rows_to_simplex(cand[:n_e].reshape(nx, nv))
                Dc = _project_rows_to_simplex(cand[n_e:].reshape(nz * nv, ny)).reshape(
                    nz, nv, ny
                )
                f1 = objective(Ec, Dc, w, tau)
                if f1 < f0 - 1e-12:
                    E, D, f0 = Ec, Dc, f1
                    step *= 1.3
                    accepted = True
                    break
                step *= 0.5
            if not accepted and step < 1e-8:
                break
        # keep the exactly repaired decoder whenever it is in budget; the
        # next stage then only has to lower the rate
        D_rep, ok = consider(E, D)
        if ok:
            D = D_rep

    if best is not None:
        return best[1], best[2], E, D
    return E, D, E, D


def _rate_zero_floor(source: SourceSpec) -> tuple[float, np.ndarray]:
    """Exact minimal distortion at rate zero under exact realism.

    With V independent of (X, Z) the decoder reduces to a channel
    p_{Y|Z}; minimizing expected distortion under the output-marginal
    equality is a small linear program. Returns (floor, decoder) with the
    decoder an (nz, ny) row-stochastic matrix.
    """
    from scipy.optimize import linprog

    pxz = source.pxz.probs
    px = pxz.sum(axis=1)
    pz = pxz.sum(axis=0)
    nx, nz = pxz.shape
    ny = nx
    # cost[z, y] = sum_x p(x, z) d(x, y)
    cost = np.einsum("xz,xy->zy", pxz, source.distortion)
    A_rows = np.zeros((nz, nz * ny))
    for z in range(nz):
        A_rows[z, z * ny : (z + 1) * ny] = 1.0
    A_marg = np.zeros((ny - 1, nz * ny))
    for y in range(ny - 1):
        A_marg[y, y::ny] = pz
    A_eq = np.vstack([A_rows, A_marg])
    b_eq = np.concatenate([np.ones(nz), px[: ny - 1]])
    res = linprog(
        cost.reshape(-1), A_eq=A_eq, b_eq=b_eq, bounds=(0.0, 1.0), method="highs"
    )
    if not res.success:  # the realism-exact set is never empty (rows = px)
        return float(px @ source.distortion @ px), np.tile(px, (nz, 1))
    return float(res.fun), res.x.reshape(nz, ny)


def _structured_starts(nx: int, nz: int, nv: int, ny: int, px: np.ndarray):
    """Deterministic anchor starts: rate-zero, identity-like, and blends."""
    starts = []
    # constant V, decoder emits p_X: rate 0, exact realism
    E_const = np.zeros((nx, nv))
    E_const[:, 0] = 1.0
    D_px = np.tile(px, (nz, nv, 1))
    starts.append((E_const, D_px))
    if nv >= nx:
        E_id = np.zeros((nx, nv))
        E_id[np.arange(nx), np.arange(nx)] = 1.0
        D_copy = np.tile(px, (nz, nv, 1))
        for v in range(min(nv, ny)):
            if v < nx:
                D_copy[:, v, :] = 0.0
                D_copy[:, v, v] = 1.0
        starts.append((E_id, D_copy))
        for alpha in (0.05, 0.15, 0.3, 0.5, 0.7):
            E_mix = (1 - alpha) * E_id + alpha * E_const
            D_mix = (1 - alpha) * D_copy + alpha * D_px
            starts.append((E_mix, D_mix))
    return starts


def _candidate_region_point(
    source: SourceSpec,
    E: np.ndarray,
    D: np.ndarray,
    v_name: str,
    y_name: str,
) -> tuple[RegionPoint, FeasiblePoint] | None:
    """Build a FeasiblePoint from raw tensors via the public path; None if
    the tensors cannot form valid channels (dead rows etc.)."""
    xn, nx = source.x_axis
    zn, nz = source.z_axis
    nv = E.shape[1]
    try:
        enc = Channel(((xn, nx),), ((v_name, nv),), E)
        dec = Channel(((zn, nz), (v_name, nv)), ((y_name, nx),), D)
        point = assemble(source, enc, dec)
    except ValueError:
        return None
    rp = evaluate(point, source)
    return rp, point


def _default_v_size(source: SourceSpec) -> int:
    return source.x_axis[1] * source.z_axis[1] + 2


def _aux_names(source: SourceSpec) -> tuple[str, str]:
    """Names for the V and Y axes that do not collide with the source's."""
    taken = {source.x_axis[0], source.z_axis[0]}
    vn = "V"
    while vn in taken:
        vn += "_"
    yn = "Y"
    while yn in taken or yn == vn:
        yn += "_"
    return vn, yn


def min_rate(
    source: SourceSpec,
    delta: float,
    v_size: int | None = None,
    realism_tol: float = 1e-6,
    opts: OptimizerOptions | None = None,
    warm: Sequence[tuple[np.ndarray, np.ndarray]] = (),
) -> tuple[RegionPoint, FeasiblePoint]:
    """Heuristic minimal rate at distortion budget ``delta`` with
    (near-)exact realism.

    Multi-start projected gradient; the result is an achievable upper bound
    on the true boundary, never below it. Raises
    :class:`~rdpsi.errors.InfeasibleError` with the least-distortion
    candidate when no start meets both constraints.
    """
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if realism_tol <= 0.0:
        raise ValueError(f"realism_tol must be > 0, got {realism_tol}")
    opts = opts or OptimizerOptions()
    nx = source.x_axis[1]
    nz = source.z_axis[1]
    nv = int(v_size) if v_size is not None else _default_v_size(source)
    if nv < 1:
        raise ValueError(f"v_size must be >= 1, got {nv}")
    ny = nx
    pxz = source.pxz.probs
    px = pxz.sum(axis=1)
    d = source.distortion
    vn, yn = _aux_names(source)

    # exact shortcut: the best rate-zero point is a small linear program;
    # when it meets the budget nothing can improve on rate 0
    floor0, dec0 = _rate_zero_floor(source)
    if floor0 <= delta + DIST_SLACK:
        E0 = np.zeros((nx, nv))
        E0[:, 0] = 1.0
        D0 = np.broadcast_to(dec0[:, None, :], (nz, nv, ny)).copy()
        out = _candidate_region_point(source, E0, D0, vn, yn)
        assert out is not None
        rp, point = out
        return replace(rp, delta=delta), point

    seeds = _structured_starts(nx, nz, nv, ny, px)
    seeds.append(
        (
            np.concatenate([np.ones((nx, 1)), np.zeros((nx, nv - 1))], axis=1)
            if nv > 1
            else np.ones((nx, 1)),
            np.broadcast_to(dec0[:, None, :], (nz, nv, ny)).copy(),
        )
    )
    # tiny instances admit a certified coarse enumeration: the best grid
    # cells (encoder lattice + optimal exact-realism decoder per cell) seed
    # the local search, which then only refines below the lattice value
    if nx <= 2 and nz <= 2 and nv <= 3:
        encs_t, rates_t, dists_t, decs_t = _oracle_table(source, nv, 0.05)
        idx_ok = np.flatnonzero(dists_t <= delta + DIST_SLACK)
        top = idx_ok[np.lexsort((dists_t[idx_ok], rates_t[idx_ok]))][:4]
        seeds = [(encs_t[i].copy(), decs_t[i].copy()) for i in top] + seeds
    jobs = []
    for E0, D0 in list(warm) + seeds:
        if E0.shape == (nx, nv) and D0.shape == (nz, nv, ny):
            jobs.append((E0.copy(), D0.copy()))
    n_random = max(opts.starts - len(jobs), 0)
    for i in range(n_random):
        rng = np.random.default_rng(derive_seed(opts.seed, "min-rate-start", i))
        E0 = rng.dirichlet(np.ones(nv), size=nx)
        D0 = rng.dirichlet(np.ones(ny), size=(nz, nv))
        jobs.append((E0, D0))

    args = [
        (
            pxz, px, d, E0, D0, float(delta), float(realism_tol),
            opts.stages, opts.iters_per_stage, opts.step_init, opts.fd_step,
            opts.repair_iters, opts.realism_stage_start,
        )
        for E0, D0 in jobs
    ]
    if opts.workers and opts.workers > 1:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            results = list(pool.map(_pg_search, args))
    else:
        results = [_pg_search(a) for a in args]

    # polish only the most promising basins: feasible results ranked by
    # rate, deduplicated by encoder, descending along the distortion face
    polish_seeds: list[tuple[float, np.ndarray, np.ndarray]] = []
    for E_best, D_best, _, _ in results:
        rate, dist, gap = _metrics(pxz, px, d, E_best, D_best)
        if gap <= realism_tol and dist <= delta + DIST_SLACK:
            polish_seeds.append((rate, E_best, D_best))
    polish_seeds.sort(key=lambda t: t[0])
    pruned: list[tuple[float, np.ndarray, np.ndarray]] = []
    for rate, E_b, D_b in polish_seeds:
        if any(np.abs(E_b - Ep).max() < 1e-6 for _, Ep, _ in pruned):
            continue
        pruned.append((rate, E_b, D_b))
        if len(pruned) >= 4:
            break
    extra = []
    for _, E_b, D_b in pruned:
        polished = _polish_rate(
            pxz, px, d, E_b, D_b, float(delta), opts.fd_step, opts.repair_iters
        )
        if polished is not None:
            extra.append((polished[0], polished[1], polished[0], polished[1]))

    candidates: list[tuple[tuple, RegionPoint, FeasiblePoint]] = []
    order = 0
    for E_pol, D_pol, E_raw, D_raw in results + extra:
        for Ec, Dc in ((E_pol, D_pol), (E_raw, D_raw)):
            out = _candidate_region_point(source, Ec, Dc, vn, yn)
            order += 1
            if out is None:
                continue
            rp, point = out
            feas = rp.realism_gap <= realism_tol and rp.distortion <= delta + DIST_SLACK
            key = (not feas, rp.rate, rp.distortion, rp.realism_gap, order)
            candidates.append((key, replace(rp, delta=delta, feasible=feas), point))

    candidates.sort(key=lambda t: t[0])
    feasible = [c for c in candidates if c[1].feasible]
    if not feasible:
        near = [c for c in candidates if c[1].realism_gap <= realism_tol]
        pool = near or candidates
        best = min(pool, key=lambda c: c[1].distortion) if pool else None
        best_rp = best[1] if best else None
        raise InfeasibleError(
            f"no feasible point at delta={delta} (smallest distortion found: "
            f"{best_rp.distortion if best_rp else float('nan'):.6g})",
            best=best_rp,
        )
    key, rp, point = feasible[0]
    return rp, point


# ---------------------------------------------------------------------------
# independent grid oracle


_ORACLE_CACHE: dict = {}


def _simplex_grid(k: int, grid_step: float) -> np.ndarray:
    """All pmfs on k outcomes whose entries are multiples of grid_step."""
    n = round(1.0 / grid_step)
    if abs(n * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid_step must divide 1, got {grid_step}")
    combos = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            combos.append(prefix + [remaining])
            return
        for a in range(remaining + 1):
            rec(prefix + [a], remaining - a, slots - 1)

    rec([], n, k)
    return np.asarray(combos, dtype=np.float64) * grid_step


def _oracle_table(source: SourceSpec, v_size: int, grid_step: float):
    """Per-encoder-cell (rate, minimal exact-realism distortion) table.

    The rate depends on the encoder alone; for each grid encoder the best
    decoder under the exact output-marginal constraint is a small linear
    program (minimize expected distortion subject to row-stochasticity and
    sum_{z,v} p(z,v) p_{Y|Z,V}(y|z,v) = p_X(y)), which is the exact form of
    the final-column linear repair. Cached per (source, v_size, grid_step).
    """
    from scipy.optimize import linprog

    key = (
        source.pxz.probs.tobytes(),
        source.distortion.tobytes(),
        int(v_size),
        round(float(grid_step), 12),
    )
    hit = _ORACLE_CACHE.get(key)
    if hit is not None:
        return hit

    pxz = source.pxz.probs
    px = pxz.sum(axis=1)
    d = source.distortion
    nx, nz = pxz.shape
    ny = nx
    rows = _simplex_grid(v_size, grid_step)

    # unique encoders up to relabeling of V (rate and best distortion are
    # invariant under column permutations)
    seen = {}
    encs = []
    for combo in _iterproduct(range(rows.shape[0]), repeat=nx):
        E = rows[list(combo)]
        canon = tuple(sorted(map(tuple, E.T.tolist())))
        if canon in seen:
            continue
        seen[canon] = True
        encs.append(E)

    R = nz * v_size
    n_var = R * ny
    # row-stochasticity equalities
    A_rows = np.zeros((R, n_var))
    for r in range(R):
        A_rows[r, r * ny : (r + 1) * ny] = 1.0
    rates = np.empty(len(encs))
    min_dists = np.empty(len(encs))
    decs = []
    for i, E in enumerate(encs):
        pxzv = pxz[:, :, None] * E[:, None, :]
        pzv = pxzv.sum(axis=0)
        rate, _, _ = _metrics(pxz, px, d, E, np.full((nz, v_size, ny), 1.0 / ny))
        rates[i] = rate
        w = pzv.reshape(R)
        # output-marginal equalities (drop the last, implied by the others)
        A_marg = np.zeros((ny - 1, n_var))
        for y in range(ny - 1):
            A_marg[y, y::ny] = w
        A_eq = np.vstack([A_rows, A_marg])
        b_eq = np.concatenate([np.ones(R), px[: ny - 1]])
        c = np.einsum("xzv,xy->zvy", pxzv, d).reshape(n_var)
        res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0.0, 1.0), method="highs")
        if not res.success:
            min_dists[i] = np.inf
            decs.append(None)
            continue
        min_dists[i] = float(res.fun)
        decs.append(res.x.reshape(nz, v_size, ny))

    table = (encs, rates, min_dists, decs)
    _ORACLE_CACHE[key] = table
    return table


def brute_force_min_rate(
    source: SourceSpec,
    delta: float,
    v_size: int = 3,
    grid_step: float = 0.05,
) -> RegionPoint:
    """Grid oracle for small instances: exhaustive encoder grid with the
    optimal exact-realism decoder solved per cell.

    Only valid for |X| <= 2, |Z| <= 2, v_size <= 3. Returns the grid-best
    point; raises :class:`~rdpsi.errors.InfeasibleError` when no grid cell
    meets the distortion budget.
    """
    nx, nz = source.x_axis[1], source.z_axis[1]
    if nx > 2 or nz > 2:
        raise ValueError(f"oracle requires |X|,|Z| <= 2, got {nx},{nz}")
    if not 1 <= v_size <= 3:
        raise ValueError(f"oracle requires 1 <= v_size <= 3, got {v_size}")
    if not 0.0 < grid_step <= 0.5:
        raise ValueError(f"grid_step must be in (0, 0.5], got {grid_step}")
    encs, rates, min_dists, decs = _oracle_table(source, v_size, grid_step)
    ok = min_dists <= delta + DIST_SLACK
    if not ok.any():
        best = float(min_dists.min())
        raise InfeasibleError(
            f"oracle found no feasible grid cell at delta={delta} "
            f"(smallest distortion {best:.6g})",
            best=RegionPoint(
                rate=float("nan"), rc_sum=float("nan"), distortion=best,
                realism_gap=0.0, delta=delta, v_size=v_size, feasible=False,
            ),
        )
    idx_ok = np.flatnonzero(ok)
    winner = idx_ok[np.lexsort((min_dists[idx_ok], rates[idx_ok]))][0]
    vn, yn = _aux_names(source)
    out = _candidate_region_point(source, encs[winner], decs[winner], vn, yn)
    if out is None:  # defensive; LP decoders are valid channels
        return RegionPoint(
            rate=float(rates[winner]), rc_sum=float("nan"),
            distortion=float(min_dists[winner]), realism_gap=0.0,
            delta=delta, v_size=v_size,
        )
    rp, _ = out
    return replace(rp, delta=delta)


# ---------------------------------------------------------------------------
# encoder-side information by reduction to an augmented source


def augment_source(source: SourceSpec) -> SourceSpec:
    """The augmented source whose X is the pair (X, Z) and whose Z stays Z.

    The lifted distortion only reads the X coordinate of the pair, and the
    augmented realism constraint pins the full pair marginal.
    """
    xn, nx = source.x_axis
    zn, nz = source.z_axis
    pxz = source.pxz.probs
    pair = np.zeros((nx * nz, nz))
    for x in range(nx):
        for z in range(nz):
            pair[x * nz + z, z] = pxz[x, z]
    d_lift = np.zeros((nx * nz, nx * nz))
    for x in range(nx):
        for xp in range(nx):
            d_lift[x * nz : (x + 1) * nz, xp * nz : (xp + 1) * nz] = source.distortion[x, xp]
    pair_name = f"({xn},{zn})"
    pmf = FinitePmf(((pair_name, nx * nz), (zn, nz)), pair)
    return SourceSpec(pmf, d_lift)


def _lift_point(
    source: SourceSpec, aug: SourceSpec, E: np.ndarray, D: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Map a decoder-side point into the augmented problem.

    The encoder ignores the Z coordinate of the pair; the decoder emits its
    usual Y and completes the pair with a draw from p_{Z|X=y}. Rate,
    distortion, and realism gap are preserved exactly.
    """
    nx, nz = source.x_axis[1], source.z_axis[1]
    nv = E.shape[1]
    pxz = source.pxz.probs
    px = pxz.sum(axis=1)
    pz_given_x = np.empty_like(pxz)
    for x in range(nx):
        pz_given_x[x] = pxz[x] / px[x] if px[x] > 0 else 1.0 / nz
    E_aug = np.zeros((nx * nz, nv))
    for x in range(nx):
        for z in range(nz):
            E_aug[x * nz + z] = E[x]
    D_aug = np.zeros((nz, nv, nx * nz))
    for y in range(nx):
        for zhat in range(nz):
            D_aug[:, :, y * nz + zhat] = D[:, :, y] * pz_given_x[y, zhat]
    return E_aug, D_aug


def ed_min_rate(
    source: SourceSpec,
    delta: float,
    v_size: int | None = None,
    realism_tol: float = 1e-6,
    opts: OptimizerOptions | None = None,
    d_solution: FeasiblePoint | None = None,
) -> tuple[RegionPoint, FeasiblePoint]:
    """Minimal rate when the encoder sees the side information too.

    Solves the decoder-side problem for the augmented source (X paired with
    Z), whose realism constraint pins the (X, Z) pair marginal; the optimum
    of the augmented problem equals the encoder-side optimum. The search is
    seeded with the lift of a decoder-side solution (computed on demand when
    ``d_solution`` is not supplied), so the returned rate never exceeds the
    decoder-side rate. The returned FeasiblePoint lives on the augmented
    alphabets.
    """
    opts = opts or OptimizerOptions()
    aug = augment_source(source)
    nv = int(v_size) if v_size is not None else _default_v_size(source)

    warm: list[tuple[np.ndarray, np.ndarray]] = []
    if d_solution is None:
        try:
            _, d_solution = min_rate(
                source, delta, v_size=nv, realism_tol=realism_tol, opts=opts
            )
        except InfeasibleError:
            d_solution = None
    if d_solution is not None:
        E = np.asarray(d_solution.enc.probs)
        D = np.asarray(d_solution.dec.probs)
        if E.shape[1] != nv:  # pad or truncate the lift to the requested v_size
            nv = max(nv, E.shape[1])
        warm.append(_lift_point(source, aug, E, D))

    return min_rate(
        aug, delta, v_size=nv, realism_tol=realism_tol, opts=opts, warm=warm
    )


# ---------------------------------------------------------------------------
# curves


def region_curve(
    source: SourceSpec,
    deltas: Sequence[float],
    mode: str = "D",
    v_size: int | None = None,
    realism_tol: float = 1e-6,
    opts: OptimizerOptions | None = None,
    return_points: bool = False,
):
    """Trace the rate-distortion boundary over a grid of budgets.

    Points are computed in ascending delta order with warm starts from the
    previous solution, then post-processed to the lower envelope: a larger
    budget can always reuse a smaller budget's solution, so reported rates
    are non-increasing in delta. Infeasible budgets are recorded inline.

    With ``return_points`` the achieving FeasiblePoint (or None) accompanies
    each RegionPoint.
    """
    if mode not in ("D", "E-D"):
        raise ValueError(f"mode must be 'D' or 'E-D', got {mode!r}")
    opts = opts or OptimizerOptions()
    order = np.argsort(np.asarray(deltas, dtype=np.float64))
    entries: list[tuple[float, RegionPoint, FeasiblePoint | None]] = []
    warm: list[tuple[np.ndarray, np.ndarray]] = []
    d_solution_cache: dict[float, FeasiblePoint] = {}

    for i in order:
        delta = float(np.asarray(deltas)[i])
        try:
            if mode == "D":
                rp, point = min_rate(
                    source, delta, v_size=v_size, realism_tol=realism_tol,
                    opts=opts, warm=warm,
                )
            else:
                rp, point = ed_min_rate(
                    source, delta, v_size=v_size, realism_tol=realism_tol, opts=opts,
                )
            warm = [(np.asarray(point.enc.probs), np.asarray(point.dec.probs))]
            entries.append((delta, rp, point))
        except InfeasibleError as err:
            best = err.best or RegionPoint(
                rate=float("nan"), rc_sum=float("nan"), distortion=float("nan"),
                realism_gap=float("nan"), delta=delta, feasible=False,
            )
            entries.append((delta, replace(best, delta=delta, feasible=False), None))

    # lower envelope: carry the best feasible point forward in delta
    best_so_far: tuple[RegionPoint, FeasiblePoint] | None = None
    out: list[tuple[RegionPoint, FeasiblePoint | None]] = []
    for delta, rp, point in entries:
        if rp.feasible and point is not None:
            if best_so_far is None or rp.rate <= best_so_far[0].rate:
                best_so_far = (rp, point)
            else:
                rp, point = replace(best_so_far[0], delta=delta), best_so_far[1]
        elif best_so_far is not None:
            # a smaller budget succeeded; its point is feasible here too
            rp, point = replace(best_so_far[0], delta=delta), best_so_far[1]
        out.append((rp, point))

    # restore the caller's delta order
    restore = np.argsort(order, kind="stable")
    out = [out[i] for i in restore]
    if return_points:
        return out
    return [rp for rp, _ in out]
