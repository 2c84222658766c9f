"""Finite probability objects: named-axis pmfs, channels, couplings.

Conventions used throughout the package:

* A pmf or channel stores a dense float64 tensor whose dimensions carry
  (name, size) labels. Axis names are unique within an object.
* Pmfs are renormalized once, at construction, and treated as exact
  afterwards; entries are non-negative and sum to 1 within 1e-12.
* Channels are row-stochastic: for every input cell the slice over the
  output axes sums to 1.
* Block pmfs over n-tuples use one axis per coordinate, named "A.0" ..
  "A.n-1"; with row-major storage the flat index order is lexicographic
  in the tuples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapacityError

# Sum-to-one / row-stochasticity tolerance for stored objects.
ATOL = 1e-12
# Largest tensor support any single pmf may hold.
MAX_SUPPORT = 2**24

Axis = tuple[str, int]


def _as_axes(axes) -> tuple[Axis, ...]:
    out = []
    for a in axes:
        name, size = a
        name = str(name)
        size = int(size)
        if not name:
            raise ValueError("axis name must be a non-empty string")
        if size < 1:
            raise ValueError(f"axis {name!r} must have size >= 1, got {size}")
        out.append((name, size))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate axis names in {names}")
    return tuple(out)


def _clean_nonneg(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    lo = arr.min() if arr.size else 0.0
    if lo < -ATOL:
        raise ValueError(f"{what} contains negative entries (min {lo:.3e})")
    return np.clip(arr, 0.0, None)


@dataclass(frozen=True)
class FinitePmf:
    """A probability mass function over named finite axes.

    ``probs[i, j, ...]`` is the probability of the outcome with index ``i``
    on the first axis, ``j`` on the second, and so on. The input tensor is
    renormalized at construction (its total must be finite and positive);
    after that the object is immutable.
    """

    axes: tuple[Axis, ...]
    probs: np.ndarray

    def __post_init__(self):
        axes = _as_axes(self.axes)
        object.__setattr__(self, "axes", axes)
        sizes = tuple(s for _, s in axes)
        if int(np.prod(sizes, dtype=np.int64)) > MAX_SUPPORT:
            raise CapacityError(
                f"pmf support {sizes} exceeds the {MAX_SUPPORT} enumeration guard"
            )
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.shape != sizes:
            raise ValueError(f"probs shape {arr.shape} does not match axes {sizes}")
        arr = _clean_nonneg(arr, "pmf")
        total = float(arr.sum())
        if not np.isfinite(total) or total <= 0.0:
            raise ValueError(f"pmf total mass must be positive, got {total}")
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    # -- structure ---------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.axes)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(s for _, s in self.axes)

    def axis_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown axis {name!r}; have {self.names}") from None

    # -- constructors ------------------------------------------------------

    @staticmethod
    def uniform(axes) -> "FinitePmf":
        axes = _as_axes(axes)
        sizes = tuple(s for _, s in axes)
        return FinitePmf(axes, np.full(sizes, 1.0))

    @staticmethod
    def point_mass(axes, index) -> "FinitePmf":
        axes = _as_axes(axes)
        sizes = tuple(s for _, s in axes)
        arr = np.zeros(sizes)
        arr[tuple(index)] = 1.0
        return FinitePmf(axes, arr)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "axes": [{"name": n, "size": s} for n, s in self.axes],
            "probs": self.probs.ravel().tolist(),
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "FinitePmf":
        axes = [(a["name"], int(a["size"])) for a in doc["axes"]]
        sizes = tuple(s for _, s in axes)
        flat = np.asarray(doc["probs"], dtype=np.float64)
        expect = int(np.prod(sizes, dtype=np.int64))
        if flat.size != expect:
            raise ValueError(f"probs length {flat.size} != product of sizes {expect}")
        return FinitePmf(tuple(axes), flat.reshape(sizes))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FinitePmf":
        return FinitePmf.from_dict(json.loads(text))


@dataclass(frozen=True)
class Channel:
    """A conditional distribution with named input and output axes.

    ``probs`` has shape ``input_sizes + output_sizes``; every input cell's
    slice over the output axes is a pmf. Rows are renormalized at
    construction; an all-zero row is rejected (use :func:`condition`, which
    fills unsupported conditioning cells with the uniform row).
    """

    input_axes: tuple[Axis, ...]
    output_axes: tuple[Axis, ...]
    probs: np.ndarray

    def __post_init__(self):
        in_axes = _as_axes(self.input_axes)
        out_axes = _as_axes(self.output_axes)
        _as_axes(in_axes + out_axes)  # joint name uniqueness
        object.__setattr__(self, "input_axes", in_axes)
        object.__setattr__(self, "output_axes", out_axes)
        in_sizes = tuple(s for _, s in in_axes)
        out_sizes = tuple(s for _, s in out_axes)
        if not out_sizes:
            raise ValueError("channel needs at least one output axis")
        if int(np.prod(in_sizes + out_sizes, dtype=np.int64)) > MAX_SUPPORT:
            raise CapacityError(
                f"channel support {in_sizes + out_sizes} exceeds the "
                f"{MAX_SUPPORT} enumeration guard"
            )
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.shape != in_sizes + out_sizes:
            raise ValueError(
                f"probs shape {arr.shape} does not match {in_sizes + out_sizes}"
            )
        arr = _clean_nonneg(arr, "channel")
        n_in = int(np.prod(in_sizes, dtype=np.int64)) if in_sizes else 1
        flat = arr.reshape(n_in, -1)
        row_sums = flat.sum(axis=1)
        if np.any(row_sums <= 0.0):
            bad = int(np.argmin(row_sums))
            raise ValueError(f"channel row {bad} has zero mass")
        flat = flat / row_sums[:, None]
        arr = flat.reshape(in_sizes + out_sizes)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.input_axes)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.output_axes)

    def row_matrix(self) -> np.ndarray:
        """probs reshaped to (n_input_cells, n_output_cells), row-major."""
        n_in = int(np.prod([s for _, s in self.input_axes] or [1]))
        return self.probs.reshape(n_in, -1)

    @staticmethod
    def identity(axis: Axis, out_name: str | None = None) -> "Channel":
        name, size = axis
        out = out_name if out_name is not None else name + "'"
        return Channel(((name, size),), ((out, size),), np.eye(size))

    @staticmethod
    def constant(input_axes, output: FinitePmf) -> "Channel":
        """The channel that ignores its input and emits ``output``."""
        in_axes = _as_axes(input_axes)
        in_sizes = tuple(s for _, s in in_axes)
        tile = np.broadcast_to(output.probs, in_sizes + output.sizes).copy()
        return Channel(in_axes, output.axes, tile)

    def to_dict(self) -> dict:
        return {
            "input_axes": [{"name": n, "size": s} for n, s in self.input_axes],
            "output_axes": [{"name": n, "size": s} for n, s in self.output_axes],
            "probs": self.probs.ravel().tolist(),
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "Channel":
        in_axes = tuple((a["name"], int(a["size"])) for a in doc["input_axes"])
        out_axes = tuple((a["name"], int(a["size"])) for a in doc["output_axes"])
        sizes = tuple(s for _, s in in_axes) + tuple(s for _, s in out_axes)
        flat = np.asarray(doc["probs"], dtype=np.float64)
        expect = int(np.prod(sizes, dtype=np.int64))
        if flat.size != expect:
            raise ValueError(f"probs length {flat.size} != product of sizes {expect}")
        return Channel(in_axes, out_axes, flat.reshape(sizes))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Channel":
        return Channel.from_dict(json.loads(text))


@dataclass(frozen=True)
class Coupling:
    """A joint pmf whose two marginals are pinned to given left/right pmfs.

    ``left`` and ``right`` live on the same axes; in ``joint`` the right
    copy's axes are primed (name + "'"). Marginals are validated to 1e-12.
    """

    left: FinitePmf
    right: FinitePmf
    joint: FinitePmf

    def __post_init__(self):
        if self.left.axes != self.right.axes:
            raise ValueError(
                f"coupling endpoints must share axes: "
                f"{self.left.axes} vs {self.right.axes}"
            )
        k = len(self.left.axes)
        expect = self.left.axes + tuple((n + "'", s) for n, s in self.right.axes)
        if self.joint.axes != expect:
            raise ValueError(f"joint axes {self.joint.axes} != expected {expect}")
        jm = self.joint.probs
        left_marg = jm.sum(axis=tuple(range(k, 2 * k)))
        right_marg = jm.sum(axis=tuple(range(k)))
        if np.max(np.abs(left_marg - self.left.probs)) > ATOL:
            raise ValueError("coupling left marginal off by more than 1e-12")
        if np.max(np.abs(right_marg - self.right.probs)) > ATOL:
            raise ValueError("coupling right marginal off by more than 1e-12")

    @property
    def diagonal_mass(self) -> float:
        n = int(np.prod(self.left.sizes))
        flat = self.joint.probs.reshape(n, n)
        return float(np.trace(flat))

    @property
    def mismatch_probability(self) -> float:
        """P(left copy != right copy) under the coupling."""
        return 1.0 - self.diagonal_mass


# ---------------------------------------------------------------------------
# operations


def marginalize(p: FinitePmf, keep: Iterable[str]) -> FinitePmf:
    """Sum out all axes not named in ``keep``; kept axes preserve p's order."""
    keep = list(keep)
    for name in keep:
        p.axis_index(name)  # raises on unknown names
    keep_set = set(keep)
    if not keep_set:
        raise ValueError("keep must name at least one axis")
    drop = tuple(i for i, (n, _) in enumerate(p.axes) if n not in keep_set)
    kept_axes = tuple(a for a in p.axes if a[0] in keep_set)
    return FinitePmf(kept_axes, p.probs.sum(axis=drop) if drop else p.probs)


def condition(p: FinitePmf, given: Iterable[str]) -> Channel:
    """The conditional channel from the ``given`` axes to the remaining axes.

    Conditioning cells with zero probability get the uniform row, so the
    result is always a valid channel.
    """
    given = set(given)
    for name in given:
        p.axis_index(name)
    if not given or len(given) >= len(p.axes):
        raise ValueError("given must be a non-empty strict subset of the axes")
    in_idx = [i for i, (n, _) in enumerate(p.axes) if n in given]
    out_idx = [i for i, (n, _) in enumerate(p.axes) if n not in given]
    in_axes = tuple(p.axes[i] for i in in_idx)
    out_axes = tuple(p.axes[i] for i in out_idx)
    arr = np.transpose(p.probs, in_idx + out_idx)
    n_in = int(np.prod([s for _, s in in_axes]))
    n_out = int(np.prod([s for _, s in out_axes]))
    flat = arr.reshape(n_in, n_out)
    row = flat.sum(axis=1)
    out = np.empty_like(flat)
    ok = row > 0.0
    out[ok] = flat[ok] / row[ok, None]
    out[~ok] = 1.0 / n_out
    return Channel(in_axes, out_axes, out.reshape(arr.shape))


def _einsum_letters(n: int) -> list[str]:
    import string

    letters = string.ascii_letters
    if n > len(letters):
        raise CapacityError(f"too many axes for einsum composition ({n})")
    return list(letters[:n])


def compose(source: FinitePmf, ch: Channel) -> FinitePmf:
    """Joint pmf over source axes + channel output axes.

    The channel's input axes must all be axes of ``source`` (matched by name
    and size); its output axis names must be new. The marginal of the result
    over the source axes equals the source.
    """
    src_names = source.names
    for name, size in ch.input_axes:
        i = source.axis_index(name)
        if source.axes[i][1] != size:
            raise ValueError(f"axis {name!r} size mismatch: {source.axes[i][1]} vs {size}")
    for name, _ in ch.output_axes:
        if name in src_names:
            raise ValueError(f"output axis {name!r} collides with a source axis")
    letters = _einsum_letters(len(source.axes) + len(ch.output_axes))
    src_l = letters[: len(source.axes)]
    out_l = letters[len(source.axes):]
    by_name = dict(zip(src_names, src_l))
    in_l = [by_name[n] for n in ch.input_names]
    spec = "".join(src_l) + "," + "".join(in_l) + "".join(out_l) + "->" + "".join(src_l) + "".join(out_l)
    probs = np.einsum(spec, source.probs, ch.probs)
    return FinitePmf(source.axes + ch.output_axes, probs)


def apply_channel(p: FinitePmf, ch: Channel) -> FinitePmf:
    """Push the marginal of ``p`` on the channel's input axes through the
    channel; returns a pmf over the channel's output axes only.

    Unlike :func:`compose`, output axis names may collide with input names
    (the inputs are summed out), which makes this the natural way to apply a
    correction channel whose outputs live on the same alphabet.
    """
    for name, size in ch.input_axes:
        i = p.axis_index(name)
        if p.axes[i][1] != size:
            raise ValueError(f"axis {name!r} size mismatch: {p.axes[i][1]} vs {size}")
    letters = _einsum_letters(len(p.axes) + len(ch.output_axes))
    src_l = letters[: len(p.axes)]
    out_l = letters[len(p.axes):]
    by_name = dict(zip(p.names, src_l))
    in_l = [by_name[n] for n in ch.input_names]
    spec = "".join(src_l) + "," + "".join(in_l) + "".join(out_l) + "->" + "".join(out_l)
    probs = np.einsum(spec, p.probs, ch.probs)
    return FinitePmf(ch.output_axes, probs)


def product_power(p: FinitePmf, n: int) -> FinitePmf:
    """The i.i.d. block pmf of ``n`` independent copies of ``p``.

    Copy ``t`` of axis "A" is named "A.t". Row-major flat indexing of the
    result is lexicographic in the n-tuples (earlier coordinates most
    significant).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    support = int(np.prod(p.sizes, dtype=np.int64)) ** n
    if support > MAX_SUPPORT:
        raise CapacityError(
            f"block support {support} exceeds the {MAX_SUPPORT} enumeration guard"
        )
    axes = tuple((f"{name}.{t}", size) for t in range(n) for name, size in p.axes)
    probs = p.probs
    for _ in range(n - 1):
        probs = np.multiply.outer(probs, p.probs)
    return FinitePmf(axes, probs)


def total_variation(p: FinitePmf, q: FinitePmf) -> float:
    """Total variation distance; requires identical axes in identical order."""
    if p.axes != q.axes:
        raise ValueError(f"axes differ: {p.axes} vs {q.axes}")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def rename_axes(p: FinitePmf, mapping: Mapping[str, str]) -> FinitePmf:
    """Rename axes of a pmf (used to line up alphabets before comparisons)."""
    for old in mapping:
        p.axis_index(old)
    axes = tuple((mapping.get(n, n), s) for n, s in p.axes)
    return FinitePmf(axes, p.probs)


# Guard for coupling construction: the joint has (support)^2 entries.
MAX_COUPLING_SUPPORT = 2**12


def maximal_coupling(p: FinitePmf, q: FinitePmf) -> Coupling:
    """The maximal coupling of two pmfs on a shared alphabet.

    Diagonal mass is min(p, q) pointwise; the remainder is the product of the
    normalized positive parts of (p - q) and (q - p). The mismatch
    probability of the result equals TV(p, q) exactly, the smallest possible
    for any coupling.
    """
    if p.axes != q.axes:
        raise ValueError(f"axes differ: {p.axes} vs {q.axes}")
    k = int(np.prod(p.sizes, dtype=np.int64))
    if k > MAX_COUPLING_SUPPORT:
        raise CapacityError(
            f"coupling support {k} exceeds the {MAX_COUPLING_SUPPORT} guard "
            f"(joint would hold {k}**2 entries)"
        )
    pf = p.probs.ravel()
    qf = q.probs.ravel()
    meet = np.minimum(pf, qf)
    rp = pf - meet  # (p - q)^+
    rq = qf - meet  # (q - p)^+
    tv = float(rp.sum())
    joint = np.diag(meet)
    if tv > 0.0:
        joint = joint + np.outer(rp, rq) / tv
    axes = p.axes + tuple((n + "'", s) for n, s in q.axes)
    jp = FinitePmf(axes, joint.reshape(p.sizes + q.sizes))
    return Coupling(p, q, jp)


def coupling_to_channel(c: Coupling) -> Channel:
    """The conditional K(right | left) of a coupling.

    Rows with zero left-mass are filled with the right pmf, so pushing the
    left pmf through the result reproduces the right pmf exactly.
    """
    k = int(np.prod(c.left.sizes, dtype=np.int64))
    flat = c.joint.probs.reshape(k, k)
    lm = c.left.probs.ravel()
    out = np.empty_like(flat)
    ok = lm > 0.0
    out[ok] = flat[ok] / lm[ok, None]
    out[~ok] = c.right.probs.ravel()
    right_axes = tuple((n + "'", s) for n, s in c.right.axes)
    return Channel(c.left.axes, right_axes, out.reshape(c.left.sizes + c.right.sizes))
