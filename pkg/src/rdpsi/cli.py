"""Command-line front door.

Subcommands: ``region`` and ``ed-region`` trace trade-off curves for a
finite source, ``gaussian`` evaluates the jointly Gaussian closed form,
``simulate`` runs the finite-blocklength pipeline over a blocklength grid,
``softcover`` sweeps exact soft-covering total variations, and ``couple``
builds the maximal-coupling correction between two pmfs.

Every run is determined by its resolved options plus the master seed; the
JSON artifact embeds version, resolved config, seed and guard flags so
identical invocations produce byte-identical files. Wall-clock timing goes
to a sidecar ``run.log``, never into artifacts. Artifacts are written
atomically (temp file, then rename). Exit codes: 0 success, 2 validation
error, 3 numeric/guard/infeasibility error; failures also emit a JSON
error object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .coding_sim import (
    perfect_realism_correct,
    plan_rates,
    simulate,
    soft_cover_sweep,
)
from .errors import CapacityError, InfeasibleError, NumericError
from .gaussian_model import make_params, mc_validate, min_rate as gaussian_min_rate
from .prob_core import FinitePmf, apply_channel, total_variation
from .region_solver import (
    OptimizerOptions,
    RegionPoint,
    SourceSpec,
    min_rate,
    region_curve,
)
from .seeds import derive_seed

CURVE_HEADER = ("delta", "rate", "rc_sum", "realism_gap", "v_size", "feasible")
SIM_HEADER = (
    "n",
    "rate_m",
    "rate_mprime",
    "rate_j",
    "trials",
    "avg_distortion",
    "mprime_error_rate",
    "tv_exact",
    "tv_per_letter",
    "seed",
)
SOFTCOVER_HEADER = ("n", "rate", "n_words", "draws", "tv_mean", "tv_sd", "skipped")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def _atomic_write(path: str, data: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(data)
    os.replace(tmp, path)


def emit_curve(points: Sequence[RegionPoint], path: str) -> None:
    """Write a curve CSV: fixed header, rows sorted by delta, floats at 12
    significant digits."""
    ordered = sorted(points, key=lambda p: (p.delta is None, p.delta))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for p in ordered:
        writer.writerow(
            [
                _fmt(float("nan") if p.delta is None else p.delta),
                _fmt(p.rate),
                _fmt(p.rc_sum),
                _fmt(p.realism_gap),
                p.v_size if p.v_size is not None else "",
                _fmt(bool(p.feasible)),
            ]
        )
    _atomic_write(path, buf.getvalue())


def parse_curve(path: str) -> list[RegionPoint]:
    """Read back a curve CSV written by :func:`emit_curve`."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CURVE_HEADER:
            raise ValueError(f"unexpected curve header {reader.fieldnames}")
        for row in reader:
            out.append(
                RegionPoint(
                    rate=float(row["rate"]),
                    rc_sum=float(row["rc_sum"]),
                    distortion=float("nan"),
                    realism_gap=float(row["realism_gap"]),
                    delta=float(row["delta"]),
                    v_size=int(row["v_size"]) if row["v_size"] else None,
                    feasible=bool(int(row["feasible"])),
                )
            )
    return out


def _rows_to_csv(header: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[k]) if row[k] != "" else "" for k in header])
    return buf.getvalue()


def _emit(args, base: str, json_doc: dict, csv_text: str | None) -> list[str]:
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    if args.format in ("json", "both"):
        path = os.path.join(args.out_dir, f"{base}.json")
        _atomic_write(path, json.dumps(json_doc, indent=2, sort_keys=True) + "\n")
        written.append(path)
    if csv_text is not None and args.format in ("csv", "both"):
        path = os.path.join(args.out_dir, f"{base}.csv")
        _atomic_write(path, csv_text)
        written.append(path)
    return written


def _report_skeleton(args, command: str, config: dict, guard_flags: dict) -> dict:
    return {
        "version": __version__,
        "command": command,
        "seed": args.seed,
        "config": config,
        "guard_flags": guard_flags,
    }


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}")


def _parse_ints(text: str) -> list[int]:
    vals = _parse_floats(text)
    out = [int(v) for v in vals]
    if any(abs(o - v) > 0 for o, v in zip(out, vals)):
        raise ValueError(f"expected integers, got {text!r}")
    return out


def _parse_matrix(text: str) -> np.ndarray:
    return np.array([_parse_floats(row) for row in text.split(";")])


def _load_source(path: str) -> SourceSpec:
    with open(path) as fh:
        return SourceSpec.from_dict(json.load(fh))


def _load_pmf(path: str) -> FinitePmf:
    with open(path) as fh:
        return FinitePmf.from_dict(json.load(fh))


def _point_doc(point) -> dict:
    return {"enc": point.enc.to_dict(), "dec": point.dec.to_dict()}


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_region(args, mode: str) -> tuple[str, dict, str | None, str]:
    source = _load_source(args.source)
    deltas = _parse_floats(args.delta)
    if not deltas:
        raise ValueError("at least one delta is required")
    opts = OptimizerOptions(
        starts=args.starts, seed=args.seed, workers=args.workers
    )
    pairs = region_curve(
        source,
        deltas,
        mode=mode,
        v_size=args.v_size,
        realism_tol=args.realism_tol,
        opts=opts,
        return_points=True,
    )
    points = [rp for rp, _ in pairs]
    config = {
        "source": args.source,
        "delta": deltas,
        "v_size": args.v_size,
        "realism_tol": args.realism_tol,
        "starts": args.starts,
        "mode": mode,
        "workers": args.workers,
    }
    doc = _report_skeleton(args, "region" if mode == "D" else "ed-region", config, {})
    doc["points"] = [
        {
            "delta": rp.delta,
            "rate": rp.rate,
            "rc_sum": rp.rc_sum,
            "distortion": rp.distortion,
            "realism_gap": rp.realism_gap,
            "v_size": rp.v_size,
            "feasible": rp.feasible,
        }
        for rp in points
    ]
    doc["channels"] = [(_point_doc(fp) if fp is not None else None) for _, fp in pairs]
    # reuse the curve CSV layout
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for rp in sorted(points, key=lambda p: p.delta):
        writer.writerow(
            [
                _fmt(rp.delta),
                _fmt(rp.rate),
                _fmt(rp.rc_sum),
                _fmt(rp.realism_gap),
                rp.v_size if rp.v_size is not None else "",
                _fmt(bool(rp.feasible)),
            ]
        )
    n_feasible = sum(1 for rp in points if rp.feasible)
    summary = f"{len(points)} deltas, {n_feasible} feasible"
    base = "region" if mode == "D" else "ed-region"
    return base, doc, buf.getvalue(), summary


def _cmd_gaussian(args) -> tuple[str, dict, str | None, str]:
    params = make_params(args.eta, args.delta)
    rate = gaussian_min_rate(params)
    config = {"eta": args.eta, "delta": args.delta, "mc_samples": args.mc_samples}
    doc = _report_skeleton(args, "gaussian", config, {})
    doc["params"] = {
        "eta": params.eta,
        "delta": params.delta,
        "rho": params.rho,
        "b": params.b,
    }
    doc["rate_bits"] = rate
    if args.mc_samples:
        stats = mc_validate(params, args.mc_samples, args.seed)
        doc["mc"] = stats.to_dict()
    return "gaussian", doc, None, f"rate_bits={rate:.6g}"


def _cmd_simulate(args) -> tuple[str, dict, str | None, str]:
    source = _load_source(args.source)
    opts = OptimizerOptions(starts=args.starts, seed=args.seed, workers=args.workers)
    rp, point = min_rate(
        source,
        args.delta,
        v_size=args.v_size,
        realism_tol=args.realism_tol,
        opts=opts,
    )
    ns = _parse_ints(args.n)
    rows = []
    reports = []
    for n in ns:
        plan = plan_rates(point, n, args.epsilon, rc=args.rc)
        report = simulate(
            source,
            point,
            plan,
            trials=args.trials,
            seed=derive_seed(args.seed, "simulate", n),
            delta_typ=args.delta_typ,
            correct_realism=args.correct_realism,
        )
        rows.append(report.csv_row())
        reports.append(report.to_dict())
    config = {
        "source": args.source,
        "delta": args.delta,
        "n": ns,
        "trials": args.trials,
        "epsilon": args.epsilon,
        "rc": args.rc,
        "delta_typ": args.delta_typ,
        "v_size": args.v_size,
        "realism_tol": args.realism_tol,
        "starts": args.starts,
        "correct_realism": args.correct_realism,
        "workers": args.workers,
    }
    guard = {
        "exact_tv_available": [r["tv_exact"] is not None for r in reports],
        "correction_skipped": [r["correction_skipped"] for r in reports],
    }
    doc = _report_skeleton(args, "simulate", config, guard)
    doc["operating_point"] = {
        "rate": rp.rate,
        "rc_sum": rp.rc_sum,
        "distortion": rp.distortion,
        "realism_gap": rp.realism_gap,
        "v_size": rp.v_size,
    }
    doc["channels"] = _point_doc(point)
    doc["reports"] = reports
    summary = f"{len(ns)} blocklengths x {args.trials} trials"
    return "simulate", doc, _rows_to_csv(SIM_HEADER, rows), summary


def _cmd_softcover(args) -> tuple[str, dict, str | None, str]:
    pv = np.asarray(_parse_floats(args.pv))
    emit = _parse_matrix(args.emit)
    if emit.shape[0] != pv.size:
        raise ValueError(
            f"emission matrix has {emit.shape[0]} rows, pv has {pv.size} entries"
        )
    rates = _parse_floats(args.rates)
    ns = _parse_ints(args.n)
    rows = soft_cover_sweep(
        pv, emit, rates, ns, codebooks_per_cell=args.codebooks_per_cell,
        seed=args.seed,
    )
    config = {
        "pv": pv.tolist(),
        "emit": emit.tolist(),
        "rates": rates,
        "n": ns,
        "codebooks_per_cell": args.codebooks_per_cell,
    }
    guard = {"skipped_cells": sum(1 for r in rows if r["skipped"])}
    doc = _report_skeleton(args, "softcover", config, guard)
    doc["table"] = rows
    summary = f"{len(rows)} cells, {guard['skipped_cells']} skipped"
    return "softcover", doc, _rows_to_csv(SOFTCOVER_HEADER, rows), summary


def _cmd_couple(args) -> tuple[str, dict, str | None, str]:
    p = _load_pmf(args.p)
    q = _load_pmf(args.q)
    channel, mismatch = perfect_realism_correct(p, q)
    corrected = apply_channel(p, channel)
    # compare on identical axes: the correction outputs primed names
    renamed = FinitePmf(q.axes, corrected.probs)
    max_abs = float(np.abs(renamed.probs - q.probs).max())
    tv = total_variation(p, q)
    config = {"p": args.p, "q": args.q, "embed_channel": args.embed_channel}
    doc = _report_skeleton(args, "couple", config, {})
    doc["tv"] = tv
    doc["mismatch_probability"] = mismatch
    doc["corrected_max_abs_error"] = max_abs
    if args.embed_channel:
        doc["channel"] = channel.to_dict()
    return "couple", doc, None, f"tv={tv:.6g} max_abs={max_abs:.3g}"


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdpsi",
        description=(
            "Trade-off regions and finite-blocklength simulations for lossy "
            "coding with side information under an output-realism constraint."
        ),
    )
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="parallel workers for multi-start optimization",
    )
    parser.add_argument("--out-dir", default=".", help="artifact directory")
    parser.add_argument(
        "--format", choices=("csv", "json", "both"), default="both",
        help="artifact formats to write",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_optimizer_flags(p):
        p.add_argument("--v-size", type=int, default=None)
        p.add_argument("--realism-tol", type=float, default=1e-6)
        p.add_argument("--starts", type=int, default=32)

    p_region = sub.add_parser("region", help="decoder-side trade-off curve")
    p_region.add_argument("--source", required=True, help="SourceSpec JSON path")
    p_region.add_argument(
        "--delta", required=True, help="comma-separated distortion budgets"
    )
    add_optimizer_flags(p_region)

    p_ed = sub.add_parser("ed-region", help="two-sided side information curve")
    p_ed.add_argument("--source", required=True)
    p_ed.add_argument("--delta", required=True)
    add_optimizer_flags(p_ed)

    p_gauss = sub.add_parser("gaussian", help="jointly Gaussian closed form")
    p_gauss.add_argument("--eta", type=float, required=True)
    p_gauss.add_argument("--delta", type=float, required=True)
    p_gauss.add_argument(
        "--mc-samples", type=int, default=0,
        help="also run the Monte Carlo identity checks",
    )

    p_sim = sub.add_parser("simulate", help="finite-blocklength pipeline")
    p_sim.add_argument("--source", required=True)
    p_sim.add_argument("--delta", type=float, required=True)
    p_sim.add_argument("--n", required=True, help="comma-separated blocklengths")
    p_sim.add_argument("--trials", type=int, default=1000)
    p_sim.add_argument("--epsilon", type=float, default=0.1)
    p_sim.add_argument("--rc", type=float, default=0.0)
    p_sim.add_argument("--delta-typ", type=float, default=None)
    p_sim.add_argument("--correct-realism", action="store_true")
    add_optimizer_flags(p_sim)

    p_soft = sub.add_parser("softcover", help="exact soft-covering sweep")
    p_soft.add_argument("--pv", required=True, help="comma-separated pmf")
    p_soft.add_argument(
        "--emit", required=True, help="emission rows, ';'-separated"
    )
    p_soft.add_argument("--rates", required=True)
    p_soft.add_argument("--n", required=True)
    p_soft.add_argument("--codebooks-per-cell", type=int, default=8)

    p_couple = sub.add_parser("couple", help="maximal-coupling correction")
    p_couple.add_argument("--p", required=True, help="FinitePmf JSON path")
    p_couple.add_argument("--q", required=True, help="FinitePmf JSON path")
    p_couple.add_argument("--embed-channel", action="store_true")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.command == "region":
            base, doc, csv_text, summary = _cmd_region(args, "D")
        elif args.command == "ed-region":
            base, doc, csv_text, summary = _cmd_region(args, "E-D")
        elif args.command == "gaussian":
            base, doc, csv_text, summary = _cmd_gaussian(args)
        elif args.command == "simulate":
            base, doc, csv_text, summary = _cmd_simulate(args)
        elif args.command == "softcover":
            base, doc, csv_text, summary = _cmd_softcover(args)
        elif args.command == "couple":
            base, doc, csv_text, summary = _cmd_couple(args)
        else:  # unreachable; argparse enforces the choice
            raise ValueError(f"unknown command {args.command!r}")
        written = _emit(args, base, doc, csv_text)
    except (ValueError, FileNotFoundError, json.JSONDecodeError, KeyError) as err:
        json.dump(
            {"error": type(err).__name__, "message": str(err), "exit_code": 2},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 2
    except (CapacityError, NumericError, InfeasibleError, OSError) as err:
        json.dump(
            {"error": type(err).__name__, "message": str(err), "exit_code": 3},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 3
    elapsed = time.perf_counter() - t0
    try:
        with open(os.path.join(args.out_dir, "run.log"), "a") as fh:
            fh.write(
                f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {args.command} "
                f"elapsed={elapsed:.3f}s seed={args.seed}\n"
            )
    except OSError:
        pass  # the log is best-effort; artifacts already landed
    print(f"{args.command}: {summary} -> {', '.join(written) if written else 'no files'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
