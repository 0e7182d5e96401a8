"""
Command-line entry point.

Subcommands: ``criteria``, ``witness``, ``nv-demo``, ``gen-spins``.

Exit codes: 0 separable / witness silent, 10 entangled / witness fired,
2 usage or input error. Worker threads for ``nv-demo`` are taken from
``QUDIT_WITNESS_THREADS`` (default 1).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import criteria, files, linalg, nv
from .errors import WitnessError
from .model import load_density, load_model
from .witness import ProtocolConfig, witness_scan

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ENTANGLED = 10
THREADS_ENV = "QUDIT_WITNESS_THREADS"

# preparation pairs and coherences shown by the NV demo, in physical labels
DEMO_PREP_PAIRS = ((0, 1), (0, -1), (-1, 1))
DEMO_COHERENCES = ((0, 1), (-1, 1))
DEMO_POLARIZATIONS = (0.1, 0.4, 0.7, 1.0)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class TimeGrid:
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.steps < 2:
            raise UsageError("grid needs at least 2 steps")
        if not self.stop > self.start >= 0:
            raise UsageError("grid requires stop > start >= 0")

    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


def _grid(args) -> TimeGrid:
    start, stop, steps = args.grid
    try:
        steps_i = int(steps)
    except ValueError:
        raise UsageError(f"grid steps must be an integer, got {steps!r}") from None
    if steps_i != float(steps):
        raise UsageError(f"grid steps must be an integer, got {steps!r}")
    return TimeGrid(float(start), float(stop), steps_i)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _nv_config(args, p=None) -> nv.NvConfig:
    spins = nv.load_spin_table(args.table)
    cfg = nv.NvConfig(spins, b_z=args.bz, include_free_phases=args.free_phases)
    if p is not None:
        cfg = cfg.with_polarization(p)
    return cfg


def _dense_inputs(args):
    if args.model is None:
        raise UsageError("either --model or --nv is required")
    model = load_model(args.model, dense_cap=args.dense_cap)
    if args.r0_mixed:
        r0 = np.eye(model.dim_env, dtype=complex) / model.dim_env
    elif args.r0 is not None:
        r0 = load_density(args.r0)
    else:
        raise UsageError("--r0 FILE or --r0-mixed is required with --model")
    return model, r0


def cmd_criteria(args) -> int:
    out_dir = Path(args.out_dir)
    if args.nv:
        cfg = _nv_config(args, args.p)
        report = criteria.CriteriaReport(
            class_one=nv.factorized_class_one(cfg, args.t, args.exhaustive),
            class_two=nv.factorized_class_two(cfg, args.t, args.exhaustive),
            tolerance=args.tol,
            time=args.t,
            labels=nv.LABELS,
        )
    else:
        model, r0 = _dense_inputs(args)
        report = criteria.CriteriaReport(
            class_one=criteria.class_one_check(model, r0, args.t, args.tol, args.exhaustive),
            class_two=criteria.class_two_check(model, args.t, args.exhaustive),
            tolerance=args.tol,
            time=args.t,
        )
    files.atomic_write_text(out_dir / "criteria.json", report.to_json())
    print(f"verdict: {report.verdict.value}")
    return EXIT_ENTANGLED if report.verdict.entangled else EXIT_OK


def _report_json(report, labels=None) -> str:
    def lab(k):
        return k if labels is None else labels[k]

    doc = {
        "threshold": report.threshold,
        "fired": report.fired,
        "fired_pairs": [[lab(k), lab(q)] for k, q in sorted(report.fired_pairs)],
        "implied_entangled": [[lab(k), lab(q)] for k, q in sorted(report.implied_entangled)],
        "max_diffs": [
            {"k": lab(k), "q": lab(q), "i": lab(i), "j": lab(j), "max_abs_diff": v}
            for ((k, q), (i, j)), v in report.diffs.items()
        ],
        "prep_distances": [
            {"k": lab(k), "q": lab(q), "distance": v}
            for (k, q), v in sorted(report.prep_distances.items())
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def _write_witness(report, out_dir: Path, labels=None):
    for tr in report.traces:
        lk = tr.prep if labels is None else labels[tr.prep]
        li, lj = (x if labels is None else labels[x] for x in tr.pair)
        files.atomic_write_text(out_dir / f"trace_k{lk}_i{li}_j{lj}.csv", files.trace_csv(tr, labels))
    files.atomic_write_text(out_dir / "differences.csv", files.diff_csv(report, labels=labels))
    files.atomic_write_text(out_dir / "witness_report.json", _report_json(report, labels))


def cmd_witness(args) -> int:
    grid = _grid(args).points()
    out_dir = Path(args.out_dir)
    if args.nv:
        cfg = _nv_config(args, args.p)
        preps = args.preps or list(nv.BRANCHES)
        protocol = ProtocolConfig(
            args.tau, [nv.branch_index(k) for k in preps], grid,
            firing_threshold=args.threshold,
        )
        report = nv.factorized_witness_scan(cfg, protocol)
        labels = nv.LABELS
    else:
        model, r0 = _dense_inputs(args)
        preps = args.preps or list(range(model.n_sys))
        protocol = ProtocolConfig(args.tau, preps, grid, firing_threshold=args.threshold)
        report = witness_scan(model, r0, protocol, include_free_phase=args.free_phases)
        labels = None
    _write_witness(report, out_dir, labels)
    print(f"max difference: {report.max_diff:.6e}; fired pairs: {len(report.fired_pairs)}")
    return EXIT_ENTANGLED if report.fired else EXIT_OK


def _demo_one(cfg: nv.NvConfig, tau: float, grid: np.ndarray):
    protocol = ProtocolConfig(tau, (0, 1, 2), grid,
                              pairs=[tuple(nv.branch_index(x) for x in c) for c in DEMO_COHERENCES])
    return nv.factorized_witness_scan(cfg, protocol)


def _p_tag(p: float) -> str:
    return repr(float(p))


def cmd_nv_demo(args) -> int:
    grid = _grid(args).points()
    out_dir = Path(args.out_dir)
    base = _nv_config(args)
    configs = [base.with_polarization(p) for p in args.p]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(lambda c: _demo_one(c, args.tau, grid), configs))
    prep_pairs = [tuple(nv.branch_index(x) for x in pq) for pq in DEMO_PREP_PAIRS]
    summary = []
    for p, report in zip(args.p, reports):
        for coh in DEMO_COHERENCES:
            pair = tuple(nv.branch_index(x) for x in coh)
            name = f"nv_demo_p{_p_tag(p)}_coh_{coh[0]}_{coh[1]}.csv"
            text = files.diff_csv(report, prep_pairs, [pair], nv.LABELS)
            files.atomic_write_text(out_dir / name, text)
            for (k, q), (lk, lq) in zip(prep_pairs, DEMO_PREP_PAIRS):
                delta = report.difference(k, q, pair)
                summary.append({
                    "p": p, "i": coh[0], "j": coh[1], "k": lk, "q": lq,
                    "max_abs_diff": float(np.max(np.abs(delta))),
                    "max_abs_im_diff": float(np.max(np.abs(delta.imag))),
                })
    doc = {"tau": args.tau, "b_z": args.bz, "spins": len(base.spins), "results": summary}
    files.atomic_write_text(out_dir / "nv_demo_summary.json", json.dumps(doc, indent=1) + "\n")
    fired = any(r.fired for r in reports)
    print(f"wrote {len(args.p) * len(DEMO_COHERENCES)} difference files to {out_dir}")
    return EXIT_ENTANGLED if fired else EXIT_OK


def cmd_gen_spins(args) -> int:
    spins = nv.random_spins(args.seed, args.count, args.r_min, args.r_max, p=args.p)
    nv.write_spin_table(spins, args.out)
    print(f"wrote {len(spins)} spins to {args.out}")
    return EXIT_OK


def _add_source(sp):
    src = sp.add_argument_group("model source")
    src.add_argument("--model", help="model JSON file (dense path)")
    src.add_argument("--r0", help="environment state JSON file {\"r0\": matrix}")
    src.add_argument("--r0-mixed", action="store_true", help="use the maximally mixed environment")
    src.add_argument("--dense-cap", type=int, default=linalg.DEFAULT_DENSE_CAP,
                     help="largest environment dimension for the dense path")
    src.add_argument("--nv", action="store_true", help="use the NV-center model (factorized path)")
    _add_nv(sp)
    sp.add_argument("--p", type=float, default=None,
                    help="uniform nuclear polarization (NV; default: table column)")


def _add_nv(sp):
    sp.add_argument("--table", default=None, help="spin table CSV (default: bundled 14-spin table)")
    sp.add_argument("--bz", type=float, default=0.02, help="magnetic field in T")
    sp.add_argument("--free-phases", action="store_true", help="include pointer free phases")


def _add_grid(sp, default):
    sp.add_argument("--grid", nargs=3, metavar=("START", "STOP", "STEPS"), default=default,
                    help="inclusive time grid (us for NV)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qudit-witness",
                                     description="Qudit-environment entanglement under pure dephasing.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("criteria", help="evaluate both classes of separability criteria")
    _add_source(sp)
    sp.add_argument("--t", type=float, required=True, help="evolution time")
    sp.add_argument("--tol", type=float, default=criteria.DEFAULT_TOL)
    sp.add_argument("--exhaustive", action="store_true", help="scan all pairs and quadruples")
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_criteria)

    sp = sub.add_parser("witness", help="simulate the preparation-and-coherence witness")
    _add_source(sp)
    sp.add_argument("--tau", type=float, required=True, help="preparation time")
    _add_grid(sp, ["0", "3", "300"])
    sp.add_argument("--preps", type=int, nargs="+", default=None,
                    help="preparation pointer states (NV: physical labels -1 0 1)")
    sp.add_argument("--threshold", type=float, default=1e-6)
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_witness)

    sp = sub.add_parser("nv-demo", help="NV-center qutrit demonstration over polarizations")
    _add_nv(sp)
    sp.add_argument("--p", type=float, nargs="+", default=list(DEMO_POLARIZATIONS))
    sp.add_argument("--tau", type=float, default=3.0)
    _add_grid(sp, ["0", "3", "300"])
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_nv_demo)

    sp = sub.add_parser("gen-spins", help="generate a random spin table")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--r-min", type=float, default=0.5, help="nm")
    sp.add_argument("--r-max", type=float, default=0.7, help="nm")
    sp.add_argument("--p", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_spins)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, WitnessError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
