"""Command-line front end: ``lpspec {region,quasimode,volume,bottom,report}``.

Exit codes: 0 success, 2 configuration error, 3 failed rows, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import discrete, volume
from .config import ExperimentConfig, load_config, parse_config_text
from .errors import ConfigError, CouplingError, EmptyPreimageError, LpSpecError
from .figures import build_figure
from .quasimode import make_quasimode, verify_quasimode
from .regions import lp_contained_region, lp_containing_parabola, membership, ray_membership, region_to_dict

log = logging.getLogger("lpspec")

EXIT_OK, EXIT_CONFIG, EXIT_FAILED, EXIT_NUMERIC = 0, 2, 3, 4


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LPSPEC_THREADS", "1")))
    except ValueError:
        return 1


def _clean(obj):
    """Make results JSON-safe: complex -> {re, im}, non-finite -> None, numpy -> python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def run_region(cfg: ExperimentConfig) -> tuple[dict, dict[str, str]]:
    out = {"regions": [region_to_dict(cfg.params, p) for p in cfg.p]}
    svgs = {}
    for fig in cfg.figures():
        p = 1.0 if fig.kind.startswith("l1") else cfg.p[0]
        svgs[f"figure-{fig.kind}.svg"] = build_figure(fig, cfg.params, p)
    return out, svgs


def _quasimode_row(cfg: ExperimentConfig, p, A, eps, s, L) -> dict:
    row = {"p": p, "A": A, "epsilon": eps, "s": s}
    try:
        spec = make_quasimode(cfg.metric, p, A, eps, s=s, k=cfg.smoothness, order=cfg.bump_order, L=L)
        _, _, rep = verify_quasimode(spec, cfg.metric, c_pass=cfg.c_pass)
        row.update(rep.to_dict())
        row["bumpCenter"] = list(spec.bump.center)
    except (CouplingError, EmptyPreimageError, ValueError) as exc:
        row.update({"pass": False, "error": str(exc)})
    return row


def run_quasimode(cfg: ExperimentConfig) -> tuple[dict, bool]:
    combos = list(itertools.product(cfg.p, cfg.a_values(), cfg.epsilon, cfg.s, cfg.L or [None]))
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda c: _quasimode_row(cfg, *c), combos))
    ok = all(r.get("pass") for r in rows)
    return {"rows": rows, "allPass": ok}, ok


def run_volume(cfg: ExperimentConfig) -> dict:
    metric = cfg.metric
    fit = volume.fit_volume_growth(metric, cfg.R)
    target = metric.n * metric.profile.alpha1
    a1e = metric.profile.alpha1 + cfg.sl_epsilon
    gamma = cfg.sl_gamma if cfg.sl_gamma is not None else 2 * a1e
    Rmax = cfg.R[-1]
    sl = volume.sturm_liouville_compare(min(cfg.sl_s, Rmax), min(cfg.sl_t, Rmax), a1e, gamma, Rmax, metric.n)
    idx = np.linspace(0, len(sl.r) - 1, 51).astype(int)
    return {
        "kappaHat": fit.kappa_hat,
        "target": target,
        "relError": abs(fit.kappa_hat - target) / target,
        "fit": {"radii": fit.radii.tolist(), "logVolumes": fit.log_volumes.tolist(),
                "fitRadii": fit.fit_radii.tolist(), "intercept": fit.intercept,
                "residualRms": fit.residual_rms},
        "sturmLiouville": {"alpha1PlusEps": a1e, "gamma": gamma, "s": cfg.sl_s, "t": cfg.sl_t,
                           "r": sl.r[idx].tolist(), "logVolumeBound": sl.log_volume[idx].tolist(),
                           "slope": sl.growth_slope(), "slopeTarget": metric.n * a1e},
    }


def _bottom_truncations(cfg: ExperimentConfig) -> list[float]:
    if cfg.u_max:
        return sorted(cfg.u_max)
    U = 40.0 / cfg.metric.n
    return [U / 2, U]


def run_bottom(cfg: ExperimentConfig) -> dict:
    metric = cfg.metric
    target = metric.n**2 * metric.profile.alpha0**2 / 4
    levels = []
    for U in _bottom_truncations(cfg):
        grid = discrete.CollarGrid.from_spacing(U, cfg.du, cfg.ny, metric.n, budget=cfg.budget)
        res = discrete.smallest_eigenvalue(discrete.assemble(metric, grid))
        levels.append({"uMax": U, "nu": grid.nu, "ny": grid.ny, "hU": grid.h_u,
                       "value": res.value, "residual": res.residual})
    best = levels[-1]["value"]
    vals = [lv["value"] for lv in levels]
    return {
        "lambda1Hat": best,
        "target": target,
        "relError": abs(best - target) / target,
        "refinement": levels,
        "monotone": all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:])),
    }


def run_probes(cfg: ExperimentConfig) -> dict:
    metric = cfg.metric
    p = cfg.probe_p
    contained = lp_contained_region(cfg.params, p)
    containing = lp_containing_parabola(cfg.params, p)
    truncs = sorted(cfg.u_max) if cfg.u_max else [8.0, 12.0, 16.0]
    ops = [discrete.assemble(metric, discrete.CollarGrid.from_spacing(U, cfg.du, cfg.ny, metric.n,
                                                                      budget=cfg.budget))
           for U in truncs]
    rows = []
    for z in cfg.probe_z:
        inside = ray_membership(z, contained) if contained.degenerate else membership(z, contained)
        vals = [discrete.resolvent_probe(op, z, p, cfg.probe_trials, cfg.seed) for op in ops]
        rows.append({"z": z, "insideContained": inside, "insideContaining": containing.contains(z),
                     "probes": vals, "spread": max(vals) / min(vals),
                     "increasing": all(b > a for a, b in zip(vals, vals[1:]))})
    return {"p": p, "uMax": truncs, "rows": rows}


def _emit(args, name: str, payload: dict, svgs: dict[str, str] | None = None) -> None:
    text = dumps(payload)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text)
        if svgs and args.svg is not False:
            for fname, svg in svgs.items():
                (out / fname).write_text(svg)
    if args.json or not args.out:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpspec", description="Lp spectral regions on model collars")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in [("region", "region formulas and figures"),
                           ("quasimode", "quasimode residual sweep"),
                           ("volume", "volume growth rate and comparison bound"),
                           ("bottom", "bottom of the discrete L2 spectrum"),
                           ("report", "run everything into --out")]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--json", action="store_true", help="also print JSON to stdout")
        sp.add_argument("--svg", action="store_true", default=None, help="write SVG figures")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config_text("")
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be non-negative")
        cfg.seed = args.seed
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "region":
            payload, svgs = run_region(cfg)
            _emit(args, "region", payload, svgs)
            return EXIT_OK
        if args.command == "quasimode":
            payload, ok = run_quasimode(cfg)
            _emit(args, "quasimode", payload)
            return EXIT_OK if ok else EXIT_FAILED
        if args.command == "volume":
            _emit(args, "volume", run_volume(cfg))
            return EXIT_OK
        if args.command == "bottom":
            _emit(args, "bottom", run_bottom(cfg))
            return EXIT_OK
        if not args.out:
            print("config error: report needs --out", file=sys.stderr)
            return EXIT_CONFIG
        region, svgs = run_region(cfg)
        qm, ok = run_quasimode(cfg)
        bundle = {"region": region, "quasimode": qm, "volume": run_volume(cfg), "bottom": run_bottom(cfg)}
        if cfg.probe_z:
            bundle["resolvent"] = run_probes(cfg)
        for name, payload in bundle.items():
            _emit(argparse.Namespace(out=args.out, json=False, svg=True), name,
                  payload, svgs if name == "region" else None)
        if args.json:
            sys.stdout.write(dumps(bundle))
        return EXIT_OK if ok else EXIT_FAILED
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LpSpecError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
