"""Command-line front end: ``pbcover {pbeval,minimize,sweep,check,hilbert}``.

Runs are described by a JSON config validated against the shipped schema.
Each run writes its results, CSV tables, plot data and a manifest into an
output directory.  Exit status is 0 on success, 1 on input errors and 2 when
a consistency check fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import cover as cv
from . import experiments as ex
from .io import dumps, write_csv, write_json, write_manifest
from .partition import BumpProfile, PartitionFamily, canonical_partition
from .pbnorm import PbConfig, pb_of_partition, set_backend
from .spacefill import HilbertCurve, export_curve_csv, measure_report
from .surface import make_surface

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2
OUT_ENV = "PBCOVER_OUT"  # the only environment override: the output directory


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    text = resources.files("pbcover").joinpath("schemas/run_config.schema.json").read_text()
    return json.loads(text)


def validate_config(cfg: dict) -> None:
    v = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {path}: {e.message}")


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}")
    validate_config(cfg)
    return cfg


# -- builders ----------------------------------------------------------------


def build_surface(spec: dict):
    kind = spec["kind"]
    area = spec.get("area", 4 * math.pi if kind == "sphere" else 1.0)
    return make_surface(kind, area, tuple(spec["grid"]))


def build_cover(surface, spec: dict):
    t = spec["type"]
    eta = spec.get("eta", cv.DEFAULT_ETA)
    c = spec.get("capacity")
    if t == "disks":
        if surface.kind == "sphere":
            return cv.DiscreteCover(surface, [cv.cap_embedding(surface, p, c, eta) for p in spec["centers"]])
        return cv.DiscreteCover(surface, [cv.translated_disk(surface, p, c, eta) for p in spec["centers"]])
    if t == "caps":
        areas = spec.get("areas", c)
        if areas is None:
            raise ConfigError("caps need 'areas' or 'capacity'")
        return ex.cap_cover(surface, spec["axes"], areas, eta)
    if t == "solid":
        rot = None
        if "rotation_seed" in spec:
            rot = ex.random_rotation(np.random.default_rng(spec["rotation_seed"]))
        return ex.solid_cover(surface, spec["n"], c, rotation=rot, eta=eta)
    if t == "bands":
        d = spec.get("direction", "h")
        return cv.DiscreteCover(surface, [cv.band_embedding(surface, d, lv, c, eta) for lv in spec["levels"]])
    if t == "lattice":
        return ex.lattice_cover(surface, c, spec.get("k"), eta)
    if t == "path":
        return cv.make_continuous_cover(surface, spec["waypoints"], c, spec["M_t"], eta, times=spec.get("times"))
    if t == "boustrophedon":
        wp, ts = cv.boustrophedon_path(surface, spec["rows"])
        return cv.make_continuous_cover(surface, wp, c, spec["M_t"], eta, times=ts)
    if t == "square":
        return ex._square_cover(surface, c, spec["side"], eta)[0]
    raise ConfigError(f"unknown cover type {t!r}")


def build_partition(cover, spec: dict | None):
    spec = spec or {}
    kind = spec.get("kind", "canonical")
    profile = spec.get("profile", "poly")
    if kind == "canonical":
        return canonical_partition(cover, BumpProfile(profile))
    if kind == "two-row":
        return ex.two_row_partition(cover)
    fam = PartitionFamily(cover, profile, tuple(spec.get("vary", ("shape", "amplitude", "offset"))))
    theta = np.asarray(spec.get("theta", fam.default), dtype=float)
    if theta.shape != (fam.dim,):
        raise ConfigError(f"theta has {theta.size} entries, the family needs {fam.dim}")
    return fam.partition(theta)


def pb_config(cfg: dict, threads: int) -> tuple[str, PbConfig]:
    spec = cfg.get("pb", {})
    conf = PbConfig(n_exact=spec.get("n_exact", 16), restarts=spec.get("restarts", 32),
                    seed=cfg.get("seed", 0), threads=threads)
    return spec.get("method", "auto"), conf


# -- plot data -----------------------------------------------------------------


def witness_field(partition, report) -> np.ndarray:
    """Bracket field sum_ij a_i b_j {F_i, F_j} on the primary chart for the report's witnesses."""
    s = partition.surface
    w = partition.weights[:, None]
    U = w * partition.gx.reshape(partition.n, -1)
    V = w * partition.gy.reshape(partition.n, -1)
    a, b = np.asarray(report.a, float), np.asarray(report.b, float)
    if a.size != partition.n:
        return np.zeros(s.shape)
    Au, Av, Bu, Bv = a @ U, a @ V, b @ U, b @ V
    return (Au * Bv - Av * Bu).reshape(s.shape)


def write_heatmap(path, partition, report) -> None:
    X, Y = partition.surface.coords()
    F = witness_field(partition, report)
    write_csv(path, ["x", "y", "bracket"], zip(X.ravel(), Y.ravel(), F.ravel()))


def emit_plot_data(table, outdir, partition=None, report=None, column: str = "pb") -> list[str]:
    """Two-column pb(c) file and, given a witness report, a heat-map CSV."""
    outdir = Path(outdir)
    ex.emit_plot_data(table, outdir / "pb_curve.dat", column)
    files = ["pb_curve.dat"]
    if partition is not None and report is not None:
        write_heatmap(outdir / "heatmap.csv", partition, report)
        files.append("heatmap.csv")
    return files


# -- subcommands ---------------------------------------------------------------


def run_pbeval(cfg, out, threads):
    S = build_surface(cfg["surface"])
    cov = build_cover(S, cfg["cover"])
    part = build_partition(cov, cfg.get("partition"))
    method, conf = pb_config(cfg, threads)
    rep = pb_of_partition(part, method, conf)
    write_json(out / "result.json", {"kind": "pbeval", "cover": cov.describe(), "pb": rep.to_dict()})
    write_heatmap(out / "heatmap.csv", part, rep)
    return EXIT_OK, {"seconds_pb": rep.seconds}


def run_minimize(cfg, out, threads):
    S = build_surface(cfg["surface"])
    cov = build_cover(S, cfg["cover"])
    o = cfg.get("optimizer", {})
    oc = ex.OptimizerConfig(restarts=o.get("restarts", 8), max_evals=o.get("max_evals", 500), seed=cfg["seed"],
                            method=o.get("method", "auto"), threads=threads,
                            vary=tuple(o.get("vary", ("shape", "amplitude", "offset"))),
                            profile=o.get("profile", "poly"))
    fam = PartitionFamily(cov, oc.profile, oc.vary)
    res = ex.minimize_pb(cov, fam, oc)
    write_json(out / "result.json", {
        "kind": "minimize", "cover": cov.describe(), "theta": res.theta, "value": res.value,
        "canonical_value": res.canonical_value, "evaluations": res.evaluations, "pb": res.report.to_dict(),
    })
    write_csv(out / "restarts.csv", ["start", "value", "evaluations"],
              [(r["start"], r["value"], r["evaluations"]) for r in res.restarts])
    write_heatmap(out / "heatmap.csv", fam.partition(res.theta), res.report)
    return EXIT_OK, {}


def run_sweep(cfg, out, threads):
    S = build_surface(cfg["surface"])
    sw = cfg["sweep"]
    o = cfg.get("optimizer", {})
    oc = ex.OptimizerConfig(restarts=o.get("restarts", 8), max_evals=o.get("max_evals", 500), seed=cfg["seed"],
                            method=o.get("method", "auto"), threads=threads,
                            vary=tuple(o.get("vary", ("shape", "amplitude", "offset"))),
                            profile=o.get("profile", "poly"))
    table = ex.pb_curve_sweep(S, sw["capacities"], sw.get("template", "lattice"), oc,
                              sw.get("eta", cv.DEFAULT_ETA), workers=sw.get("workers", 1))
    write_json(out / "sweep.json", table.to_dict())
    table.to_csv(out / "sweep.csv")
    part = rep = None
    if table.rows:
        part, rep = ex.row_partition(S, table.rows[-1], oc, sw.get("template", "lattice"),
                                     sw.get("eta", cv.DEFAULT_ETA))
    emit_plot_data(table, out, part, rep)
    tol = cfg.get("tolerances", {}).get("monotonicity", 0.05)
    viol = ex.monotonicity_report(table, tol)
    write_json(out / "monotonicity.json", {"tolerance": tol, "violations": viol})
    return (EXIT_CHECK if viol else EXIT_OK), {}


def run_check(cfg, out, threads):
    ck = cfg["check"]
    name = ck["name"]
    seed = cfg["seed"]
    grid = tuple(ck["grid"]) if "grid" in ck else None
    kw = {} if grid is None else {"grid": grid}
    if name == "two-set":
        rep = ex.two_set_vanishing(ck.get("covers", 20), seed)
    elif name == "half-area":
        rep = ex.half_area_vanishing(area_factor=ck.get("area_factor", 2.2), eta=ck.get("eta", 0.05), **kw)
    elif name == "polterovich":
        S = build_surface(cfg["surface"]) if "surface" in cfg else None
        if S is None or "cover" not in cfg:
            raise ConfigError("the polterovich check needs 'surface' and 'cover'")
        cov = build_cover(S, cfg["cover"])
        rep = ex.polterovich_consistency(cov, build_partition(cov, cfg.get("partition")))
    elif name == "polterovich-suite":
        rep = ex.polterovich_suite(seed, **kw)[0]
    elif name == "coarse-polterovich":
        if "surface" not in cfg or "cover" not in cfg:
            raise ConfigError("the coarse-polterovich check needs 'surface' and 'cover'")
        cov = build_cover(build_surface(cfg["surface"]), cfg["cover"])
        rep = ex.coarse_polterovich(cov, build_partition(cov, cfg.get("partition")), ck.get("N", 4))
    elif name == "correspondence":
        rep = ex.correspondence_check(seed=seed, draws=ck.get("draws", 8), **kw)
    elif name == "two-row":
        rep = ex.two_row_coarse_check(ck.get("N", 16), **kw)
    elif name == "reduction":
        sc = ex.default_reduction_scenario(grid or (64, 64), ck.get("capacity", 0.3), ck.get("order", 3))
        rep = ex.reduction_check(sc, seed, ck.get("draws", 32))
    elif name == "restriction":
        caps = ck.get("capacities", [0.2, 0.3])
        rep = ex.restriction_check(caps[0], caps[1], **kw)
    elif name == "normalization":
        scen = ex.shipped_scenarios()
        if "scenarios" in ck:
            unknown = set(ck["scenarios"]) - set(scen)
            if unknown:
                raise ConfigError(f"unknown scenarios {sorted(unknown)}")
            scen = {k: scen[k] for k in ck["scenarios"]}
        rep = ex.normalization_suite(scen)
    elif name == "monotonicity":
        raise ConfigError("run a sweep config to check monotonicity")
    else:  # pragma: no cover - schema rejects it
        raise ConfigError(f"unknown check {name!r}")
    write_json(out / "report.json", dict(rep.to_dict(), check=name))
    rep.to_csv(out / "report.csv")
    for r in rep.records:
        flag = "PASS" if r.passed else "FAIL"
        print(f"{flag} {r.check}: lhs={r.lhs:.6g} rhs={r.rhs:.6g} margin={r.margin:.3g} {r.detail}".rstrip())
    return (EXIT_OK if rep.passed else EXIT_CHECK), {}


def run_hilbert(cfg, out, threads):
    h = cfg["hilbert"]
    curve = HilbertCurve(h["d"], h["order"])
    rows = []
    exact = True
    for level in range(h["order"] + 1):
        for r in measure_report(curve, level):
            ok = r["measure_num"] * (1 << (curve.d * level)) == r["measure_den"]
            exact &= ok
            rows.append((level, " ".join(map(str, r["cell_index"])), r["measure_num"], r["measure_den"], int(ok)))
    write_csv(out / "measures.csv", ["level", "cell", "measure_num", "measure_den", "exact"], rows)
    export_curve_csv(curve, out / "curve.csv", h.get("samples", 1025))
    write_json(out / "result.json", {"kind": "hilbert", "d": curve.d, "order": curve.order,
                                     "cells": curve.n_cells, "measure_preserving": exact})
    return (EXIT_OK if exact else EXIT_CHECK), {}


COMMANDS = {"pbeval": run_pbeval, "minimize": run_minimize, "sweep": run_sweep,
            "check": run_check, "hilbert": run_hilbert}


def run(cfg: dict, out=None, threads: int = 1, command: str | None = None) -> int:
    """Execute a validated config; returns the exit status."""
    validate_config(cfg)
    kind = cfg["kind"]
    if command is not None and command != kind:
        raise ConfigError(f"config kind {kind!r} does not match subcommand {command!r}")
    out = Path(out or os.environ.get(OUT_ENV) or cfg.get("output", {}).get("dir") or f"pbcover-{kind}")
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, extra = COMMANDS[kind](cfg, out, threads)
    cfg_hash = hashlib.sha256(dumps(cfg, indent=None).encode()).hexdigest()
    write_manifest(out, kind, cfg, cfg.get("seed"),
                   dict(extra, config_sha256=cfg_hash, threads=threads, exit_status=status,
                        wall_seconds=time.perf_counter() - t0))
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="pbcover", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--backend", choices=["cython", "python"], help="force a kernel backend")
    args = ap.parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        if args.backend:
            set_backend(args.backend)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return run(cfg, args.out, args.threads, args.command)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
