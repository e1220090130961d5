"""Command-line front end.

Subcommands:
    run <config.toml>          optimize and write logs/snapshots/summary
    validate <design.csv> <config.toml>
                               re-estimate P_f for a saved design
    export-mesh <config.toml>  write the mesh to a VTK file

Exit codes: 0 on success, 1 for configuration problems, 2 for runtime
failures (solver breakdowns, I/O errors during a run).
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from . import density, io, performance, reliability
from .density import HelmholtzFilter
from .fem import FemModel, SolverError
from .mesh import Mesh, build_box_cantilever, build_l_beam, build_rect_half_beam
from .optimizer import (VALIDATION_KEY, OptimizationResult, RunConfig,
                        run_optimization)
from .performance import PerformanceSpec
from .uncertainty import DistributionSpec, UncertaintyModel

OUTPUT_ROOT_ENV = "RBTOPT_OUTPUT_ROOT"


class ConfigError(Exception):
    pass


# schema: table -> key -> (expected type tuple, default); REQUIRED means no default
_REQUIRED = object()

_MESH_KEYS_COMMON = {"kind": (str, _REQUIRED), "length": ((int, float), _REQUIRED)}
_MESH_KEYS_BY_KIND = {
    "rect_half_beam": {"nx": (int, _REQUIRED), "ny": (int, _REQUIRED)},
    "l_beam": {"resolution": (int, _REQUIRED)},
    "box_cantilever": {"nx": (int, _REQUIRED), "ny": (int, _REQUIRED),
                       "nz": (int, _REQUIRED)},
}

_SCHEMA = {
    "mesh": None,  # handled specially, keys depend on kind
    "uncertainty": None,  # nested tables load/modulus/poisson
    "performance": {
        "kind": (str, _REQUIRED),
        "threshold": ((int, float), _REQUIRED),
        "p": ((int, float), 30.0),
    },
    "optimization": {
        "mode": (str, "rbto"),
        "omega_c": ((int, float), 1.0),
        "omega_v": ((int, float), 0.2),
        "kappa_f": ((int, float), 1500.0),
        "p_a": ((int, float), 1e-2),
        "conservative_target": (bool, True),
        "batch_size": (int, 10),
        "correction_every": (int, 20),
        "history_reset": (int, 50),
        "learning_rate": ((int, float), 0.075),
        "lr_decay": ((int, float), 0.0),
        "max_iterations": (int, 2000),
        "seed": (int, 0),
        "grad_mean_or_sum": (str, "mean"),
        "passive_load_elements": (bool, True),
        "early_stop": (bool, True),
        "early_stop_window": (int, 200),
        "early_stop_rtol": ((int, float), 1e-4),
    },
    "regularization": {
        "simp_q": ((int, float), 3.0),
        "void_stiffness": ((int, float), 1e-15),
        "beta": ((int, float), 8.0),
        "eta_thr": ((int, float), 0.5),
        "filter_radius": ((int, float), None),
    },
    "reliability": {
        "p_0": ((int, float), 0.1),
        "sus_samples": (int, 200),
        "validation_mc_samples": (int, 10_000),
    },
    "output": {
        "directory": (str, "rbtopt_out"),
        "snapshot_every": (int, 0),
    },
}

_DISTRIBUTION_KEYS = {
    "family": (str, _REQUIRED),
    "mean": ((int, float), _REQUIRED),
    "std": ((int, float), _REQUIRED),
}


@dataclass
class RunManifest:
    mesh: Mesh
    model: UncertaintyModel
    config: RunConfig
    output_dir: Path
    snapshot_every: int
    validation_mc_samples: int
    mode: str


def _check_keys(table: dict, schema: dict, where: str) -> dict:
    for key in table:
        if key not in schema:
            raise ConfigError(f"unknown configuration key: {where}.{key}")
    out = {}
    for key, (types, default) in schema.items():
        if key in table:
            value = table[key]
            # bool is an int subclass; keep the two apart
            if isinstance(value, bool) and types is not bool \
                    and not (isinstance(types, tuple) and bool in types):
                raise ConfigError(f"{where}.{key}: expected {types}, got bool")
            if not isinstance(value, types):
                raise ConfigError(
                    f"{where}.{key}: expected {types}, got {type(value).__name__}")
            out[key] = value
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key: {where}.{key}")
        elif default is not None:
            out[key] = default
    return out


def _build_mesh(table: dict) -> Mesh:
    kind = table.get("kind")
    if kind not in _MESH_KEYS_BY_KIND:
        raise ConfigError(
            f"mesh.kind must be one of {sorted(_MESH_KEYS_BY_KIND)}, got {kind!r}")
    schema = dict(_MESH_KEYS_COMMON)
    schema.update(_MESH_KEYS_BY_KIND[kind])
    values = _check_keys(table, schema, "mesh")
    length = float(values["length"])
    try:
        if kind == "rect_half_beam":
            return build_rect_half_beam(length, values["nx"], values["ny"])
        if kind == "l_beam":
            return build_l_beam(length, values["resolution"])
        return build_box_cantilever(length, values["nx"], values["ny"],
                                    values["nz"])
    except ValueError as exc:
        raise ConfigError(f"mesh: {exc}") from exc


def _build_uncertainty(table: dict) -> UncertaintyModel:
    specs = {}
    for name in ("load", "modulus", "poisson"):
        if name not in table:
            raise ConfigError(f"missing required table: uncertainty.{name}")
        sub = table[name]
        if not isinstance(sub, dict):
            raise ConfigError(f"uncertainty.{name} must be a table")
        vals = _check_keys(sub, _DISTRIBUTION_KEYS, f"uncertainty.{name}")
        try:
            specs[name] = DistributionSpec(vals["family"], float(vals["mean"]),
                                           float(vals["std"]))
        except ValueError as exc:
            raise ConfigError(f"uncertainty.{name}: {exc}") from exc
    for key in table:
        if key not in ("load", "modulus", "poisson"):
            raise ConfigError(f"unknown configuration key: uncertainty.{key}")
    return UncertaintyModel(specs["load"], specs["modulus"], specs["poisson"])


def load_manifest(path) -> RunManifest:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")

    for table_name in raw:
        if table_name not in _SCHEMA:
            raise ConfigError(f"unknown configuration table: {table_name}")
        if not isinstance(raw[table_name], dict):
            raise ConfigError(f"{table_name} must be a table")
    for required in ("mesh", "uncertainty", "performance"):
        if required not in raw:
            raise ConfigError(f"missing required table: {required}")

    mesh = _build_mesh(raw["mesh"])
    model = _build_uncertainty(raw["uncertainty"])
    perf_vals = _check_keys(raw["performance"], _SCHEMA["performance"],
                            "performance")
    try:
        perf = PerformanceSpec(perf_vals["kind"], float(perf_vals["threshold"]),
                               float(perf_vals["p"]))
    except ValueError as exc:
        raise ConfigError(f"performance: {exc}") from exc

    opt = _check_keys(raw.get("optimization", {}), _SCHEMA["optimization"],
                      "optimization")
    reg = _check_keys(raw.get("regularization", {}), _SCHEMA["regularization"],
                      "regularization")
    rel = _check_keys(raw.get("reliability", {}), _SCHEMA["reliability"],
                      "reliability")
    out = _check_keys(raw.get("output", {}), _SCHEMA["output"], "output")

    mode = opt["mode"]
    if mode not in ("rbto", "robust"):
        raise ConfigError(f"optimization.mode must be 'rbto' or 'robust', got {mode!r}")
    grad_flavor = opt["grad_mean_or_sum"]
    if grad_flavor not in ("mean", "sum"):
        raise ConfigError(
            f"optimization.grad_mean_or_sum must be 'mean' or 'sum', got {grad_flavor!r}")
    kappa = 0.0 if mode == "robust" else float(opt["kappa_f"])
    try:
        config = RunConfig(
            performance=perf,
            omega_c=float(opt["omega_c"]), omega_v=float(opt["omega_v"]),
            kappa_f=kappa, p_a=float(opt["p_a"]),
            conservative_target=opt["conservative_target"],
            batch_size=opt["batch_size"],
            history_reset=opt["history_reset"],
            correction_every=opt["correction_every"],
            learning_rate=float(opt["learning_rate"]),
            lr_decay=float(opt["lr_decay"]),
            max_iterations=opt["max_iterations"],
            simp_q=float(reg["simp_q"]),
            void_stiffness=float(reg["void_stiffness"]),
            beta=float(reg["beta"]), eta_thr=float(reg["eta_thr"]),
            filter_radius=None if reg.get("filter_radius") is None
            else float(reg["filter_radius"]),
            p_0=float(rel["p_0"]), sus_samples=rel["sus_samples"],
            seed=opt["seed"], grad_mean=(grad_flavor == "mean"),
            early_stop=opt["early_stop"],
            early_stop_window=opt["early_stop_window"],
            early_stop_rtol=float(opt["early_stop_rtol"]),
            passive_load_elements=opt["passive_load_elements"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    directory = Path(out["directory"])
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        directory = Path(root) / directory
    return RunManifest(mesh=mesh, model=model, config=config,
                       output_dir=directory,
                       snapshot_every=out["snapshot_every"],
                       validation_mc_samples=rel["validation_mc_samples"],
                       mode=mode)


def _validation_estimates(manifest: RunManifest, rho_t: np.ndarray):
    """Subset-simulation and crude-MC checks with run-tied random streams."""
    cfg = manifest.config
    fem_model = FemModel(manifest.mesh)
    g_eval = performance.make_g_evaluator(
        fem_model, rho_t, cfg.performance, cfg.simp_q, cfg.void_stiffness)
    sus = reliability.subset_simulation(
        g_eval, manifest.model, cfg.performance.threshold, cfg.p_0,
        cfg.sus_samples,
        seed=np.random.SeedSequence(cfg.seed, spawn_key=(VALIDATION_KEY, 0)))
    mc = reliability.monte_carlo_pf(
        g_eval, manifest.model, cfg.performance.threshold,
        manifest.validation_mc_samples,
        seed=np.random.SeedSequence(cfg.seed, spawn_key=(VALIDATION_KEY, 1)))
    return sus, mc


def _summary_dict(manifest: RunManifest, vol_frac: float, sus, mc,
                  result: Optional[OptimizationResult] = None) -> dict:
    summary = {
        "volume_fraction": vol_frac,
        "subset_pf": sus.p_f,
        "subset_levels": sus.levels,
        "mc_pf": mc.p_f,
        "mc_standard_error": mc.standard_error,
        "mc_samples": mc.samples_per_level,
        "target_pf": manifest.config.target_pf,
        "mode": manifest.mode,
    }
    if result is not None:
        summary["iterations_run"] = result.iterations_run
        summary["stop_reason"] = result.stop_reason
    return summary


def _print_summary(summary: dict) -> None:
    print(f"final volume fraction: {summary['volume_fraction']:.6f}")
    print(f"subset simulation P_f: {summary['subset_pf']:.6e} "
          f"({summary['subset_levels']} levels)")
    se = summary["mc_standard_error"]
    se_txt = f" +/- {se:.2e}" if se is not None else ""
    print(f"monte carlo P_f:       {summary['mc_pf']:.6e}{se_txt} "
          f"({summary['mc_samples']} samples)")
    print(f"target P_f:            {summary['target_pf']:.6e}")


def cmd_run(args) -> int:
    manifest = load_manifest(args.config)
    outdir = manifest.output_dir
    outdir.mkdir(parents=True, exist_ok=True)

    def snapshot(iteration, field):
        io.write_density_csv(outdir / f"density_{iteration:04d}.csv", field)
        io.write_density_vtk(outdir / f"density_{iteration:04d}.vtk",
                             manifest.mesh, field)

    result = run_optimization(manifest.mesh, manifest.model, manifest.config,
                              snapshot_hook=snapshot,
                              snapshot_every=manifest.snapshot_every)
    io.write_convergence_csv(outdir / "convergence.csv", result.log)
    io.write_density_csv(outdir / "final_design.csv", result.field)
    io.write_density_vtk(outdir / "final_design.vtk", manifest.mesh,
                         result.field)

    _, _, vol_frac = density.volume_and_gradient(manifest.mesh,
                                                 result.field.rho_t)
    sus, mc = _validation_estimates(manifest, result.field.rho_t)
    summary = _summary_dict(manifest, vol_frac, sus, mc, result)
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"run finished after {result.iterations_run} iterations "
          f"({result.stop_reason}); outputs in {outdir}")
    _print_summary(summary)
    return 0


def cmd_validate(args) -> int:
    manifest = load_manifest(args.config)
    try:
        rho, _, _ = io.read_density_csv(args.design)
    except FileNotFoundError:
        raise ConfigError(f"design file not found: {args.design}")
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"could not read design file {args.design}: {exc}")
    if rho.shape[0] != manifest.mesh.n_elements:
        raise ConfigError(
            f"design has {rho.shape[0]} densities, mesh has "
            f"{manifest.mesh.n_elements} elements")
    cfg = manifest.config
    flt = HelmholtzFilter(manifest.mesh, cfg.filter_radius)
    state = density.evaluate_chain(flt, rho, cfg.beta, cfg.eta_thr)
    _, _, vol_frac = density.volume_and_gradient(manifest.mesh, state.rho_t)
    sus, mc = _validation_estimates(manifest, state.rho_t)
    _print_summary(_summary_dict(manifest, vol_frac, sus, mc))
    return 0


def cmd_export_mesh(args) -> int:
    manifest = load_manifest(args.config)
    outdir = manifest.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "mesh.vtk"
    io.write_vtk(path, manifest.mesh,
                 [("volume", manifest.mesh.volumes)])
    print(f"mesh written to {path} ({manifest.mesh.n_nodes} nodes, "
          f"{manifest.mesh.n_elements} elements)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbtopt",
        description="reliability-constrained topology optimization")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an optimization from a TOML config")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)
    p_val = sub.add_parser("validate",
                           help="re-estimate failure probability of a design")
    p_val.add_argument("design")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)
    p_exp = sub.add_parser("export-mesh", help="write the mesh as legacy VTK")
    p_exp.add_argument("config")
    p_exp.set_defaults(func=cmd_export_mesh)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
