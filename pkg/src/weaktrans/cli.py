"""Scenario-driven command line: JSON scenarios in, JSON + CSV reports out.

Every subcommand reads one scenario file, runs the corresponding analysis,
and writes ``<out>/<subcommand>.json`` and ``<out>/<subcommand>.csv``.  The
JSON report embeds the fully resolved scenario (defaults included) for
provenance, and all output is byte-identical across repeated runs of the
same scenario: no timestamps, no randomness, sorted keys, LF line endings.

Exit codes: 0 success, 1 unknown subcommand, 2 scenario/validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import behrens_fisher as bf
from .degeneracy import Thresholds, classify, info_regularity_scan
from .featuremap import FeatureSpec, feature_map, jacobian, spec_from_dict
from .kernel import kernel_from_dict
from .models import model_from_dict
from .quadrature import QuadConfig, QuadratureError
from .stein import SteinSpec, stein_jacobian_check, weak_stein_discrepancy
from .transversality import (
    check_componentwise,
    check_submersion,
    check_transversal_at,
    lambda_sweep,
    stratum_from_dict,
)

SUBCOMMANDS = (
    "features",
    "jacobian",
    "transversality",
    "classify",
    "sweep",
    "stein",
    "behrens-fisher",
)


class ScenarioError(Exception):
    """Validation failure; carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"scenario field '{field}': {message}")


def _require(scenario: dict, field: str):
    node = scenario
    for part in field.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ScenarioError(field, "missing")
        node = node[part]
    return node


def _theta_grid(block, field: str) -> list:
    if not isinstance(block, dict):
        raise ScenarioError(field, "must be an object with 'points' or 'axes'")
    if "points" in block:
        points = block["points"]
        if not isinstance(points, list) or not points:
            raise ScenarioError(f"{field}.points", "must be a nonempty list")
        return [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    if "axes" in block:
        axes = [np.asarray(ax, dtype=float) for ax in block["axes"]]
        if not axes or any(ax.size == 0 for ax in axes):
            raise ScenarioError(f"{field}.axes", "must be nonempty lists")
        mesh = np.meshgrid(*axes, indexing="ij")
        return list(np.stack([m.ravel() for m in mesh], axis=-1))
    raise ScenarioError(field, "needs 'points' or 'axes'")


def _load_scenario(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("(file)", str(exc)) from exc
    try:
        scenario = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"(line {exc.lineno}, column {exc.colno})", exc.msg
        ) from exc
    if not isinstance(scenario, dict):
        raise ScenarioError("(root)", "scenario must be a JSON object")
    return scenario


def _parse_common(scenario: dict):
    try:
        model = model_from_dict(_require(scenario, "model"))
    except (ValueError, TypeError) as exc:
        raise ScenarioError("model", str(exc)) from exc
    try:
        kernel = kernel_from_dict(_require(scenario, "kernel"))
    except (ValueError, TypeError, KeyError) as exc:
        raise ScenarioError("kernel", str(exc)) from exc
    try:
        cfg = QuadConfig(**scenario.get("quadrature", {}))
    except (ValueError, TypeError) as exc:
        raise ScenarioError("quadrature", str(exc)) from exc
    try:
        thresholds = Thresholds(**scenario.get("thresholds", {}))
    except TypeError as exc:
        raise ScenarioError("thresholds", str(exc)) from exc
    return model, kernel, cfg, thresholds


def _parse_features(scenario: dict, model) -> FeatureSpec:
    try:
        return spec_from_dict(_require(scenario, "features"), model)
    except (ValueError, TypeError, KeyError) as exc:
        raise ScenarioError("features", str(exc)) from exc


def _resolved(scenario: dict, model, kernel, cfg, thresholds, spec=None) -> dict:
    out = {
        "model": model.to_dict(),
        "kernel": kernel.to_dict(),
        "quadrature": dataclasses.asdict(cfg),
        "thresholds": thresholds.to_dict(),
    }
    if spec is not None:
        out["features"] = spec.to_dict()
    for key in ("grids", "stratum", "sweep", "classify", "stein", "behrens_fisher"):
        if key in scenario:
            out[key] = scenario[key]
    return out


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def _write_reports(out_dir: str, name: str, report: dict, header: list, rows: list) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonify(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / f"{name}.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def _theta_header(p: int) -> list:
    return [f"theta_{a}" for a in range(p)]


def _fmt_theta(theta) -> str:
    return ";".join(repr(float(v)) for v in theta)


def _run_features(scenario, out_dir):
    model, kernel, cfg, thresholds = _parse_common(scenario)
    spec = _parse_features(scenario, model)
    grid = _theta_grid(_require(scenario, "grids.theta"), "grids.theta")
    rows, json_rows = [], []
    for theta in grid:
        vec = feature_map(model, theta, kernel, spec, cfg)
        rows.append(list(theta) + list(vec.values))
        json_rows.append({"theta": list(theta), "features": list(vec.values)})
    report = {
        "scenario": _resolved(scenario, model, kernel, cfg, thresholds, spec),
        "rows": json_rows,
    }
    header = _theta_header(model.param_dim) + list(spec.labels)
    _write_reports(out_dir, "features", report, header, rows)


def _run_jacobian(scenario, out_dir):
    model, kernel, cfg, thresholds = _parse_common(scenario)
    spec = _parse_features(scenario, model)
    method = scenario.get("jacobian_method")
    grid = _theta_grid(_require(scenario, "grids.theta"), "grids.theta")
    rows, json_rows = [], []
    for theta in grid:
        jac = jacobian(model, theta, kernel, spec, method, cfg)
        submersive, rank_rep = check_submersion(jac, thresholds.rank_rtol)
        json_rows.append(
            {
                "theta": list(theta),
                "method": jac.method,
                "d_theta": jac.d_theta,
                "d_lambda": jac.d_lambda,
                "joint_rank": rank_rep.numerical_rank,
                "submersive": submersive,
                "marginal": rank_rep.marginal,
            }
        )
        for r in range(spec.n_features):
            rows.append(
                list(theta)
                + [spec.labels[r]]
                + list(jac.d_theta[r])
                + [jac.d_lambda[r, 0]]
            )
    report = {
        "scenario": _resolved(scenario, model, kernel, cfg, thresholds, spec),
        "rows": json_rows,
    }
    header = (
        _theta_header(model.param_dim)
        + ["feature"]
        + [f"dtheta_{a}" for a in range(model.param_dim)]
        + ["dlambda_0"]
    )
    _write_reports(out_dir, "jacobian", report, header, rows)


def _run_transversality(scenario, out_dir):
    model, kernel, cfg, thresholds = _parse_common(scenario)
    spec = _parse_features(scenario, model)
    method = scenario.get("jacobian_method")
    try:
        stratum = stratum_from_dict(_require(scenario, "stratum"))
    except (ValueError, TypeError, KeyError) as exc:
        raise ScenarioError("stratum", str(exc)) from exc
    grid = _theta_grid(_require(scenario, "grids.theta"), "grids.theta")
    rows, json_rows = [], []
    for theta in grid:
        vec = feature_map(model, theta, kernel, spec, cfg)
        residual = stratum.residual(vec.values)
        entry = {"theta": list(theta), "residual": residual}
        if residual <= 1e-4:  # close enough for the one-step Newton projection
            jac = jacobian(model, theta, kernel, spec, method, cfg)
            ok, rep = check_transversal_at(jac, stratum, vec.values, thresholds.rank_rtol)
            comp = check_componentwise(jac, stratum, vec.values, thresholds.rank_rtol)
            entry.update(
                {
                    "on_stratum": True,
                    "transversal": ok,
                    "componentwise": {
                        "theta_only": comp["theta_only"],
                        "lambda_only": comp["lambda_only"],
                        "joint": comp["joint"],
                    },
                    "rank": rep.numerical_rank,
                    "codim": stratum.codim,
                    "marginal": rep.marginal,
                }
            )
            rows.append(
                list(theta)
                + [residual, True, ok, comp["theta_only"], comp["lambda_only"], comp["joint"], rep.numerical_rank, stratum.codim]
            )
        else:
            entry.update({"on_stratum": False})
            rows.append(list(theta) + [residual, False, "", "", "", "", "", stratum.codim])
        json_rows.append(entry)
    report = {
        "scenario": _resolved(scenario, model, kernel, cfg, thresholds, spec),
        "rows": json_rows,
    }
    header = _theta_header(model.param_dim) + [
        "residual",
        "on_stratum",
        "transversal",
        "theta_only",
        "lambda_only",
        "joint",
        "rank",
        "codim",
    ]
    _write_reports(out_dir, "transversality", report, header, rows)


def _run_classify(scenario, out_dir):
    model, kernel, cfg, thresholds = _parse_common(scenario)
    spec = _parse_features(scenario, model)
    grid = _theta_grid(_require(scenario, "grids.theta"), "grids.theta")
    opts = scenario.get("classify", {})
    report_obj = classify(
        model,
        kernel,
        spec,
        grid,
        thresholds=thresholds,
        cfg=cfg,
        delta=float(opts.get("delta", 1e-6)),
        method=scenario.get("jacobian_method"),
        carleman_jmax=int(opts.get("carleman_jmax", 12)),
        jet2_points=int(opts.get("jet2_points", 3)),
    )
    # evidence table: per grid point determinant and smallest singular value
    rows = []
    scan = info_regularity_scan(model, kernel, spec, grid, scenario.get("jacobian_method"), cfg)
    for entry in scan.table:
        rows.append(list(entry))
    report = {
        "scenario": _resolved(scenario, model, kernel, cfg, thresholds, spec),
        "report": report_obj.to_dict(),
    }
    header = _theta_header(model.param_dim) + ["det_G", "sigma_min"]
    _write_reports(out_dir, "classify", report, header, rows)


def _run_sweep(scenario, out_dir):
    model, kernel, cfg, thresholds = _parse_common(scenario)
    spec = _parse_features(scenario, model)
    grid = _theta_grid(_require(scenario, "grids.theta"), "grids.theta")
    lam_values = _require(scenario, "grids.lambda")
    if not isinstance(lam_values, list) or not lam_values:
        raise ScenarioError("grids.lambda", "must be a nonempty list of kernel scales")
    sweep_block = scenario.get("sweep", {})
    indicator = sweep_block.get("indicator", "submersion_fail")
    stratum = None
    if indicator == "stratum_hit":
        try:
            stratum = stratum_from_dict(_require(scenario, "stratum"))
        except (ValueError, KeyError) as exc:
            raise ScenarioError("stratum", str(exc)) from exc
    kernels = [kernel.with_scale(float(s)) for s in lam_values]
    try:
        result = lambda_sweep(
            model,
            spec,
            kernels,
            grid,
            indicator,
            stratum=stratum,
            method=scenario.get("jacobian_method"),
            cfg=cfg,
            rank_rtol=thresholds.rank_rtol,
        )
    except ValueError as exc:
        raise ScenarioError("sweep", str(exc)) from exc
    report = {
        "scenario": _resolved(scenario, model, kernel, cfg, thresholds, spec),
        "sweep": result.to_dict(),
    }
    rows = [[r.lam, r.fraction, r.hits, r.n_points] for r in result.rows]
    _write_reports(out_dir, "sweep", report, ["lambda", "fraction", "hits", "n_points"], rows)


def _run_stein(scenario, out_dir):
    model, kernel, cfg, thresholds = _parse_common(scenario)
    block = _require(scenario, "stein")
    target = [float(v) for v in _require(scenario, "stein.target")]
    degrees = int(block.get("degrees", 3))
    spec = SteinSpec(target_theta=(target[0], target[1]), kernel=kernel, n_functions=degrees)

    json_candidates, rows = [], []
    target_model = model_from_dict({"family": "stein_gaussian_target"})
    target_disc = weak_stein_discrepancy(target_model, target, spec, cfg)
    rows.append(["target", "stein_gaussian_target", _fmt_theta(target), "", "", "", target_disc])
    json_candidates.append(
        {"kind": "target", "family": "stein_gaussian_target", "theta": target, "discrepancy": target_disc}
    )
    for cand in block.get("candidates", []):
        try:
            cand_model = model_from_dict(cand)
            cand_theta = [float(v) for v in cand["theta"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise ScenarioError("stein.candidates", str(exc)) from exc
        disc = weak_stein_discrepancy(cand_model, cand_theta, spec, cfg)
        rows.append(
            ["candidate", cand_model.family, _fmt_theta(cand_theta), "", "", "", disc]
        )
        json_candidates.append(
            {
                "kind": "candidate",
                "family": cand_model.family,
                "theta": cand_theta,
                "discrepancy": disc,
            }
        )

    zero_points = block.get("zero_points", [target])
    checks = stein_jacobian_check(
        spec, [np.asarray(p, dtype=float) for p in zero_points], cfg, thresholds.rank_rtol
    )
    json_checks = []
    for chk in checks:
        rows.append(
            [
                "zero_point",
                "stein_gaussian_target",
                _fmt_theta(chk["theta"]),
                chk["rank_report"].numerical_rank,
                chk["surjective"],
                chk["marginal"],
                chk["zero_residual"],
            ]
        )
        json_checks.append(
            {
                "theta": chk["theta"],
                "rank": chk["rank_report"].numerical_rank,
                "singular_values": chk["rank_report"].singular_values,
                "surjective": chk["surjective"],
                "marginal": chk["marginal"],
                "zero_residual": chk["zero_residual"],
            }
        )
    report = {
        "scenario": _resolved(scenario, model, kernel, cfg, thresholds),
        "dictionary": {"kind": "hermite", "degrees": degrees},
        "measure_determining": "assumed for the finite dictionary; documented, not machine-checked",
        "candidates": json_candidates,
        "zero_set_checks": json_checks,
    }
    header = ["kind", "family", "theta", "rank", "surjective", "marginal", "value"]
    _write_reports(out_dir, "stein", report, header, rows)


def _run_behrens_fisher(scenario, out_dir):
    block = _require(scenario, "behrens_fisher")
    try:
        cfg_bf = bf.BFConfig(
            mu1=float(_require(scenario, "behrens_fisher.mu1")),
            mu2=float(_require(scenario, "behrens_fisher.mu2")),
            sigma1=float(_require(scenario, "behrens_fisher.sigma1")),
            sigma2=float(_require(scenario, "behrens_fisher.sigma2")),
            s_grid=tuple(float(s) for s in block.get("s_grid", (1.0, 2.0, 5.0, 10.0, 50.0, 100.0))),
            sigma_grid=tuple(
                float(v) for v in block.get("sigma_grid", [0.5 + 0.1 * i for i in range(16)])
            ),
        )
    except ValueError as exc:
        raise ScenarioError("behrens_fisher", str(exc)) from exc
    table = bf.trade_off_table(cfg_bf)
    ref_s = cfg_bf.s_grid[0]
    w0 = bf.w0_closed_form(cfg_bf.mu1, cfg_bf.sigma1, ref_s)
    w0_u = bf.w0_unnormalised_form(cfg_bf.mu1, cfg_bf.sigma1, ref_s)
    report = {
        "scenario": {"behrens_fisher": cfg_bf.to_dict()},
        "closed_form_reference": {
            "mu": cfg_bf.mu1,
            "sigma": cfg_bf.sigma1,
            "s": ref_s,
            "w0": w0,
            "w0_without_2pi_factor": w0_u,
            "ratio": w0 / w0_u,
        },
        "rows": table,
    }
    rows = [[r["s"], r["sup_nuisance_gap"], r["signal_gap"], r["ratio"]] for r in table]
    _write_reports(
        out_dir,
        "behrens-fisher",
        report,
        ["s", "sup_nuisance_gap", "signal_gap", "ratio"],
        rows,
    )


_RUNNERS = {
    "features": _run_features,
    "jacobian": _run_jacobian,
    "transversality": _run_transversality,
    "classify": _run_classify,
    "sweep": _run_sweep,
    "stein": _run_stein,
    "behrens-fisher": _run_behrens_fisher,
}


def run(subcommand: str, scenario_path: str, out_dir: str) -> int:
    """Execute one subcommand; returns the process exit code."""
    if subcommand not in _RUNNERS:
        print(
            f"unknown subcommand {subcommand!r}; expected one of {', '.join(SUBCOMMANDS)}",
            file=sys.stderr,
        )
        return 1
    try:
        scenario = _load_scenario(scenario_path)
        _RUNNERS[subcommand](scenario, out_dir)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # domain violations surfacing from grid points (e.g. sigma <= 0)
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="weaktrans",
        description="Weak-moment feature maps, transversality diagnostics, and degeneracy reports",
    )
    parser.add_argument("subcommand", help="|".join(SUBCOMMANDS))
    parser.add_argument("--scenario", required=True, help="path to the JSON scenario file")
    parser.add_argument("--out", required=True, help="output directory for reports")
    parser.add_argument("--seed", type=int, default=0, help="reserved; all analyses are deterministic")
    args = parser.parse_args(argv)
    return run(args.subcommand, args.scenario, args.out)


if __name__ == "__main__":
    sys.exit(main())
