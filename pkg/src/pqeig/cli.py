"""Command-line front end.

One JSON config document drives everything; ``--set`` applies dotted-path
overrides on top of it.  Each run writes ``result.json`` (floats with 17
significant digits so reruns are byte-identical up to the timestamp),
``history.csv`` and ``eigenfunction.csv`` into the output directory; the
sweep command adds ``sweep.csv`` plus one subdirectory per cell.

Exit status: 0 success, 1 config/validation error, 2 non-convergence.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import json
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import eigensolver, picone, resonance
from .core import Params, PQError, StateVector
from .eigensolver import SolverOptions
from .mesh import Mesh, build_interval_mesh, build_rect_mesh, state_from_nodal

COMMANDS = ("eigen1", "eigen2", "picone", "classify", "resonant", "sweep", "isolation")

DEFAULT_CONFIG = {
    "command": "eigen1",
    "mesh": {"kind": "interval", "length": 1.0, "n_cells": 64},
    "params": {"p": 2.0, "q": 2.0, "alpha": 0.0},
    "solver": {},
    "nonlinearity": {"family": "zero"},
    "forcing": {"h1": {"kind": "zero"}, "h2": {"kind": "zero"}},
    "picone": {"r": 2.0, "u": {"kind": "bump"}, "v": {"kind": "bump"}, "tol": 1e-10},
    "isolation": {"lambda_min": None, "lambda_max": None, "n_grid": 10},
    "resonant": {"mode": "auto"},
    "sweep": {"p": [], "q": [], "alpha": None},
    "out_dir": "out",
    "jobs": 1,
    "seed": 0,
}


@dataclass
class Diagnostic:
    severity: str  # "error" or "warning"
    field: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.field}: {self.message}"


@dataclass
class RunConfig:
    """Typed view of the config document (raw dict kept for echoing)."""

    command: str
    mesh: Mesh
    params: Params
    solver: SolverOptions
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        cfg = merge_defaults(cfg)
        return cls(
            command=cfg["command"],
            mesh=_mesh_from_cfg(cfg["mesh"]),
            params=_params_from_cfg(cfg["params"]),
            solver=_solver_from_cfg(cfg["solver"], int(cfg.get("seed", 0))),
            raw=cfg,
        )


# ---------------------------------------------------------------------------
# config plumbing


def merge_defaults(cfg: dict) -> dict:
    out = copy.deepcopy(DEFAULT_CONFIG)
    for key, val in cfg.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key].update(val)
        else:
            out[key] = val
    return out


def apply_override(cfg: dict, dotted: str, value: str) -> None:
    """Set a dotted-path key, JSON-decoding the value when possible."""
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = parsed


def _params_from_cfg(pcfg: dict) -> Params:
    p = float(pcfg["p"])
    q = float(pcfg["q"])
    if pcfg.get("alpha") is None and pcfg.get("beta") is None:
        return Params.symmetric(p, q)
    if pcfg.get("beta") is None:
        return Params.with_beta(p, q, float(pcfg["alpha"]))
    return Params(p, q, float(pcfg["alpha"]), float(pcfg["beta"]))


def _mesh_from_cfg(mcfg: dict) -> Mesh:
    kind = mcfg.get("kind", "interval")
    if kind == "interval":
        return build_interval_mesh(float(mcfg.get("length", 1.0)), int(mcfg["n_cells"]))
    if kind == "rectangle":
        return build_rect_mesh(
            float(mcfg.get("lx", 1.0)),
            float(mcfg.get("ly", 1.0)),
            int(mcfg["nx"]),
            int(mcfg["ny"]),
        )
    raise PQError(f"unknown mesh kind {kind!r}")


def _solver_from_cfg(scfg: dict, seed: int) -> SolverOptions:
    kwargs = dict(scfg)
    kwargs.setdefault("seed", seed)
    return SolverOptions(**kwargs)


def validate(cfg: dict) -> list:
    """All config violations, without running anything.

    Errors block `run`; warnings (e.g. exponents outside the strict
    positivity range the theory assumes) do not.
    """
    cfg = merge_defaults(cfg)
    out = []

    def err(fieldname, msg):
        out.append(Diagnostic("error", fieldname, msg))

    def warn(fieldname, msg):
        out.append(Diagnostic("warning", fieldname, msg))

    if cfg["command"] not in COMMANDS:
        err("command", f"must be one of {COMMANDS}, got {cfg['command']!r}")

    mcfg = cfg["mesh"]
    kind = mcfg.get("kind", "interval")
    if kind not in ("interval", "rectangle"):
        err("mesh.kind", f"unknown mesh kind {kind!r}")
    elif kind == "interval":
        if mcfg.get("length", 1.0) <= 0:
            err("mesh.length", "length must be positive")
        if int(mcfg.get("n_cells", 0)) < 2:
            err("mesh.n_cells", "need at least 2 cells")
    else:
        if mcfg.get("lx", 1.0) <= 0 or mcfg.get("ly", 1.0) <= 0:
            err("mesh", "rectangle sides must be positive")
        if int(mcfg.get("nx", 0)) < 2 or int(mcfg.get("ny", 0)) < 2:
            err("mesh", "need nx, ny >= 2")

    try:
        params = _params_from_cfg(cfg["params"])
        if params.alpha <= 0.0 or params.beta <= 0.0:
            warn(
                "params",
                "alpha and beta are outside the strict-positivity range "
                f"(alpha={params.alpha}, beta={params.beta}); the discrete "
                "solvers still run",
            )
    except (PQError, KeyError, TypeError, ValueError) as exc:
        err("params", str(exc))

    try:
        _solver_from_cfg(cfg["solver"], int(cfg.get("seed", 0)))
    except (PQError, TypeError, ValueError) as exc:
        err("solver", str(exc))

    family = cfg["nonlinearity"].get("family", "zero")
    if family not in resonance.FAMILIES:
        err("nonlinearity.family", f"unknown family {family!r}")
    for side in ("h1", "h2"):
        kind = cfg["forcing"].get(side, {}).get("kind", "zero")
        if kind not in ("zero", "constant", "polynomial", "eigenfunction"):
            err(f"forcing.{side}.kind", f"unknown forcing kind {kind!r}")

    if cfg["command"] == "sweep":
        sw = cfg["sweep"]
        if not sw.get("p") or not sw.get("q"):
            err("sweep", "sweep requires non-empty p and q lists")

    if cfg["command"] == "picone":
        if not float(cfg["picone"].get("r", 2.0)) > 1.0:
            err("picone.r", "need r > 1")

    out_dir = cfg.get("out_dir", "out")
    parent = os.path.dirname(os.path.abspath(out_dir)) or "."
    if not os.access(parent, os.W_OK):
        err("out_dir", f"parent directory {parent!r} is not writable")
    return out


# ---------------------------------------------------------------------------
# deterministic writers


def _float_repr(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(float(x), ".17g")


def dumps_deterministic(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits, insertion order."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {dumps_deterministic(v, indent + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}  {dumps_deterministic(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float_repr(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_result_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_deterministic(payload))
        fh.write("\n")


def write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                format(float(c), ".17g") if isinstance(c, (float, np.floating)) else str(c)
                for c in row
            ]
            fh.write(",".join(cells) + "\n")


def write_history_csv(path: str, history) -> None:
    write_csv(path, ["iter", "q_value", "residual"], [list(r) for r in history])


def write_eigenfunction_csv(path: str, mesh: Mesh, z: StateVector) -> None:
    if mesh.dim == 1:
        header = ["vertex_index", "x", "u", "v"]
        rows = [
            [i, mesh.vertices[i, 0], z.u[i], z.v[i]] for i in range(mesh.n_vertices)
        ]
    else:
        header = ["vertex_index", "x", "y", "u", "v"]
        rows = [
            [i, mesh.vertices[i, 0], mesh.vertices[i, 1], z.u[i], z.v[i]]
            for i in range(mesh.n_vertices)
        ]
    write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# field/forcing construction


def _nodal_field(mesh: Mesh, fcfg: dict, pair1: Optional[StateVector]) -> np.ndarray:
    kind = fcfg.get("kind", "zero")
    x = mesh.vertices
    if kind == "zero":
        return np.zeros(mesh.n_vertices)
    if kind == "constant":
        return np.full(mesh.n_vertices, float(fcfg.get("value", 1.0)))
    if kind == "polynomial":
        vals = np.zeros(mesh.n_vertices)
        for term in fcfg.get("terms", []):
            coeff, exps = float(term[0]), term[1:]
            mono = np.full(mesh.n_vertices, coeff)
            for d, e in enumerate(exps):
                mono *= x[:, d] ** float(e)
            vals += mono
        return vals
    if kind == "eigenfunction":
        if pair1 is None:
            raise PQError("eigenfunction forcing requires a first-eigenpair solve")
        comp = fcfg.get("component", "u")
        base = pair1.u if comp == "u" else pair1.v
        return float(fcfg.get("scale", 1.0)) * np.array(base)
    raise PQError(f"unknown forcing kind {kind!r}")


def _picone_field(mesh: Mesh, fcfg: dict, eig) -> np.ndarray:
    kind = fcfg.get("kind", "bump")
    lift = float(fcfg.get("lift", 0.0))
    scale = float(fcfg.get("scale", 1.0))
    if kind == "bump":
        base = eigensolver.default_start(mesh).u
    elif kind == "eigen_u":
        base = np.array(eig.z.u)
    elif kind == "eigen_v":
        base = np.array(eig.z.v)
    else:
        raise PQError(f"unknown picone field kind {kind!r}")
    vals = scale * base
    vals[~mesh.boundary_mask] += lift
    return vals


# ---------------------------------------------------------------------------
# command pipelines


def _echo_params(params: Params) -> dict:
    return {"p": params.p, "q": params.q, "alpha": params.alpha, "beta": params.beta}


def _eigen_payload(prefix: str, res) -> dict:
    return {
        f"lambda{prefix}": res.lam,
        f"residual{prefix}": res.residual,
        f"iterations{prefix}": res.iterations,
        f"converged{prefix}": res.converged,
    }


def _run_single(cfg: dict, out_dir: str) -> int:
    rc = RunConfig.from_dict(cfg)
    command, mesh, params, opts = rc.command, rc.mesh, rc.params, rc.solver
    payload = {
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "status": "ok",
        "seed": opts.seed,
        "mesh": dict(cfg["mesh"]),
        "params": _echo_params(params),
    }
    history = []
    eigenfunction = StateVector.zeros(mesh.n_vertices)
    status = 0

    if command in ("eigen1", "eigen2", "isolation", "classify", "resonant"):
        eig1 = eigensolver.solve_lambda1(mesh, params, opts)
        payload.update(_eigen_payload("1", eig1))
        history = list(eig1.history)
        eigenfunction = eig1.z
        if not eig1.converged:
            payload["status"] = "nonconverged"
            status = 2

    if command == "eigen2" or (
        command in ("isolation", "resonant") and status == 0
    ):
        need_second = command == "eigen2" or command == "isolation" or (
            command == "resonant" and cfg["resonant"].get("mode", "auto") != "coercive"
        )
        if need_second:
            eig2 = eigensolver.solve_lambda2(mesh, params, opts, eig1)
            payload.update(_eigen_payload("2", eig2))
            signs = eigensolver.check_sign_structure(mesh, eig2.z)
            payload["sign_structure2"] = asdict(signs)
            if command == "eigen2":
                history = list(eig2.history)
                eigenfunction = eig2.z
            if not eig2.converged:
                payload["status"] = "nonconverged"
                status = 2
        else:
            eig2 = None

    if command == "picone":
        eig = None
        pcfg = cfg["picone"]
        kinds = {pcfg["u"].get("kind"), pcfg["v"].get("kind")}
        if kinds & {"eigen_u", "eigen_v"}:
            eig = eigensolver.solve_lambda1(mesh, params, opts)
        u = _picone_field(mesh, pcfg["u"], eig)
        v = _picone_field(mesh, pcfg["v"], eig)
        report = picone.verify_picone(mesh, float(pcfg["r"]), u, v, float(pcfg["tol"]))
        payload.update(report)
        eigenfunction = StateVector(u, v)

    if command in ("classify", "resonant") and status == 0:
        pair1 = resonance.normalize_eigenpair_unitnorm(mesh, params, eig1)
        fam_cfg = dict(cfg["nonlinearity"])
        family = fam_cfg.pop("family", "zero")
        spec = resonance.FAMILIES[family](**fam_cfg)
        h1 = _nodal_field(mesh, cfg["forcing"]["h1"], pair1)
        h2 = _nodal_field(mesh, cfg["forcing"]["h2"], pair1)
        report = resonance.ll_classify(mesh, params, spec, h1, h2, pair1)
        payload["regime"] = report.regime
        payload["case"] = report.case
        payload["borderline"] = report.borderline
        payload["margin"] = report.margin
        payload["ll_integrals"] = dict(report.integrals)
        payload["holds"] = {
            str(k): getattr(report, f"holds_{k}") for k in range(7, 13)
        }
        eigenfunction = pair1

        if command == "resonant":
            mode = cfg["resonant"].get("mode", "auto")
            regime = report.regime if mode == "auto" else mode
            payload["solve_regime"] = regime
            if regime == "coercive":
                sol = resonance.solve_coercive(mesh, params, spec, h1, h2, eig1, opts)
                history = [(i, jv, 0.0) for i, jv in enumerate(sol.history)]
                payload["j"] = sol.j
                payload["residual"] = sol.residual
                payload["solver_converged"] = sol.converged
                payload["start_label"] = sol.start_label
                eigenfunction = sol.z
                if not sol.converged:
                    payload["status"] = "nonconverged"
                    status = 2
            elif regime == "saddle":
                sol = resonance.solve_saddle(
                    mesh, params, spec, h1, h2, eig1, eig2, opts
                )
                history = [(i, jmax, cross) for i, jmax, cross in sol.history]
                payload["j"] = sol.j
                payload["residual"] = sol.residual
                payload["solver_converged"] = sol.converged
                payload["theta_big"] = sol.theta_big
                payload["branch_decreasing"] = sol.branch_decreasing
                payload["lambda2_cross_min"] = sol.lambda2_cross_min
                eigenfunction = sol.z
                if not sol.converged:
                    payload["status"] = "nonconverged"
                    status = 2
            else:
                payload["status"] = "no-regime"
                status = 2

    if command == "isolation" and status == 0:
        icfg = cfg["isolation"]
        lam_min = icfg.get("lambda_min")
        lam_max = icfg.get("lambda_max")
        if lam_max is None:
            lam_max = eig2.lam
        scan = eigensolver.isolation_scan(
            mesh,
            params,
            opts,
            lambda_max=float(lam_max),
            n_grid=int(icfg.get("n_grid", 10)),
            lambda_min=None if lam_min is None else float(lam_min),
            lambda1_result=eig1,
            extra_starts=(eig2.z,) if eig2 is not None else (),
        )
        payload["scan"] = [{"lambda": lam, "min_residual": res} for lam, res in scan]

    write_result_json(os.path.join(out_dir, "result.json"), payload)
    write_history_csv(os.path.join(out_dir, "history.csv"), history)
    write_eigenfunction_csv(
        os.path.join(out_dir, "eigenfunction.csv"), mesh, eigenfunction
    )
    return status


def _sweep_cells(cfg: dict) -> list:
    sw = cfg["sweep"]
    ps = list(sw["p"])
    qs = list(sw["q"])
    n = max(len(ps), len(qs))
    if len(ps) == 1:
        ps = ps * n
    if len(qs) == 1:
        qs = qs * n
    if len(ps) != len(qs):
        raise PQError("sweep.p and sweep.q must have equal length (or length 1)")
    alphas = sw.get("alpha")
    if alphas is None:
        alphas = [None] * n
    elif len(alphas) == 1:
        alphas = list(alphas) * n
    if len(alphas) != n:
        raise PQError("sweep.alpha must match the length of sweep.p")
    cells = []
    for p, q, a in zip(ps, qs, alphas):
        if a is None:
            cells.append(Params.symmetric(float(p), float(q)))
        else:
            cells.append(Params.with_beta(float(p), float(q), float(a)))
    return cells


def _run_sweep_cell(index: int, cfg: dict, params: Params, out_dir: str) -> dict:
    cell_dir = os.path.join(out_dir, f"cell_{index:03d}")
    os.makedirs(cell_dir, exist_ok=True)
    mesh = _mesh_from_cfg(cfg["mesh"])
    opts = _solver_from_cfg(cfg["solver"], int(cfg.get("seed", 0)))
    row = {
        "p": params.p,
        "q": params.q,
        "alpha": params.alpha,
        "beta": params.beta,
        "lambda1": float("nan"),
        "lambda2": float("nan"),
        "residual1": float("nan"),
        "residual2": float("nan"),
        "status": "ok",
    }
    try:
        eig1 = eigensolver.solve_lambda1(mesh, params, opts)
        row["lambda1"], row["residual1"] = eig1.lam, eig1.residual
        if not eig1.converged:
            row["status"] = "noconv1"
        else:
            eig2 = eigensolver.solve_lambda2(mesh, params, opts, eig1)
            row["lambda2"], row["residual2"] = eig2.lam, eig2.residual
            if not eig2.converged:
                row["status"] = "noconv2"
    except PQError as exc:
        row["status"] = f"error:{type(exc).__name__}"
    payload = {
        "command": "sweep-cell",
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "cell": index,
        **row,
    }
    write_result_json(os.path.join(cell_dir, "result.json"), payload)
    return row


def _run_sweep(cfg: dict, out_dir: str) -> int:
    cells = _sweep_cells(cfg)
    jobs = max(1, int(cfg.get("jobs", 1)))
    results = [None] * len(cells)
    if jobs == 1:
        for i, params in enumerate(cells):
            results[i] = _run_sweep_cell(i, cfg, params, out_dir)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_run_sweep_cell, i, cfg, params, out_dir): i
                for i, params in enumerate(cells)
            }
            for fut in concurrent.futures.as_completed(futures):
                results[futures[fut]] = fut.result()
    header = ["p", "q", "alpha", "beta", "lambda1", "lambda2", "residual1", "residual2", "status"]
    write_csv(
        os.path.join(out_dir, "sweep.csv"),
        header,
        [[row[h] for h in header] for row in results],
    )
    payload = {
        "command": "sweep",
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "status": "ok" if all(r["status"] == "ok" for r in results) else "nonconverged",
        "cells": results,
    }
    write_result_json(os.path.join(out_dir, "result.json"), payload)
    write_history_csv(os.path.join(out_dir, "history.csv"), [])
    mesh = _mesh_from_cfg(cfg["mesh"])
    write_eigenfunction_csv(
        os.path.join(out_dir, "eigenfunction.csv"), mesh, StateVector.zeros(mesh.n_vertices)
    )
    return 0 if payload["status"] == "ok" else 2


def run(cfg: dict) -> int:
    """Validate, execute and persist one configured run."""
    cfg = merge_defaults(cfg)
    diagnostics = validate(cfg)
    for diag in diagnostics:
        print(str(diag))
    if any(d.severity == "error" for d in diagnostics):
        return 1
    out_dir = cfg.get("out_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    try:
        if cfg["command"] == "sweep":
            return _run_sweep(cfg, out_dir)
        return _run_single(cfg, out_dir)
    except PQError as exc:
        print(f"error: {exc}")
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pqeig",
        description="Coupled quasilinear eigenvalue and resonance experiments",
    )
    parser.add_argument("--config", help="path to a JSON config document")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-path override, e.g. --set solver.tol_residual=1e-8",
    )
    parser.add_argument("--out-dir", help="output directory (overrides config)")
    parser.add_argument("--jobs", type=int, help="parallel sweep cells")
    parser.add_argument("--seed", type=int, help="seed override")
    args = parser.parse_args(argv)

    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: config: {exc}")
            return 1
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}")
            return 1
        key, value = item.split("=", 1)
        apply_override(cfg, key, value)
    if args.out_dir:
        cfg["out_dir"] = args.out_dir
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    if args.seed is not None:
        cfg["seed"] = args.seed
        cfg.setdefault("solver", {})["seed"] = args.seed
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
