"""Experiment runner: binds gallery operators to engine drivers under a
reproducible JSON config and writes machine-readable reports.

Exit codes: 0 converged and every certificate check passed, 1 validation or
I/O problem, 2 certification/hypothesis failure, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import engine, gallery
from .cones import (
    ConeVector,
    diff_norm,
    ConicalSegment,
    Axis,
    Grid,
    full,
    ones,
    save_csv,
    scale,
    segment_contains,
    sup_norm,
    zeros,
)
from .errors import (
    CertificationError,
    ConfigError,
    ConefixError,
    ConstructionError,
    DegenerateResultError,
    DomainError,
    IterationError,
    NonConvergenceError,
    PreconditionError,
    TheoremViolationError,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CERTIFICATION = 2
EXIT_NONCONVERGENCE = 3

_TOP_KEYS = {"operator", "driver", "tolerances", "grid", "output", "seed"}
_TOL_KEYS = {"tol", "order_tol", "floor"}
_DRIVERS = {
    "decreasing",
    "increasing",
    "general",
    "sum",
    "periodic",
    "uniqueness",
    "complement",
    "counterexample",
}
_OPERATORS = {"linf", "scalar-power", "padic", "urysohn", "heat", "tilde", "hat"}


def _reject_unknown(block: dict, known: set, where: str):
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_config(data: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "config")
    for key in ("operator", "driver"):
        if key not in data:
            raise ConfigError(f"config is missing the {key!r} block")
        block = data[key]
        if not isinstance(block, dict) or "name" not in block:
            raise ConfigError(f"{key} block needs a name")
        _reject_unknown(block, {"name", "params"}, key)
        block.setdefault("params", {})
    if data["driver"]["name"] not in _DRIVERS:
        raise ConfigError(f"unknown driver: {data['driver']['name']!r}")
    if data["operator"]["name"] not in _OPERATORS:
        raise ConfigError(f"unknown operator: {data['operator']['name']!r}")
    tols = data.setdefault("tolerances", {})
    _reject_unknown(tols, _TOL_KEYS, "tolerances")
    tols.setdefault("tol", 1e-10)
    tols.setdefault("order_tol", 1e-10)
    tols.setdefault("floor", 1e-8)
    data.setdefault("grid", None)
    data.setdefault("output", {})
    _reject_unknown(data["output"], {"dir"}, "output")
    data["output"].setdefault("dir", "conefix-out")
    data.setdefault("seed", 0)
    _validate_driver_params(data)
    data["threads"] = int(os.environ.get("CONEFIX_THREADS", "0"))
    return data


def _validate_driver_params(config: dict):
    name = config["driver"]["name"]
    params = config["driver"]["params"]
    sigma0 = params.get("sigma0")
    if name == "decreasing" and isinstance(sigma0, (int, float)):
        if not 0.0 < sigma0 < 1.0:
            raise ConfigError("sigma0 must lie in (0, 1)")
    if name == "increasing" and "r0" in params and params["r0"] <= 1.0:
        raise ConfigError("r0 must exceed 1")
    if name == "general":
        r1, r2 = params.get("r1"), params.get("r2")
        if isinstance(r1, (int, float)) and not 0.0 < r1 < 1.0:
            raise ConfigError("r1 must lie in (0, 1)")
        if isinstance(r2, (int, float)) and r2 <= 1.0:
            raise ConfigError("r2 must exceed 1")


def _build_grid(grid_cfg) -> Grid:
    if grid_cfg is None:
        raise ConfigError("this operator needs a grid block")
    _reject_unknown(grid_cfg, {"axes"}, "grid")
    axes = tuple(
        Axis(float(ax["lower"]), float(ax["upper"]), int(ax["nodes"]))
        for ax in grid_cfg["axes"]
    )
    return Grid(axes)


def _linf_grid(n: int) -> Grid:
    return Grid.line(1.0, float(n), n) if n > 1 else Grid((Axis(1.0, 1.0, 1),))


def _build_operator(config: dict):
    """Returns (handle, grid, budget_dict, payload) for the configured
    operator; payload carries the concrete object when one exists."""
    name = config["operator"]["name"]
    params = dict(config["operator"].get("params", {}))
    if name == "linf":
        n = int(params.pop("n_coords", 64))
        handle = gallery.make_linf_operator(n)
        _require_empty(params, name)
        return handle, _linf_grid(n), None, None
    if name == "scalar-power":
        handle = gallery.make_scalar_power(float(params.pop("alpha", 0.5)))
        _require_empty(params, name)
        return handle, gallery.SCALAR_GRID, None, None
    if name == "padic":
        spec = gallery.PadicSpec(
            int(params.pop("n", 1)),
            int(params.pop("p", 3)),
            tuple(float(b) for b in params.pop("betas", [1.0])),
        )
        gamma = params.pop("gamma", None)
        _require_empty(params, name)
        op = gallery.make_padic_operator(
            spec, _build_grid(config["grid"]), gamma=gamma
        )
        return op.handle, op.grid, op.budget.as_dict(), op
    if name == "urysohn":
        spec = gallery.UrysohnSpec(
            float(params.pop("eta", 1.0)), float(params.pop("alpha", 0.5))
        )
        _require_empty(params, name)
        op = gallery.make_urysohn_operator(spec, _build_grid(config["grid"]))
        return op.handle, op.grid, op.budget.as_dict(), op
    if name == "heat":
        spec = gallery.HeatSpec(float(params.pop("xi", 1.0)))
        _require_empty(params, name)
        op = gallery.make_heat_instance(spec, _build_grid(config["grid"]))
        return op.handle, op.grid, op.budget.as_dict(), op
    if name in ("tilde", "hat"):
        base_cfg = dict(params.pop("base"))
        base_cfg.setdefault("params", {})
        base_handle, base_grid, _, _ = _build_operator(
            {"operator": base_cfg, "grid": config["grid"]}
        )
        x_star = full(base_grid, float(params.pop("x_star", 1.0)))
        if name == "tilde":
            _require_empty(params, name)
            handle = gallery.make_tilde_operator(base_handle, x_star)
        else:
            lam = float(params.pop("lambda", 0.5))
            _require_empty(params, name)
            handle = gallery.make_hat_operator(base_handle, x_star, lam)
        return handle, base_grid, None, {"base": base_handle, "x_star": x_star}
    raise ConfigError(f"unknown operator: {name!r}")


def _require_empty(params: dict, where: str):
    if params:
        raise ConfigError(f"unknown operator params for {where}: {sorted(params)}")


# -- driver dispatch -------------------------------------------------------------


def _run_driver(config: dict, handle, grid, payload):
    name = config["driver"]["name"]
    params = dict(config["driver"]["params"])
    tols = config["tolerances"]
    rng = np.random.default_rng(config["seed"])
    tol = float(params.pop("tol", tols["tol"]))
    max_iter = int(params.pop("max_iter", 100_000))
    floor = tols["floor"]

    checks: dict[str, str] = {}
    extras: dict = {}
    solution = None
    cert = None
    report = None

    def mark(key, ok):
        checks[key] = "PASS" if ok else "FAIL"

    if name in ("decreasing", "increasing", "general"):
        v0 = full(grid, float(params.pop("v0", 1.0)))
        n0 = int(params.pop("n0", 1))
        num_r1, num_r2 = engine.verify_bracket(handle, v0, n0, 1, floor)
        extras["numeric_bracket"] = [num_r1, num_r2]
        mark("two_sided_bracket", True)
        if name == "decreasing":
            sigma0 = params.pop("sigma0", "auto")
            sigma0 = min(num_r1, 1.0 - 1e-12) if sigma0 == "auto" else float(sigma0)
            _require_empty(params, "driver")
            solution, cert, report = engine.solve_decreasing(
                handle, v0, n0, sigma0, tol, max_iter, floor
            )
        elif name == "increasing":
            r0 = params.pop("r0", "auto")
            r0 = max(num_r2, 1.0 + 1e-12) if r0 == "auto" else float(r0)
            _require_empty(params, "driver")
            solution, cert, report = engine.solve_increasing(
                handle, v0, n0, r0, tol, max_iter, floor
            )
        else:
            r1, r2 = params.pop("r1", "auto"), params.pop("r2", "auto")
            if r1 == "auto" or r2 == "auto":
                spec = payload.spec if payload is not None else None
                if hasattr(spec, "r1"):
                    r1, r2 = spec.r1, spec.r2
                else:
                    r1 = min(num_r1, 1.0 - 1e-9)
                    r2 = max(num_r2, 1.0 + 1e-9)
            _require_empty(params, "driver")
            solution, cert, report = engine.solve_general(
                handle, v0, n0, float(r1), float(r2), tol, max_iter, floor
            )
        mark("monotone_iteration", True)
        mark("certified_envelope", report.bracket_ok)
        mark(
            "rate_dominance",
            engine.rate_dominated(
                report.residuals, report.certified_rate, prefactor=cert.prefactor
            ),
        )
        mark("fixed_point_residual_within_tol", report.fixed_point_residual <= 10 * tol)
        _run_audits(handle, grid, solution, rng, checks, extras)

    elif name == "sum":
        c0 = float(params.pop("c0"))
        a0_cfg = params.pop("a0")
        x_star = full(grid, float(params.pop("x_star", 1.0)))
        _require_empty(params, "driver")
        a0 = _build_companion(a0_cfg)
        solution, r_star, report = engine.solve_sum(
            handle, a0, x_star, c0, tol, max_iter, rng=rng
        )
        cert = None
        extras["r_star"] = r_star
        seg = ConicalSegment(x_star, scale(r_star, x_star))
        mark("growth_envelope", segment_contains(seg, solution, tols["order_tol"]))
        mark(
            "rate_dominance",
            engine.rate_dominated(
                report.residuals,
                report.certified_rate,
                prefactor=c0 * r_star * sup_norm(x_star),
            ),
        )
        mark("return_path_certified", True)

    elif name == "periodic":
        v0 = full(grid, float(params.pop("v0", 1.0)))
        n0 = int(params.pop("n0", 1))
        m0 = int(params.pop("m0", 1))
        collapse = params.pop("collapse", None)
        _require_empty(params, "driver")
        points = engine.periodic_points(handle, v0, n0, m0, tol, max_iter, floor)
        solution = points[0]
        extras["point_norms"] = [sup_norm(p) for p in points]
        mark("periodic_points_fixed", True)
        if collapse:
            result = engine.collapse_check(
                points,
                int(collapse["i0"]),
                int(collapse["j0"]),
                float(collapse["d1"]),
                float(collapse["d2"]),
                tol,
            )
            extras["collapsed"] = result.collapsed
            extras["classes"] = [list(c) for c in result.classes]
            mark("collapse_consistent", True)

    elif name == "uniqueness":
        solve_cfg = params.pop("solve")
        r1 = float(params.pop("r1", 0.5))
        r2 = float(params.pop("r2", 2.0))
        n_starts = int(params.pop("n_starts", 8))
        probe_tol = float(params.pop("probe_tol", 1e-6))
        _require_empty(params, "driver")
        v0 = full(grid, float(solve_cfg.get("v0", 1.0)))
        n0 = int(solve_cfg.get("n0", 1))
        num_r1, _ = engine.verify_bracket(handle, v0, n0, 1, floor)
        sigma0 = solve_cfg.get("sigma0", "auto")
        sigma0 = min(num_r1, 1.0 - 1e-12) if sigma0 == "auto" else float(sigma0)
        solution, cert, report = engine.solve_decreasing(
            handle, v0, n0, sigma0, tol, max_iter, floor
        )
        probe = engine.uniqueness_probe(
            handle, solution, r1, r2, n_starts, probe_tol, rng=rng
        )
        extras["probe"] = probe.as_dict()
        mark("uniqueness_probe", bool(probe))
        if not probe:
            raise CertificationError("uniqueness probe found foreign limits")

    elif name == "complement":
        v0 = full(grid, float(params.pop("v0", 1.0)))
        n0 = int(params.pop("n0", 1))
        gamma0 = float(params.pop("gamma0"))
        alpha = float(params.pop("alpha"))
        c = float(params.pop("c", 1.0))
        _require_empty(params, "driver")
        a0 = gallery.make_complement_operator(handle, v0, n0, c)
        solution = engine.complement_fixed_point(
            handle, a0, v0, n0, gamma0, alpha, tol, max_iter, floor, rng=rng
        )
        mark("two_sided_envelope", True)
        mark("nontrivial_result", True)

    elif name == "counterexample":
        base = payload["base"]
        x_star = payload["x_star"]
        n_inside = int(params.pop("n_inside", 100))
        n_outside = int(params.pop("n_outside", 20))
        probe_tol = float(params.pop("probe_tol", 1e-6))
        _require_empty(params, "driver")
        kind = config["operator"]["name"]
        inside_ok, outside_ok = _exercise_counterexample(
            handle, base, x_star, kind, n_inside, n_outside, rng
        )
        mark("fixed_region_points_fixed", inside_ok)
        if kind == "tilde":
            mark("outside_points_moved", outside_ok)
            probe = engine.uniqueness_probe(
                handle, x_star, 0.5, 2.0, 8, probe_tol, rng=rng
            )
            extras["probe"] = probe.as_dict()
            mark("multiple_limits_witnessed", len(probe.offending_limits) >= 2)
        mono = engine.audit_monotonicity(
            handle,
            _counterexample_audit_segment(kind, x_star),
            n_pairs=100,
            rng=rng,
        )
        extras["monotonicity_audit"] = mono.as_dict()
        # concavity in the plain scaling sense; violations concentrate near
        # the fixed point, where a scaled point falls back into the fixed
        # region of the construction
        near_lo = scale(0.75, x_star) if kind == "hat" else scale(1.5, x_star)
        conc = engine.audit_concavity(
            handle,
            ConicalSegment(near_lo, scale(1.0 if kind == "hat" else 3.0, x_star)),
            n_samples=100,
            rng=rng,
            phi=lambda s: s,
        )
        extras["concavity_audit"] = conc.as_dict()
        mark("witnesses_nonmonotonicity_or_nonconcavity", not (mono.passed and conc.passed))
        solution = x_star
        if any(v == "FAIL" for v in checks.values()):
            raise CertificationError("counterexample behavior checks failed")
    else:
        raise ConfigError(f"unknown driver: {name!r}")

    return solution, cert, report, checks, extras


def _counterexample_audit_segment(kind: str, x_star: ConeVector) -> ConicalSegment:
    if kind == "hat":
        return ConicalSegment(zeros(x_star.grid), x_star)
    return ConicalSegment(zeros(x_star.grid), scale(4.0, x_star))


def _exercise_counterexample(handle, base, x_star, kind, n_inside, n_outside, rng):
    norm_star = sup_norm(x_star)
    inside_ok = True
    g = x_star.grid
    if kind == "tilde":
        for _ in range(n_inside):
            bump = (rng.uniform(size=g.size) - 0.5) * 1.98 * norm_star
            y = ConeVector(g, np.maximum(x_star.values + bump, 0.0))
            if diff_norm(handle(y), y) > 1e-12:
                inside_ok = False
        outside_ok = True
        for _ in range(n_outside):
            t = rng.uniform(2.5, 4.0)
            y = scale(t, x_star)
            if diff_norm(handle(y), y) < 1e-3:
                outside_ok = False
        return inside_ok, outside_ok
    lam = 0.5
    for _ in range(n_inside):
        u = rng.uniform(size=g.size)
        idx = rng.integers(g.size)
        u[idx] = rng.uniform(0.0, 0.45)
        y = ConeVector(g, u * x_star.values)
        if diff_norm(y, x_star) <= lam * norm_star:
            continue
        if diff_norm(handle(y), y) > 1e-12:
            inside_ok = False
    return inside_ok, True


def _build_companion(cfg: dict):
    name = cfg["name"]
    params = dict(cfg.get("params", {}))
    if name == "capped-linear":
        return gallery.make_capped_linear(
            float(params.pop("factor", 0.5)), float(params.pop("cap", 1.0))
        )
    raise ConfigError(f"unknown companion operator: {name!r}")


def _run_audits(handle, grid, solution, rng, checks, extras):
    hi = scale(2.0, solution) if sup_norm(solution) > 0 else ones(grid)
    seg = ConicalSegment(zeros(grid), hi)
    mono = engine.audit_monotonicity(handle, seg, n_pairs=25, rng=rng)
    extras["monotonicity_audit"] = mono.as_dict()
    checks["monotonicity_audit"] = "PASS" if mono.passed else "FAIL"
    if handle.profile is not None:
        conc = engine.audit_concavity(handle, seg, n_samples=25, rng=rng)
        extras["concavity_audit"] = conc.as_dict()
        checks["concavity_audit"] = "PASS" if conc.passed else "FAIL"


# -- experiment registry -----------------------------------------------------------


def builtin_names() -> list[str]:
    files = resources.files("conefix").joinpath("experiments")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_builtin(name: str) -> dict:
    path = resources.files("conefix").joinpath("experiments", f"{name}.json")
    if not path.is_file():
        raise ConfigError(f"no builtin experiment named {name!r}")
    return json.loads(path.read_text())


def _load_config_arg(arg: str) -> dict:
    path = Path(arg)
    if path.is_file():
        return json.loads(path.read_text())
    stem = arg[:-5] if arg.endswith(".json") else arg
    return load_builtin(stem)


# -- entry points ------------------------------------------------------------------


def run(config: dict, output_dir=None) -> int:
    config = load_config(config)
    out_dir = Path(output_dir or config["output"]["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    handle, grid, budget, payload = _build_operator(config)
    solution, cert, report, checks, extras = _run_driver(config, handle, grid, payload)

    doc = {
        "config": config,
        "certificate": cert.as_dict() if cert else None,
        "convergence": report.as_dict() if report else None,
        "checks": checks,
        "extras": extras,
        "budgets": budget,
    }
    (out_dir / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=2))
    with open(out_dir / "residuals.csv", "w") as fh:
        fh.write("n,residual,certified_bound\n")
        if report is not None:
            for n, r, bound in engine.residuals_rows(report):
                fh.write(f"{n},{r!r},{bound!r}\n")
    if solution is not None:
        save_csv(solution, out_dir / "solution.csv")
    if any(v == "FAIL" for v in checks.values()):
        return EXIT_CERTIFICATION
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="conefix",
        description="fixed-point experiments for monotone concave operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config (path or builtin name)")
    p_run.add_argument("config")
    p_run.add_argument("--output", default=None, help="output directory override")
    p_val = sub.add_parser("validate", help="validate a config without running it")
    p_val.add_argument("config")
    sub.add_parser("list", help="list builtin experiment names")

    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            for name in builtin_names():
                print(name)
            return EXIT_OK
        if args.command == "validate":
            load_config(_load_config_arg(args.config))
            print("OK")
            return EXIT_OK
        return run(_load_config_arg(args.config), output_dir=args.output)
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (
        CertificationError,
        PreconditionError,
        ConstructionError,
        TheoremViolationError,
        DegenerateResultError,
        IterationError,
    ) as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except (ConfigError, DomainError, ConefixError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
