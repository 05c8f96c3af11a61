"""Batch front end: ``hannay-lab run | sweep | verify``.

Scenario files are JSON with ``"schema_version": 1``.  Outputs are
deterministic: floats are written with ``repr`` (shortest round trip) and
everything time-dependent lives under the summary's ``metadata`` key, which
``strip_metadata`` removes and the scenario hash never sees.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import lagrange as lg
from .dynamics import (
    DhoParams,
    PendulumParams,
    PendulumSchedule,
    dho_flow,
    hirota_invariant,
    hirota_rhs,
    integrate,
    quadratic_friction_energy,
    quadratic_friction_rhs,
)
from .errors import HannayLabError, SchemaError
from .phases import (
    adiabatic_report,
    decompose,
    filter_padding,
    integrate_window,
    pendulum_effective_phase,
    pendulum_phases,
)
from .schedules import Harmonic, ParamSchedule, SlownessSpec, schedule_from_dict
from .transforms import complex_equivalence, gho_ck_equivalence, pendulum_dho_equivalence
from .verification import SUITES, Check, run_suite

SCHEMA_VERSION = 1
MODELS = ("gho", "pendulum", "dho", "quadratic-friction", "hirota")
ANALYSES = {
    "gho": {"phases", "invariant", "equivalence"},
    "pendulum": {"phases", "invariant", "equivalence"},
    "dho": {"equivalence"},
    "quadratic-friction": {"invariant", "multipliers"},
    "hirota": {"invariant", "multipliers"},
}

_number = {"type": "number"}
_harmonic = {
    "oneOf": [
        _number,
        {
            "type": "object",
            "properties": {"mean": _number, "cos": _number, "sin": _number, "harmonic": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
    ]
}
_component = {
    "oneOf": [
        _harmonic["oneOf"][0],
        _harmonic["oneOf"][1],
        {"type": "object", "required": ["start", "slope"], "properties": {"start": _number, "slope": _number}, "additionalProperties": False},
        {"type": "array", "items": _number, "minItems": 4},
    ]
}
_pair = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}
_slow = {"epsilon": {"type": "number", "exclusiveMinimum": 0}, "tau_span": _pair}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "model", "initial_state"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "model": {"enum": list(MODELS)},
        "initial_state": _pair,
        "tolerance": {"type": "number", "minimum": 1e-14, "maximum": 1e-6},
        "t_span": _pair,
        "analyses": {"type": "array", "items": {"enum": ["phases", "invariant", "equivalence", "multipliers"]}, "uniqueItems": True},
        "schedule": {
            "type": "object",
            "required": ["family", "epsilon", "tau_span", "alpha", "beta", "gamma"],
            "properties": {
                "family": {"enum": ["constant", "linear-ramp", "trig-loop", "sampled-spline"]},
                **_slow,
                "alpha": _component,
                "beta": _component,
                "gamma": _component,
                "tau": {"type": "array", "items": _number, "minItems": 4},
                "orientation": {"enum": [1, -1]},
            },
            "additionalProperties": False,
        },
        "pendulum": {
            "type": "object",
            "required": ["m", "l", "v", "g", "epsilon", "tau_span"],
            "properties": {"m": _harmonic, "l": _harmonic, "v": _harmonic, "g": {"type": "number", "exclusiveMinimum": 0}, **_slow},
            "additionalProperties": False,
        },
        "dho": {
            "type": "object",
            "required": ["M", "lam", "Omega", "epsilon", "tau_span"],
            "properties": {"M": _harmonic, "lam": _harmonic, "Omega": _harmonic, **_slow},
            "additionalProperties": False,
        },
        "friction": {
            "type": "object",
            "required": ["b", "omega0"],
            "properties": {"b": {"type": "number", "not": {"const": 0}}, "omega0": _number, "m": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "outputs": {
            "type": "object",
            "properties": {"trajectory": {"type": "string"}, "summary": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"model": {"const": "gho"}}}, "then": {"required": ["schedule"]}},
        {"if": {"properties": {"model": {"const": "pendulum"}}}, "then": {"required": ["pendulum"]}},
        {"if": {"properties": {"model": {"const": "dho"}}}, "then": {"required": ["dho"]}},
        {"if": {"properties": {"model": {"const": "quadratic-friction"}}}, "then": {"required": ["friction", "t_span"]}},
        {"if": {"properties": {"model": {"const": "hirota"}}}, "then": {"required": ["t_span"]}},
    ],
}


# ---------------------------------------------------------------------------
# scenario handling
# ---------------------------------------------------------------------------


def _error_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = [r for r in err.validator_value if isinstance(err.instance, dict) and r not in err.instance]
        if missing:
            parts.append(missing[0])
    return ".".join(parts)


def validate_scenario(data) -> dict:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(_error_path(err), err.message)
    bad = sorted(set(data.get("analyses", [])) - ANALYSES[data["model"]])
    if bad:
        raise SchemaError("analyses", f"{bad[0]!r} is not available for model {data['model']!r}")
    return data


def load_scenario(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"{path}: not valid JSON ({exc})") from None
    return validate_scenario(data)


def scenario_hash(scenario: dict) -> str:
    canon = json.dumps(scenario, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def example_path(name: str) -> Path:
    """Path of a shipped example scenario, e.g. ``example_path("hannay_loop")``."""
    return Path(str(resources.files("hannay_lab") / "scenarios" / f"{name}.scenario"))


def strip_metadata(summary: bytes | str) -> str:
    data = json.loads(summary)
    data.pop("metadata", None)
    return json.dumps(data, indent=2, sort_keys=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------


def svg_plot(xs, ys, title: str, xlabel: str, ylabel: str, logy: bool = False, width=640, height=400) -> str:
    """A single polyline with a frame and axis labels."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if logy:
        keep = ys > 0
        xs, ys = xs[keep], np.log10(ys[keep])
    if xs.size > 4000:  # thin long trajectories; the picture does not change
        idx = np.linspace(0, xs.size - 1, 4000).astype(int)
        xs, ys = xs[idx], ys[idx]
    m = 50
    x0, x1 = (xs.min(), xs.max()) if xs.size else (0.0, 1.0)
    y0, y1 = (ys.min(), ys.max()) if ys.size else (0.0, 1.0)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    px = m + (xs - x0) / (x1 - x0) * (width - 2 * m)
    py = height - m - (ys - y0) / (y1 - y0) * (height - 2 * m)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    ylab = f"log10 {ylabel}" if logy else ylabel
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
        f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" fill="none" stroke="#888"/>\n'
        f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1" points="{pts}"/>\n'
        f'<text x="{width / 2:.0f}" y="{m / 2:.0f}" text-anchor="middle" font-size="14">{title}</text>\n'
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" font-size="12">{xlabel} [{x0:.6g}, {x1:.6g}]</text>\n'
        f'<text x="14" y="{height / 2:.0f}" font-size="12" transform="rotate(-90 14 {height / 2:.0f})" text-anchor="middle">{ylab} [{y0:.6g}, {y1:.6g}]</text>\n'
        "</svg>\n"
    )


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _slow_window(block):
    eps = float(block["epsilon"])
    tau0, tau1 = block["tau_span"]
    return eps, (tau0 / eps, tau1 / eps)


def _run_gho(sc, tol, result, plots):
    block = sc["schedule"]
    analyses = set(sc.get("analyses", []))
    _, window = _slow_window(block)
    base = schedule_from_dict(block)
    sch = schedule_from_dict(block, pad=filter_padding(base.omega_min))
    tr = integrate_window(sch, sc["initial_state"], window, tol)
    _gho_analyses(sch, tr, window, analyses, sc, tol, result, plots)
    return tr.window(*window)


def _gho_analyses(sch: ParamSchedule, tr, window, analyses, sc, tol, result, plots):
    result["integrator"] = {k: tr.metadata[k] for k in ("accepted_steps", "rejected_steps", "nfev")}
    if "phases" in analyses:
        _guard(result, "phases", lambda: decompose(tr, sch, window=window).to_dict())
    if "invariant" in analyses:
        rep = _guard(result, "invariant", lambda: adiabatic_report(tr, sch, window=window))
        if rep is not None:
            result["invariant"] = rep.digest()
            plots["invariant_vs_t.svg"] = svg_plot(rep.t, rep.invariant, "adiabatic invariant", "t", "I")
    if "equivalence" in analyses and sc["model"] == "gho":
        span = (window[0], min(window[1], window[0] + 200.0))
        _guard(result, "equivalence", lambda: complex_equivalence(sch, sc["initial_state"], span, tol).to_dict())
    w = tr.window(*window)
    plots["q_vs_t.svg"] = svg_plot(w.t, w.y[:, 0], "coordinate", "t", w.columns[0])
    p = sch.params(w.t)
    plots["loop_beta_gamma.svg"] = svg_plot(np.broadcast_to(p.beta, w.t.shape), np.broadcast_to(p.gamma, w.t.shape), "parameter path", "beta", "gamma")


def _pendulum_params(block, pad=0.0) -> PendulumParams:
    eps, (t0, t1) = _slow_window(block)
    return PendulumParams(
        m=Harmonic.coerce(block["m"]),
        l=Harmonic.coerce(block["l"]),
        v=Harmonic.coerce(block["v"]),
        g=float(block["g"]),
        slowness=SlownessSpec(eps, (t0 - pad, t1 + pad)),
    )


def _run_pendulum(sc, tol, result, plots):
    block = sc["pendulum"]
    analyses = set(sc.get("analyses", []))
    _, window = _slow_window(block)
    base = PendulumSchedule(_pendulum_params(block))
    pp = _pendulum_params(block, pad=filter_padding(base.omega_min))
    sch = PendulumSchedule(pp)
    tr = integrate_window(sch, sc["initial_state"], window, tol)
    tr.columns = ("phi", "p")
    _gho_analyses(sch, tr, window, analyses - {"equivalence"}, sc, tol, result, plots)
    if "phases" in analyses:

        def pend():
            th_d, th_g = pendulum_phases(pp, *window)
            return {"theta_d": th_d, "theta_g": th_g, "effective_phase": pendulum_effective_phase(pp, *window)}

        _guard(result, "pendulum_phases", pend)
    if "equivalence" in analyses:
        core = _pendulum_params(block)
        _guard(result, "equivalence", lambda: pendulum_dho_equivalence(core, sc["initial_state"], window, tol).to_dict())
    return tr.window(*window)


def _run_dho(sc, tol, result, plots):
    block = sc["dho"]
    eps, window = _slow_window(block)
    dp = DhoParams(
        M=Harmonic.coerce(block["M"]),
        lam=Harmonic.coerce(block["lam"]),
        Omega=Harmonic.coerce(block["Omega"]),
        slowness=SlownessSpec(eps, window),
    )
    ts = np.linspace(*window, 1000)
    om = float(np.max(np.sqrt([dp.values(t).Omega2 for t in ts])))
    tr = integrate(dho_flow(dp), [*sc["initial_state"], 0.0], window, tol, omega_max=om, columns=["q", "qdot", "Lambda"], model="dho")
    result["integrator"] = {k: tr.metadata[k] for k in ("accepted_steps", "rejected_steps", "nfev")}
    if "equivalence" in sc.get("analyses", []):
        # CK momentum at Lambda = 0 is p = M qdot
        q0, qd0 = sc["initial_state"]
        y0 = (q0, dp.values(window[0]).M * qd0)
        _guard(result, "equivalence", lambda: gho_ck_equivalence(dp, y0, window, tol).to_dict())
    plots["q_vs_t.svg"] = svg_plot(tr.t, tr.y[:, 0], "coordinate", "t", "q")
    return tr


def _run_friction(sc, tol, result, plots):
    model = sc["model"]
    analyses = set(sc.get("analyses", []))
    if model == "quadratic-friction":
        fb = sc["friction"]
        b, w0, m = float(fb["b"]), float(fb["omega0"]), float(fb.get("m", 1.0))
        rhs = lambda t, y: quadratic_friction_rhs(y, b, w0)  # noqa: E731
        conserved = lambda s: quadratic_friction_energy(s, b, w0, m)  # noqa: E731
        spec = lg.quadratic_friction(m=m, b=b, omega0=w0)
        om = abs(w0)
    else:
        rhs = lambda t, y: hirota_rhs(y)  # noqa: E731
        conserved = hirota_invariant
        spec = lg.hirota()
        om = 1.0
    tr = integrate(rhs, sc["initial_state"], tuple(sc["t_span"]), tol, omega_max=1.5 * om, columns=["q", "qdot"], model=model)
    result["integrator"] = {k: tr.metadata[k] for k in ("accepted_steps", "rejected_steps", "nfev")}
    if "invariant" in analyses:
        C = np.array([conserved(s) for s in tr.y])
        result["invariant"] = {"conserved_start": C[0], "conserved_drift": float(np.max(np.abs(C - C[0])) / abs(C[0]))}
        plots["invariant_vs_t.svg"] = svg_plot(tr.t, C, "conserved quantity", "t", "C")
    if "multipliers" in analyses:

        def mult():
            q, qd = tr.y[:, 0], tr.y[:, 1]
            qr = (float(q.min()), float(q.max()))
            vr = (float(qd.min()), float(qd.max()))
            grid = lg.sample_grid(qr, vr, tuple(sc["t_span"]))
            return {
                "multiplier_pde": lg.multiplier_residual(spec, grid).to_dict(),
                "hessian": lg.hessian_matches_multiplier(spec, grid).to_dict(),
                "euler_lagrange": lg.euler_lagrange_residual(spec, tr.t, q, qd).to_dict(),
            }

        _guard(result, "multipliers", mult)
    plots["q_vs_t.svg"] = svg_plot(tr.t, tr.y[:, 0], "coordinate", "t", "q")
    return tr


_RUNNERS = {
    "gho": _run_gho,
    "pendulum": _run_pendulum,
    "dho": _run_dho,
    "quadratic-friction": _run_friction,
    "hirota": _run_friction,
}


def _guard(result, key, fn):
    """Run one analysis; record its output or its error, never both."""
    try:
        out = fn()
    except (HannayLabError, ValueError, ArithmeticError) as exc:
        result.setdefault("errors", []).append({"analysis": key, "error": f"{type(exc).__name__}: {exc}"})
        return None
    if isinstance(out, dict):
        result[key] = out
    return out


def execute(scenario: dict, tol: float | None = None) -> tuple[dict, object, dict]:
    """Run a validated scenario; returns (summary, trajectory, svg plots)."""
    tol = float(tol if tol is not None else scenario.get("tolerance", 1e-12))
    result: dict = {
        "scenario": scenario.get("name", ""),
        "scenario_hash": scenario_hash(scenario),
        "model": scenario["model"],
        "version": __version__,
        "tolerance": tol,
    }
    plots: dict = {}
    traj = _RUNNERS[scenario["model"]](scenario, tol, result, plots)
    result.setdefault("errors", [])
    return result, traj, plots


def write_run(scenario: dict, out: Path, tol=None, plots_on=True) -> dict:
    start = time.perf_counter()
    summary, traj, plots = execute(scenario, tol)
    out.mkdir(parents=True, exist_ok=True)
    outputs = scenario.get("outputs", {})
    traj.to_csv(out / outputs.get("trajectory", "trajectory.csv"))
    if plots_on:
        for name, svg in sorted(plots.items()):
            (out / name).write_text(svg)
    summary["metadata"] = {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": round(time.perf_counter() - start, 3),
    }
    (out / outputs.get("summary", "summary.json")).write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return summary


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("epsilon", "theta_total", "theta_d", "theta_g_line", "residual", "invariant_drift", "error")


def _with_epsilon(scenario: dict, eps: float) -> dict:
    sc = json.loads(json.dumps(scenario))
    key = "schedule" if sc["model"] == "gho" else "pendulum"
    sc[key]["epsilon"] = eps
    analyses = set(sc.get("analyses", [])) | {"phases"}
    sc["analyses"] = sorted(analyses)
    return sc


def sweep_row(args) -> dict:
    scenario, eps, tol = args
    row = {"epsilon": eps}
    try:
        summary, _, _ = execute(_with_epsilon(scenario, eps), tol)
    except (HannayLabError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    ph = summary.get("phases")
    if ph is None:
        row["error"] = "; ".join(e["error"] for e in summary["errors"]) or "phases unavailable"
        return row
    row.update({k: ph[k] for k in SWEEP_COLUMNS[1:-1]})
    row["error"] = ""
    return row


def run_sweep(scenario: dict, epsilons, tol=None, jobs: int = 1) -> list[dict]:
    if len(epsilons) < 2:
        raise ValueError("at least two epsilon values required")
    if scenario["model"] not in ("gho", "pendulum"):
        raise SchemaError("model", "sweeps need a slow schedule (gho or pendulum)")
    tasks = [(scenario, float(e), tol) for e in epsilons]
    if jobs <= 1:
        return [sweep_row(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(sweep_row, tasks))  # map keeps input order


def write_sweep(rows, out: Path, plots_on=True) -> None:
    out.mkdir(parents=True, exist_ok=True)
    lines = [",".join(SWEEP_COLUMNS)]
    for r in rows:
        cells = []
        for c in SWEEP_COLUMNS:
            v = r.get(c, "")
            cells.append(repr(float(v)) if isinstance(v, (int, float)) and v is not None else f'"{v}"' if v else "")
        lines.append(",".join(cells))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    if plots_on:
        ok = [r for r in rows if not r.get("error")]
        xs = [1.0 / r["epsilon"] for r in ok]
        ys = [r["invariant_drift"] for r in ok]
        (out / "sweep_drift.svg").write_text(svg_plot(xs, ys, "invariant drift", "1/epsilon", "drift", logy=True))


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def scenario_checks(scenario: dict, tol=None) -> list[Check]:
    """Phase checks on a user scenario (closed loops get the Stokes check)."""
    summary, _, _ = execute(scenario, tol)
    rows = [Check(0, f"{e['analysis']}: {e['error']}", 1.0, 0.0, False, "error") for e in summary["errors"]]
    ph = summary.get("phases")
    if ph:
        rows.append(Check(0, "|residual| [rad]", abs(ph["residual"]), 0.05, abs(ph["residual"]) < 0.05))
        if ph["theta_g_surface"] is not None:
            gap = abs(ph["theta_g_line"] - ph["theta_g_surface"])
            rows.append(Check(0, "|theta_g_line - theta_g_surface|", gap, 1e-6, gap < 1e-6))
    return rows


def print_table(rows, stream=None) -> bool:
    stream = stream or sys.stdout
    for r in rows:
        print(r.line(), file=stream)
    ok = all(r.passed for r in rows)
    print(f"{sum(r.passed for r in rows)}/{len(rows)} checks passed", file=stream)
    return ok


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hannay-lab", description="Slowly driven oscillators: phases, invariants, equivalences.")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
        p.add_argument("--tol", type=float, default=None, help="integrator tolerance, overrides the scenario")
        p.add_argument("--plots", choices=("on", "off"), default="on")

    p = sub.add_parser("run", help="integrate a scenario and run its analyses")
    p.add_argument("scenario", type=Path)
    common(p)

    p = sub.add_parser("sweep", help="repeat a scenario over several epsilon values")
    p.add_argument("scenario", type=Path)
    p.add_argument("--epsilons", type=float, nargs="+", required=True)
    p.add_argument("--jobs", type=int, default=1)
    common(p)

    p = sub.add_parser("verify", help="run an acceptance batch and print a pass/fail table")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--scenario", type=Path, default=None, help="also check phases on this scenario")
    p.add_argument("--tol", type=float, default=None)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "run":
            sc = load_scenario(args.scenario)
            summary = write_run(sc, args.out, args.tol, args.plots == "on")
            for e in summary["errors"]:
                print(f"{args.scenario}: {e['analysis']}: {e['error']}", file=sys.stderr)
            return 1 if summary["errors"] else 0
        if args.verb == "sweep":
            sc = load_scenario(args.scenario)
            rows = run_sweep(sc, args.epsilons, args.tol, args.jobs)
            write_sweep(rows, args.out, args.plots == "on")
            failed = [r for r in rows if r.get("error")]
            for r in failed:
                print(f"{args.scenario}: epsilon={r['epsilon']!r}: {r['error']}", file=sys.stderr)
            return 1 if failed else 0
        rows = run_suite(args.suite)
        if args.scenario is not None:
            rows = rows + scenario_checks(load_scenario(args.scenario), args.tol)
        return 0 if print_table(rows) else 1
    except SchemaError as exc:
        print(f"{getattr(args, 'scenario', '')}: schema error at {exc}", file=sys.stderr)
        return 2
    except (HannayLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
