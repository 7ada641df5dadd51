"""Config-driven experiment runner.

Experiments are described by TOML files with a versioned `schema` field,
validated against a JSON-schema before any computation (unknown keys are
rejected).  Results are written as CSV series (fixed %.12e formatting and
fixed row order, so identical configs reproduce identical bytes), a JSON
summary with fits, tolerances and pass/fail flags, an optional pair of
plots, and a manifest recording the config hash, library versions, wall
time and artifact paths.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import jsonschema

from . import __version__
from .errors import ConfigSchemaError
from .fock import (BasisConfig, StateVector, canonical_ops, fock_state,
                   ladder_matrix, unitary_exp)
from .polynomials import PhasePolynomial, as_phase_point
from .transport import SymplecticPotential, equivalence_map
from .dynamics import CurveSpec, evolve, modified_hamiltonian, time_grid
from .diagnostics import (moment, moment_label, moment_tuples, scaling_fit,
                          observable_expectation)

CSV_FLOAT = "%.12e"

_TERM_SCHEMA = {
    "type": "object",
    "properties": {
        "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0},
                      "minItems": 2},
        "coefficient": {"type": "number"},
    },
    "required": ["exponents", "coefficient"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"type": "integer", "const": 1},
        "basis": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "cutoff": {"type": "integer", "minimum": 2},
                "hbar": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["n"],
            "additionalProperties": False,
        },
        "hamiltonian": {
            "type": "object",
            "properties": {"terms": {"type": "array", "items": _TERM_SCHEMA}},
            "required": ["terms"],
            "additionalProperties": False,
        },
        "observables": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "terms": {"type": "array", "items": _TERM_SCHEMA},
                },
                "required": ["name", "terms"],
                "additionalProperties": False,
            },
        },
        "curve": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["constant", "hamiltonian", "sampled"]},
                "start": {"type": "array", "items": {"type": "number"}},
                "points": {"type": "array",
                           "items": {"type": "array",
                                     "items": {"type": "number"}}},
                "transport_initial_from": {"type": "array",
                                           "items": {"type": "number"}},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "initial_state": {
            "type": "object",
            "properties": {
                "fock": {"oneOf": [{"type": "integer", "minimum": 0},
                                   {"type": "array",
                                    "items": {"type": "integer", "minimum": 0}}]},
                "coefficients": {"type": "array",
                                 "items": {"type": "array",
                                           "items": {"type": "number"},
                                           "minItems": 2, "maxItems": 2}},
            },
            "additionalProperties": False,
        },
        "time": {
            "type": "object",
            "properties": {
                "t0": {"type": "number"},
                "t1": {"type": "number"},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "store_every": {"type": "integer", "minimum": 1},
                "richardson": {"type": "boolean"},
            },
            "required": ["t0", "t1", "dt"],
            "additionalProperties": False,
        },
        "theta": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["default", "components"]},
                "components": {"type": "array",
                               "items": {"type": "array", "items": _TERM_SCHEMA}},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "outputs": {
            "type": "object",
            "properties": {
                "csv": {"type": "boolean"},
                "json": {"type": "boolean"},
                "plots": {"type": "boolean"},
                "moment_max_order": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "checks": {
            "type": "object",
            "properties": {
                "oscillator_reduction": {
                    "type": "object",
                    "properties": {
                        "generator_tol": {"type": "number", "exclusiveMinimum": 0},
                        "q_expectation_tol": {"type": "number",
                                              "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
                "richardson": {
                    "type": "object",
                    "properties": {
                        "expected": {"type": "number"},
                        "tolerance": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {
                "hbar_grid": {"type": "array", "minItems": 4,
                              "items": {"type": "number", "exclusiveMinimum": 0}},
                "max_moment_order": {"type": "integer", "minimum": 1,
                                     "maximum": 6},
                "t_eval": {"type": "number", "exclusiveMinimum": 0},
                "preservation_cutoff": {"type": "integer", "minimum": 2},
                "breakdown_cutoffs": {"type": "array",
                                      "items": {"type": "integer", "minimum": 2}},
                "breakdown_dts": {"type": "array",
                                  "items": {"type": "number",
                                            "exclusiveMinimum": 0}},
                "slope_margin": {"type": "number", "minimum": 0},
                "qerror_min_slope": {"type": "number"},
                "breakdown_max_slope": {"type": "number"},
            },
            "required": ["hbar_grid"],
            "additionalProperties": False,
        },
        "coherent": {
            "type": "object",
            "properties": {
                "samples": {"type": "integer", "minimum": 2},
                "min_fidelity": {"type": "number"},
                "max_phase_dev": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "required": ["schema", "basis", "hamiltonian", "time"],
    "additionalProperties": False,
}


def load_config(path) -> dict:
    """Read and schema-validate a TOML experiment config."""
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigSchemaError(f"not valid TOML: {exc}")
    validate_config(data)
    return data


def validate_config(data: dict):
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigSchemaError(f"config invalid at {path}: {exc.message}")


def config_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- builders ----------------------------------------------------------------

def build_polynomial(n: int, term_list) -> PhasePolynomial:
    try:
        return PhasePolynomial.from_term_list(n, term_list)
    except (ValueError, KeyError) as exc:
        raise ConfigSchemaError(f"bad polynomial terms: {exc}")


def build_theta(n: int, cfg: dict | None) -> SymplecticPotential:
    if cfg is None or cfg.get("kind", "default") == "default":
        return SymplecticPotential(n)
    comps = cfg.get("components")
    if comps is None or len(comps) != 2 * n:
        raise ConfigSchemaError(
            f"theta.components must list {2 * n} component polynomials"
        )
    try:
        return SymplecticPotential(
            n, tuple(build_polynomial(n, c) for c in comps)
        )
    except ValueError as exc:
        raise ConfigSchemaError(f"theta rejected: {exc}")


def build_curve(n: int, cfg: dict | None, t: np.ndarray) -> CurveSpec:
    if cfg is None:
        return CurveSpec(kind="constant", start=np.zeros(2 * n))
    kind = cfg["kind"]
    if kind == "sampled":
        pts = np.asarray(cfg.get("points", []), dtype=float)
        if pts.shape != (len(t), 2 * n):
            raise ConfigSchemaError(
                f"sampled curve needs shape ({len(t)}, {2 * n}), got {pts.shape}"
            )
        return CurveSpec(kind="sampled", points=pts)
    start = cfg.get("start")
    if start is None:
        raise ConfigSchemaError(f"curve kind {kind!r} needs a start point")
    if len(start) != 2 * n:
        raise ConfigSchemaError(
            f"curve start must have 2n = {2 * n} coordinates"
        )
    return CurveSpec(kind=kind, start=np.asarray(start, dtype=float))


def build_initial_state(basis: BasisConfig, cfg: dict | None) -> StateVector:
    if cfg is None:
        return fock_state(basis, (0,) * basis.n)
    if "coefficients" in cfg:
        pairs = np.asarray(cfg["coefficients"], dtype=float)
        vec = pairs[:, 0] + 1j * pairs[:, 1]
        if vec.shape != (basis.dim,):
            raise ConfigSchemaError(
                f"initial_state.coefficients must have length {basis.dim}"
            )
        return StateVector(basis, vec).normalized()
    label = cfg.get("fock", 0)
    try:
        return fock_state(basis, label)
    except ValueError as exc:
        raise ConfigSchemaError(f"bad initial_state.fock: {exc}")


# -- output writers ----------------------------------------------------------

def write_series_csv(path: Path, rows):
    """rows: iterable of (t, hbar, quantity, complex value)."""
    lines = ["t,hbar,quantity,real,imag"]
    for t, hb, name, val in rows:
        val = complex(val)
        lines.append(",".join([
            CSV_FLOAT % t, CSV_FLOAT % hb, name,
            CSV_FLOAT % val.real, CSV_FLOAT % val.imag,
        ]))
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _versions() -> dict:
    return {
        "phasefock": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


@dataclasses.dataclass
class RunManifest:
    config_hash: str
    command: str
    versions: dict
    wall_time_s: float
    passed: bool
    checks: dict
    artifacts: list

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _write_manifest(out_dir: Path, manifest: RunManifest):
    write_json(out_dir / "manifest.json", manifest.to_dict())


def _safe_plot(fn, path: Path, artifacts: list):
    """Plots are conveniences: record them if they render, never fail a run."""
    try:
        import matplotlib
        matplotlib.use("Agg", force=True)
        import matplotlib.pyplot as plt
        fig = plt.figure(figsize=(6.0, 4.0))
        fn(fig)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
        artifacts.append(str(path))
    except Exception as exc:  # noqa: BLE001 - plotting must never fail a run
        print(f"plotting skipped ({path.name}): {exc}", file=sys.stderr)


# -- generic run -------------------------------------------------------------

def run(config_path, out_dir, jobs: int = 1) -> RunManifest:
    """Execute a generic evolution config and write its artifacts."""
    started = time.monotonic()
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    basis_cfg = cfg["basis"]
    if "hbar" not in basis_cfg or "cutoff" not in basis_cfg:
        raise ConfigSchemaError("run requires basis.hbar and basis.cutoff")
    n = basis_cfg["n"]
    basis = BasisConfig(n=n, cutoff=basis_cfg["cutoff"], hbar=basis_cfg["hbar"])

    H = build_polynomial(n, cfg["hamiltonian"]["terms"])
    if H.n != n:
        raise ConfigSchemaError("hamiltonian dimension mismatch")
    theta = build_theta(n, cfg.get("theta"))
    tcfg = cfg["time"]
    grid = time_grid(tcfg["t0"], tcfg["t1"], tcfg["dt"])
    spec = build_curve(n, cfg.get("curve"), grid)
    psi0 = build_initial_state(basis, cfg.get("initial_state"))
    transport_from = (cfg.get("curve") or {}).get("transport_initial_from")
    if transport_from is not None:
        start = spec.start if spec.start is not None else spec.points[0]
        psi0 = equivalence_map(psi0, as_phase_point(transport_from, n), start)

    observables = [(o["name"], build_polynomial(n, o["terms"]))
                   for o in cfg.get("observables", [])]
    out_cfg = cfg.get("outputs", {})
    store_every = tcfg.get("store_every", 1)

    series, result = _evolution_series(basis, psi0, spec, H, theta, grid,
                                       observables, store_every,
                                       out_cfg.get("moment_max_order", 2))

    checks: dict = {}
    check_cfg = cfg.get("checks", {})
    if "oscillator_reduction" in check_cfg:
        checks["oscillator_reduction"] = _check_oscillator_reduction(
            check_cfg["oscillator_reduction"], basis, H, theta, spec,
            grid, result, series)
    richardson_ratio = None
    if tcfg.get("richardson", False):
        richardson_ratio = _richardson_ratio(basis, psi0, spec, H, theta,
                                             tcfg, observables)
        if "richardson" in check_cfg:
            rc = check_cfg["richardson"]
            expected = rc.get("expected", 4.0)
            tol = rc.get("tolerance", 0.5)
            checks["richardson"] = {
                "ratio": richardson_ratio,
                "passed": (richardson_ratio is not None
                           and abs(richardson_ratio - expected) <= tol),
                "expected": expected,
                "tolerance": tol,
            }

    artifacts = []
    if out_cfg.get("csv", True):
        csv_path = out / "series.csv"
        write_series_csv(csv_path, series)
        artifacts.append(str(csv_path))
    if out_cfg.get("json", True):
        summary = {
            "norm_drift_max": result.norm_drift_max,
            "tail_mass_max": result.tail_mass_max,
            "richardson_ratio": richardson_ratio,
            "checks": checks,
            "quantities": sorted({name for _, _, name, _ in series}),
        }
        spath = out / "summary.json"
        write_json(spath, summary)
        artifacts.append(str(spath))
    if out_cfg.get("plots", False):
        traj = result.trajectory
        def plot_traj(fig):
            ax = fig.subplots()
            labels = ["q", "p"] if n == 1 else None
            for col in range(2 * n):
                ax.plot(traj.times, traj.points[:, col],
                        label=labels[col] if labels else f"x{col}")
            ax.set_xlabel("t")
            ax.set_ylabel("carrier curve")
            ax.legend()
        _safe_plot(plot_traj, out / "trajectory.svg", artifacts)

    passed = all(c.get("passed", True) for c in checks.values())
    manifest = RunManifest(
        config_hash=config_hash(config_path),
        command="run",
        versions=_versions(),
        wall_time_s=round(time.monotonic() - started, 3),
        passed=passed,
        checks=checks,
        artifacts=sorted(artifacts),
    )
    _write_manifest(out, manifest)
    return manifest


def _evolution_series(basis, psi0, spec, H, theta, grid, observables,
                      store_every, moment_max_order):
    """Evolve and assemble the (t, hbar, quantity, value) row list."""
    result = evolve(psi0, spec, H, theta, grid, store_every=store_every)
    ops = canonical_ops(basis)
    tuples = moment_tuples(basis.n, moment_max_order) if moment_max_order else []
    rows = []
    traj = result.trajectory
    for k, t in enumerate(traj.times):
        state = result.state(k)
        for idx in tuples:
            rows.append((t, basis.hbar, "moment:" + moment_label(idx, basis.n),
                         moment(state, idx, ops=ops)))
        for name, f in observables:
            est = observable_expectation(state, f, traj.points[k], ops=ops)
            rows.append((t, basis.hbar, f"obs:{name}", complex(est.value)))
            rows.append((t, basis.hbar, f"obs:{name}:quantum",
                         complex(est.quantum_part)))
    return rows, result


def _check_oscillator_reduction(opts, basis, H, theta, spec, grid, result,
                                series):
    """Verify the generator reduces to (q^2 + p^2)/2 on the Hamilton curve
    and that <q> follows the rotating closed form."""
    gen_tol = opts.get("generator_tol", 1e-12)
    q_tol = opts.get("q_expectation_tol", 1e-6)
    ops = canonical_ops(basis)
    target = 0.5 * (ops[0] @ ops[0] + ops[1] @ ops[1]).matrix
    traj = result.trajectory
    worst_gen = 0.0
    for k in range(len(traj.times)):
        K = modified_hamiltonian(H, traj.points[k], traj.velocities[k],
                                 theta, basis, ops=ops)
        worst_gen = max(worst_gen, float(np.abs(K.matrix - target).max()))
    start = as_phase_point(spec.start, basis.n)
    worst_q = 0.0
    q_rows = 0
    for t, hb, name, val in series:
        if name == "obs:q":
            q_rows += 1
            ref = math.cos(t) * start[0] + math.sin(t) * start[1]
            worst_q = max(worst_q, abs(val.real - ref))
    passed = worst_gen < gen_tol and worst_q < q_tol and q_rows > 0
    return {
        "passed": bool(passed),
        "generator_deviation": worst_gen,
        "generator_tol": gen_tol,
        "q_expectation_deviation": worst_q,
        "q_expectation_tol": q_tol,
        "q_samples": q_rows,
    }


def _richardson_ratio(basis, psi0, spec, H, theta, tcfg, observables):
    """abs(v(dt) - v(dt/2)) / abs(v(dt/2) - v(dt/4)) for the first recorded
    quantity's final value; approaches 4 for a second-order scheme."""
    vals = []
    for div in (1, 2, 4):
        grid = time_grid(tcfg["t0"], tcfg["t1"], tcfg["dt"] / div)
        res = evolve(psi0, spec, H, theta, grid, store_every=len(grid))
        state = res.state(len(res.times) - 1)
        pt = res.trajectory.points[-1]
        if observables:
            vals.append(observable_expectation(
                state, observables[0][1], pt).value)
        else:
            vals.append(moment(state, (0,)).real + float(pt[0]))
    num = abs(vals[0] - vals[1])
    den = abs(vals[1] - vals[2])
    if den == 0.0:
        return None
    return float(num / den)


# -- coherent-state check ----------------------------------------------------

def coherent_state_check(config_path, out_dir) -> RunManifest:
    """Transport the over-curve oscillator solution back to the origin and
    compare with the closed-form displaced ground state.

    The closed form is exp(-it/2) exp(alpha(t) a_dag - conj(alpha(t)) a)|0>
    with alpha(t) = exp(-it) (c_q(0) + i c_p(0)) / sqrt(2 hbar), as the
    transport operator dictates for the rotating trajectory.
    """
    started = time.monotonic()
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    basis_cfg = cfg["basis"]
    if "hbar" not in basis_cfg or "cutoff" not in basis_cfg:
        raise ConfigSchemaError("coherent-check requires basis.hbar and basis.cutoff")
    if basis_cfg["n"] != 1:
        raise ConfigSchemaError("coherent-check is a single-mode experiment")
    basis = BasisConfig(n=1, cutoff=basis_cfg["cutoff"], hbar=basis_cfg["hbar"])
    H = build_polynomial(1, cfg["hamiltonian"]["terms"])
    theta = build_theta(1, cfg.get("theta"))
    tcfg = cfg["time"]
    grid = time_grid(tcfg["t0"], tcfg["t1"], tcfg["dt"])
    spec = build_curve(1, cfg.get("curve"), grid)
    if spec.kind != "hamiltonian":
        raise ConfigSchemaError("coherent-check needs a hamiltonian curve")
    state_cfg = cfg.get("initial_state", {"fock": 0})
    if state_cfg.get("fock", 0) != 0 or "coefficients" in state_cfg:
        raise ConfigSchemaError("coherent-check starts from the ground state")
    psi0 = fock_state(basis, 0)

    ccfg = cfg.get("coherent", {})
    samples = ccfg.get("samples", 9)
    min_fid = ccfg.get("min_fidelity", 1.0 - 1e-6)
    max_phase = ccfg.get("max_phase_dev", 1e-4)

    steps = len(grid) - 1
    store_every = max(1, steps // (samples - 1))
    result = evolve(psi0, spec, H, theta, grid, store_every=store_every)

    z0 = complex(spec.start[0], spec.start[1])
    a = ladder_matrix(basis.cutoff)
    ground = fock_state(basis, 0).vector
    rows = []
    worst_fid = 1.0
    worst_phase = 0.0
    traj = result.trajectory
    for k, t in enumerate(traj.times):
        back = equivalence_map(result.state(k), traj.points[k],
                               np.zeros(2))
        alpha = np.exp(-1j * t) * z0 / math.sqrt(2 * basis.hbar)
        herm = -1j * (alpha * a.conj().T - np.conj(alpha) * a)
        D = unitary_exp(basis, herm)
        ref = np.exp(-0.5j * t) * (D.matrix @ ground)
        overlap = complex(np.vdot(ref, back.vector))
        fid = abs(overlap)
        phase = abs(math.atan2(overlap.imag, overlap.real))
        worst_fid = min(worst_fid, fid)
        worst_phase = max(worst_phase, phase)
        rows.append((t, basis.hbar, "fidelity", complex(fid)))
        rows.append((t, basis.hbar, "phase_dev", complex(phase)))

    passed = worst_fid >= min_fid and worst_phase <= max_phase
    artifacts = []
    csv_path = out / "coherent.csv"
    write_series_csv(csv_path, rows)
    artifacts.append(str(csv_path))
    summary = {
        "min_fidelity": worst_fid,
        "max_phase_dev": worst_phase,
        "thresholds": {"min_fidelity": min_fid, "max_phase_dev": max_phase},
        "passed": passed,
        "z": [spec.start[0], spec.start[1]],
        "norm_drift_max": result.norm_drift_max,
        "tail_mass_max": result.tail_mass_max,
    }
    spath = out / "coherent.json"
    write_json(spath, summary)
    artifacts.append(str(spath))

    manifest = RunManifest(
        config_hash=config_hash(config_path),
        command="coherent-check",
        versions=_versions(),
        wall_time_s=round(time.monotonic() - started, 3),
        passed=passed,
        checks={"coherent": summary},
        artifacts=sorted(artifacts),
    )
    _write_manifest(out, manifest)
    return manifest


# -- scaling sweep -----------------------------------------------------------

def _preservation_point(args):
    """One hbar point of the preservation sweep (top-level for pickling)."""
    (hb, n, cutoff, H_terms, start, t0, t1, dt, max_order, store_every) = args
    H = PhasePolynomial.from_term_list(n, H_terms)
    basis = BasisConfig(n=n, cutoff=cutoff, hbar=hb)
    grid = time_grid(t0, t1, dt)
    spec = CurveSpec(kind="hamiltonian", start=np.asarray(start, dtype=float))
    psi0 = fock_state(basis, (0,) * n)
    theta = SymplecticPotential(n)
    result = evolve(psi0, spec, H, theta, grid, store_every=store_every)
    ops = canonical_ops(basis)
    final = result.state(len(result.times) - 1)
    values = {}
    for idx in moment_tuples(n, max_order):
        values[idx] = moment(final, idx, ops=ops)
    qerr = 0.0
    for k in range(len(result.times)):
        qerr = max(qerr, abs(moment(result.state(k), (0,), ops=ops).real))
    return hb, values, qerr, result.tail_mass_max, result.norm_drift_max


def _breakdown_point(args):
    """One hbar point of the fixed-base breakdown sweep."""
    (hb, n, cutoff, H_terms, start, base_point, t0, t1, dt, store_every) = args
    H = PhasePolynomial.from_term_list(n, H_terms)
    basis = BasisConfig(n=n, cutoff=cutoff, hbar=hb)
    grid = time_grid(t0, t1, dt)
    base = np.asarray(base_point, dtype=float)
    spec = CurveSpec(kind="constant", start=base)
    psi0 = fock_state(basis, (0,) * n)
    psi0 = equivalence_map(psi0, np.asarray(start, dtype=float), base)
    theta = SymplecticPotential(n)
    result = evolve(psi0, spec, H, theta, grid, store_every=store_every)
    final = result.state(len(result.times) - 1)
    value = moment(final, (0,))
    return hb, value, result.tail_mass_max, result.norm_drift_max


def theorem_sweep(config_path, out_dir, jobs: int = 1) -> RunManifest:
    """Moment-scaling sweep over hbar: the same physical state evolved over
    the Hamilton curve (moments stay microscopic, slopes near k/2) and over
    the constant curve at the origin (the first moment goes macroscopic).
    """
    started = time.monotonic()
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    sweep = cfg.get("sweep")
    if sweep is None:
        raise ConfigSchemaError("theorem-sweep requires a [sweep] section")
    hbars = [float(h) for h in sweep["hbar_grid"]]
    if any(b >= a for a, b in zip(hbars, hbars[1:])):
        raise ConfigSchemaError("sweep.hbar_grid must be strictly decreasing")

    n = cfg["basis"]["n"]
    if n != 1:
        raise ConfigSchemaError("theorem-sweep is a single-mode experiment")
    H_terms = cfg["hamiltonian"]["terms"]
    curve_cfg = cfg.get("curve") or {}
    start = curve_cfg.get("start")
    if start is None:
        raise ConfigSchemaError("theorem-sweep needs curve.start")
    tcfg = cfg["time"]
    t_eval = sweep.get("t_eval", tcfg["t1"])
    max_order = sweep.get("max_moment_order", 4)
    pres_cutoff = sweep.get("preservation_cutoff", 64)
    bd_cutoffs = sweep.get("breakdown_cutoffs", [pres_cutoff] * len(hbars))
    bd_dts = sweep.get("breakdown_dts", [tcfg["dt"]] * len(hbars))
    if len(bd_cutoffs) != len(hbars) or len(bd_dts) != len(hbars):
        raise ConfigSchemaError(
            "breakdown_cutoffs and breakdown_dts must match hbar_grid length"
        )
    margin = sweep.get("slope_margin", 0.15)
    qerr_min = sweep.get("qerror_min_slope", 0.4)
    bd_max = sweep.get("breakdown_max_slope", 0.25)
    store_every = tcfg.get("store_every", 10)

    pres_args = [(hb, n, pres_cutoff, H_terms, start, tcfg["t0"], t_eval,
                  tcfg["dt"], max_order, store_every) for hb in hbars]
    bd_args = [(hb, n, bd_cutoffs[i], H_terms, start, [0.0] * 2 * n,
                tcfg["t0"], t_eval, bd_dts[i], store_every)
               for i, hb in enumerate(hbars)]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            pres = list(pool.map(_preservation_point, pres_args))
            bd = list(pool.map(_breakdown_point, bd_args))
    else:
        pres = [_preservation_point(a) for a in pres_args]
        bd = [_breakdown_point(a) for a in bd_args]
    pres.sort(key=lambda r: -r[0])
    bd.sort(key=lambda r: -r[0])

    tuples = moment_tuples(n, max_order)
    pres_by_hbar = {r[0]: r for r in pres}
    rows = []
    fits = {}
    checks = {}
    all_passed = True
    for idx in tuples:
        label = "moment:" + moment_label(idx, n)
        vals = [pres_by_hbar[hb][1][idx] for hb in hbars]
        for hb, val in zip(hbars, vals):
            rows.append((t_eval, hb, label, val))
        fit = scaling_fit(hbars, vals)
        order = len(idx)
        bound = order / 2.0 - margin
        ok = fit.passes_at_least(bound)
        fits[label] = _fit_payload(fit, bound=bound, direction=">=", passed=ok)
        all_passed &= ok
    qerrs = [r[2] for r in pres]
    for hb, val in zip(hbars, qerrs):
        rows.append((t_eval, hb, "error:max_t|<q>-c_q|", complex(val)))
    qfit = scaling_fit(hbars, qerrs)
    qok = qfit.passes_at_least(qerr_min)
    fits["error:max_t|<q>-c_q|"] = _fit_payload(qfit, bound=qerr_min,
                                                direction=">=", passed=qok)
    all_passed &= qok

    bd_vals = [r[1] for r in bd]
    for hb, val in zip(hbars, bd_vals):
        rows.append((t_eval, hb, "breakdown:moment:q", val))
    bfit = scaling_fit(hbars, bd_vals)
    bok = bfit.passes_below(bd_max)
    fits["breakdown:moment:q"] = _fit_payload(bfit, bound=bd_max,
                                              direction="<", passed=bok)
    all_passed &= bok

    checks["preservation_and_breakdown"] = {
        "passed": bool(all_passed),
        "slope_margin": margin,
        "qerror_min_slope": qerr_min,
        "breakdown_max_slope": bd_max,
        "tail_mass_max": max(max(r[3] for r in pres), max(r[2] for r in bd)),
        "norm_drift_max": max(max(r[4] for r in pres), max(r[3] for r in bd)),
    }

    artifacts = []
    csv_path = out / "sweep.csv"
    write_series_csv(csv_path, rows)
    artifacts.append(str(csv_path))
    spath = out / "sweep_fits.json"
    write_json(spath, {"fits": fits, "checks": checks})
    artifacts.append(str(spath))

    def plot_fits(fig):
        ax = fig.subplots()
        for label in ("moment:q", "moment:qq", "breakdown:moment:q"):
            data = fits.get(label)
            if not data or data["identically_zero"]:
                continue
            ax.loglog(hbars, data["values"], "o-", label=label)
        ax.set_xlabel("hbar")
        ax.set_ylabel("|value| at t_eval")
        ax.legend()
    _safe_plot(plot_fits, out / "sweep.svg", artifacts)

    manifest = RunManifest(
        config_hash=config_hash(config_path),
        command="theorem-sweep",
        versions=_versions(),
        wall_time_s=round(time.monotonic() - started, 3),
        passed=bool(all_passed),
        checks=checks,
        artifacts=sorted(artifacts),
    )
    _write_manifest(out, manifest)
    return manifest


def _fit_payload(fit, bound, direction, passed):
    return {
        "slope": fit.slope,
        "r2": fit.r2,
        "n_used": fit.n_used,
        "identically_zero": fit.identically_zero,
        "values": [abs(v) for v in fit.values],
        "hbar_grid": list(fit.hbar_grid),
        "bound": bound,
        "direction": direction,
        "passed": bool(passed),
    }
