"""Experiment workflows behind the command line: runs, sweeps and comparisons."""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fields as fieldmod
from . import full_solver, limit_solver, manufactured, regime, scales, snapshot
from .config import build_scenario
from .errors import DomainError
from .spectral import PairingAccumulator, TorusGrid

CONSTRAINT_TOL = 1e-9
SLACK = 0.10


# -- test functions --------------------------------------------------------

def _modes_on_grid(grid, modes):
    X1, X2 = grid.mesh
    out = np.zeros(grid.shape)
    for m in modes:
        p = m.kx * X1 + m.ky * X2
        out = out + m.a * np.cos(p) + m.b * np.sin(p)
    return out


def _modes_in_band(grid, modes):
    return all(abs(m.kx) < grid.nx / 3 and abs(m.ky) < grid.ny / 3 for m in modes)


@dataclass
class TestFunction:
    """``Psi(t, x) = envelope(t) * base(x)`` with ``base = (phi, -d2 phi, d1 phi)``."""

    base: np.ndarray
    T: float
    envelope: str = "bump"
    label: str = ""

    __test__ = False  # not a pytest class

    def __call__(self, t):
        if self.envelope == "none":
            return self.base
        return np.sin(np.pi * t / self.T) ** 2 * self.base


def build_test_function(grid, spec, T, label=""):
    """Realize a test-function spec on ``grid``; rejects ``Psi`` that violate the constraint form."""
    if spec.phi is not None:
        if not _modes_in_band(grid, spec.phi):
            raise DomainError("test-function modes must be resolved by the grid")
        phi = _modes_on_grid(grid, spec.phi)
        g = grid.gradient(phi)
        base = np.stack([phi, -g[1], g[0]])
    else:
        comps = [_modes_on_grid(grid, c) for c in spec.psi]
        if not all(_modes_in_band(grid, c) for c in spec.psi):
            raise DomainError("test-function modes must be resolved by the grid")
        base = np.stack(comps)
        g = grid.gradient(base[0])
        mismatch = max(float(np.max(np.abs(base[1] + g[1]))), float(np.max(np.abs(base[2] - g[0]))))
        if mismatch > CONSTRAINT_TOL:
            raise DomainError(
                "test function violates the constraint form Psi = (phi, -d2 phi, d1 phi): "
                f"components 2 and 3 differ from (-d2 Psi1, d1 Psi1) by {mismatch:.3g}")
    return TestFunction(base, T, spec.envelope, label)


def test_function_set(grid, config):
    return [build_test_function(grid, s, config.T, f"psi{i}") for i, s in enumerate(config.test_functions)]


test_function_set.__test__ = False


def trajectory_pairings(grid, times, states, psis):
    """Pairings of a stored trajectory against every test function."""
    out = []
    for psi in psis:
        acc = PairingAccumulator(grid, psi)
        for t, u in zip(times, states):
            acc.add(t, u)
        out.append(acc.value)
    return out


def relative_errors(P_eps, P0):
    P_eps, P0 = np.asarray(P_eps, dtype=float), np.asarray(P0, dtype=float)
    return (np.abs(P_eps - P0) / np.abs(P0)).tolist()


def decreasing_with_slack(seq, slack=SLACK):
    """Each value at most ``(1 + slack)`` times its predecessor."""
    return all(b <= (1.0 + slack) * a for a, b in zip(seq, seq[1:]))


# -- run helpers -------------------------------------------------------------

def _observer(accs):
    def observe(t, u):
        for a in accs:
            a.add(t, u)
    return observe


def full_config(config, eps):
    return full_solver.FullRunConfig(
        eps=eps, T=config.T, grid=config.grid.build(), scenario=build_scenario(config.scenario),
        initial=config.initial.build(), safety=config.safety, output_stride=config.output_stride)


def limit_config(config, variant):
    return limit_solver.LimitRunConfig(
        T=config.T, grid=config.grid.build(), scenario=build_scenario(config.scenario),
        initial=config.initial.build(), variant=variant, safety=config.safety,
        output_stride=config.output_stride)


def _variants(config):
    return ["literal", "curl"] if config.init_variant == "both" else [config.init_variant]


def run_digest(config, *extra):
    """Config hash including the resolved scenario content."""
    return config.digest(fieldmod.dumps(build_scenario(config.scenario)), *extra)


def run_dir(config, kind, *extra):
    path = os.path.join(config.output_dir, f"{kind}-{run_digest(config, kind, *extra)}")
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "config.json"), "w") as fh:
        json.dump(json.loads(config.canonical()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_snapshots(grid, snaps, path):
    for i, (t, u) in enumerate(snaps):
        snapshot.write(os.path.join(path, f"snap_{i:05d}.tsf"), grid, t, u)


def run_full(config, eps):
    """One full-solver run with outputs on disk; returns ``(directory, result)``."""
    fc = full_config(config, eps)
    result = full_solver.run(fc, keep_snapshots=True)
    path = run_dir(config, "full", repr(eps))
    with open(os.path.join(path, "diagnostics.csv"), "w") as fh:
        fh.write(full_solver.diagnostics_csv(result.diagnostics, full_solver.DIAGNOSTIC_COLUMNS))
    _write_snapshots(fc.grid, result.snapshots, path)
    summary = result.summary()
    summary["eps"] = eps
    _write_json(os.path.join(path, "summary.json"), summary)
    return path, result


def run_limit(config, variant):
    lc = limit_config(config, variant)
    result = limit_solver.run(lc, keep_snapshots=True)
    path = run_dir(config, "limit", variant)
    with open(os.path.join(path, "diagnostics.csv"), "w") as fh:
        fh.write(limit_solver.limit_csv(result))
    _write_snapshots(lc.grid, result.snapshots, path)
    summary = result.summary()
    summary["variant"] = variant
    _write_json(os.path.join(path, "summary.json"), summary)
    return path, result


MMS_RESOLUTIONS = (16, 32, 64)


def manufactured_table(T=0.5, steps=200, resolutions=MMS_RESOLUTIONS):
    """Max error of the limit solver on the manufactured case, per resolution."""
    case = manufactured.default_case()
    rows = []
    for n in resolutions:
        rows.append({"n": n, "error": manufactured.solve(case, TorusGrid(n, n), T, steps)})
    return rows


def run_manufactured(config):
    rows = manufactured_table()
    path = run_dir(config, "mms")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "error"])
    for r in rows:
        w.writerow([r["n"], repr(r["error"])])
    with open(os.path.join(path, "mms.csv"), "w") as fh:
        fh.write(buf.getvalue())
    return path, rows


# -- sweeps and comparison -----------------------------------------------------

def _sweep_member(args):
    """Run one eps and return its pairings; executed in a worker process."""
    config, eps = args
    grid = config.grid.build()
    psis = test_function_set(grid, config)
    accs = [PairingAccumulator(grid, p) for p in psis]
    try:
        result = full_solver.run(full_config(config, eps), observer=_observer(accs))
    except DomainError as exc:
        return {"eps": eps, "status": "failed", "message": str(exc), "pairings": None,
                "h4_initial": None, "h4_sup": None, "steps": 0}
    return {
        "eps": eps,
        "status": "failed" if result.aborted else "done",
        "message": result.message,
        "pairings": [a.value for a in accs],
        "h4_initial": result.summary()["h4_initial"],
        "h4_sup": result.summary()["h4_sup"],
        "steps": result.steps,
    }


def limit_pairings(config, variant):
    grid = config.grid.build()
    psis = test_function_set(grid, config)
    accs = [PairingAccumulator(grid, p) for p in psis]
    result = limit_solver.run(limit_config(config, variant), observer=_observer(accs))
    return [a.value for a in accs], result


def sweep(config):
    """Full-solver members for every eps, joined before returning (input order kept)."""
    jobs = [(config, e) for e in config.eps]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(jobs))) as pool:
            return list(pool.map(_sweep_member, jobs))
    return [_sweep_member(job) for job in jobs]


def build_report(config, members, limits):
    """Assemble the convergence report from sweep members and limit pairings per variant."""
    report = {"eps": list(config.eps), "T": config.T, "members": members, "variants": {}}
    for variant, P0 in limits.items():
        per_eps, errors = [], []
        for m in members:
            if m["status"] != "done":
                per_eps.append(None)
                continue
            e = relative_errors(m["pairings"], P0)
            per_eps.append(e)
            errors.append(e)
        done = [e for e in per_eps if e is not None]
        monotone = [decreasing_with_slack([e[j] for e in done]) for j in range(len(P0))]
        final = max(done[-1]) if done else None
        report["variants"][variant] = {
            "limit_pairings": list(P0),
            "relative_errors": per_eps,
            "monotone": monotone,
            "final_max_error": final,
        }
    scored = {v: r["final_max_error"] for v, r in report["variants"].items() if r["final_max_error"] is not None}
    report["best_variant"] = min(scored, key=scored.get) if scored else None
    h4 = [m["h4_sup"] for m in members if m["status"] == "done"]
    report["norm_table"] = [{"eps": m["eps"], "h4_initial": m["h4_initial"], "h4_sup": m["h4_sup"]}
                            for m in members]
    report["h4_sup_spread"] = (max(h4) / min(h4)) if h4 else None
    report["complete"] = all(m["status"] == "done" for m in members)
    return report


def compare(config):
    if len(config.eps) < 3:
        raise DomainError("comparison needs at least three eps values")
    grid = config.grid.build()
    test_function_set(grid, config)  # validate before any expensive work
    members = sweep(config)
    limits = {v: limit_pairings(config, v)[0] for v in _variants(config)}
    report = build_report(config, members, limits)
    path = run_dir(config, "compare")
    _write_json(os.path.join(path, "report.json"), report)
    with open(os.path.join(path, "errors.csv"), "w") as fh:
        fh.write(errors_csv(report))
    return path, report


def errors_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "eps", "psi", "relative_error"])
    for variant, r in report["variants"].items():
        for eps, errs in zip(report["eps"], r["relative_errors"]):
            if errs is None:
                continue
            for j, e in enumerate(errs):
                w.writerow([variant, repr(eps), j, repr(e)])
    return buf.getvalue()


# -- scale and residual reports -----------------------------------------------

def scales_report(reg, overrides=None):
    s = scales.preset(reg)
    if overrides:
        s = s.with_overrides(**overrides)
    return scales.derive_groups(s, reg)


def residual_audit(reg, config):
    """Per-term magnitudes of the regime right-hand side on the initial data."""
    groups = scales_report(reg)
    grid = config.grid.build()
    sampler = fieldmod.FieldSampler(build_scenario(config.scenario), grid)
    u = config.initial.build().build(grid).as_array()
    coeffs = scales.regime_coefficients(groups)
    terms = regime.regime_terms(grid, u, 0.0, groups.eps, sampler, coeffs)
    rows = []
    for name, arr in terms.items():
        tag = coeffs[name].tag
        rows.append({"term": name, "coefficient": coeffs[name].value, "coeff": tag.coeff,
                     "power": tag.power, "l2_norm": grid.sobolev_norm(arr, 0.0)})
    return groups, rows


def residual_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["term", "coefficient", "coeff", "power", "l2_norm"]
    w.writerow(cols)
    for r in rows:
        w.writerow([r["term"]] + [repr(float(r[c])) for c in cols[1:]])
    return buf.getvalue()
