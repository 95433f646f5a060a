"""The eps-dependent perturbation system on the torus.

Unknown ``u = (iota, n1, n2)``.  Written in symmetric hyperbolic form::

    A0 du/dt + A1 d1u + A2 d2u + (1/eps)(S1 d1u + S2 d2u + u_perp) = A0 F

with ``u_perp = (0, -n2, n1)``, ``A0 = diag(1/d, 1, 1)``,
``d = 1 + eps H + eps^2 iota`` and ``A1, A2`` diagonal advection by
``M + eps n``.  The same right-hand side is also available in the
direct (non-symmetrized) form, which is used as a cross-check.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import snapshot
from .errors import DomainError, NumericError, SolverAbort
from .fields import FieldSampler, Scenario, default_scenario
from .spectral import TorusGrid

DIAGNOSTIC_COLUMNS = ["time", "h4_norm", "l2_norm", "min_depth_factor", "max_abs_u"]
MONITOR_INDEX = 4.0


@dataclass
class State:
    iota: np.ndarray
    n: np.ndarray
    time: float = 0.0

    def as_array(self):
        return np.concatenate([self.iota[None], self.n])

    @classmethod
    def from_array(cls, u, time=0.0):
        return cls(u[0].copy(), u[1:].copy(), float(time))


def perp(u):
    """``u_perp = (0, -n2, n1)``."""
    return np.stack([np.zeros_like(u[0]), -u[2], u[1]])


@dataclass
class CoefficientMatrices:
    """Diagonals of ``A0, A1, A2`` and the source ``F`` at one instant.

    ``S1`` and ``S2`` are the constant permutation-like matrices coupling
    iota with n1 and n2.
    """

    a0: np.ndarray        # (3, nx, ny)
    a1: np.ndarray
    a2: np.ndarray
    source: np.ndarray    # F, (3, nx, ny)
    depth_factor: np.ndarray

    S1 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    S2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])


class Forcing:
    """Tide, depth and wind fields sampled at ``(t, theta = t/eps)``."""

    def __init__(self, sampler, eps):
        self.sampler = sampler
        self.eps = eps

    def at(self, t):
        theta = t / self.eps
        s = self.sampler
        return {
            "M": s.sample("M", t, theta),
            "gradM": s.sample("M", t, theta, "grad"),
            "H": s.sample("H", t, theta)[0],
            "gradH": s.sample("H", t, theta, "grad")[0],
            "W": s.sample("W", t, theta),
        }


def depth_factor(iota, H, eps):
    return 1.0 + eps * H + eps ** 2 * iota


def _check_depth(d, t):
    low = float(np.min(d))
    if not low > 0:
        raise DomainError(f"depth factor lost positivity (min {low:.3g}) at t={t:.6g}")
    return low


def coefficient_matrices(u, f, eps, t=0.0):
    d = depth_factor(u[0], f["H"], eps)
    _check_depth(d, t)
    v = f["M"] + eps * u[1:]
    ones = np.ones_like(d)
    a0 = np.stack([1.0 / d, ones, ones])
    a1 = np.stack([v[0] / d, v[0], v[0]])
    a2 = np.stack([v[1] / d, v[1], v[1]])
    gM, gH, n = f["gradM"], f["gradH"], u[1:]
    source = np.stack([
        -(gH[0] * n[0] + gH[1] * n[1]) - (gM[0, 0] + gM[1, 1]) * u[0],
        f["W"][0] - (gM[0, 0] * n[0] + gM[0, 1] * n[1]),
        f["W"][1] - (gM[1, 0] * n[0] + gM[1, 1] * n[1]),
    ])
    return CoefficientMatrices(a0, a1, a2, source, d)


def symmetric_rhs(grid, u, f, eps, t=0.0, dealias=True):
    """``du/dt`` from the symmetric form, solved for the time derivative."""
    c = coefficient_matrices(u, f, eps, t)
    du1, du2 = grid.gradient(u)
    s1 = np.stack([du1[1], du1[0], np.zeros_like(u[0])])
    s2 = np.stack([du2[2], np.zeros_like(u[0]), du2[0]])
    rhs = c.a0 * c.source - c.a1 * du1 - c.a2 * du2 - (s1 + s2 + perp(u)) / eps
    out = rhs / c.a0
    return grid.dealias(out) if dealias else out


def direct_rhs(grid, u, f, eps, t=0.0, dealias=True):
    """``du/dt`` from the componentwise equations (no symmetrization)."""
    iota, n = u[0], u[1:]
    _check_depth(depth_factor(iota, f["H"], eps), t)
    M, gM, H, gH, W = f["M"], f["gradM"], f["H"], f["gradH"], f["W"]
    gi = grid.gradient(iota)
    gn = np.stack([grid.gradient(n[0]), grid.gradient(n[1])])  # gn[i, j] = d_j n_i
    div_n = gn[0, 0] + gn[1, 1]
    div_M = gM[0, 0] + gM[1, 1]
    d_iota = -(gH[0] * n[0] + gH[1] * n[1] + (1.0 / eps + H) * div_n
               + gi[0] * M[0] + gi[1] * M[1] + iota * div_M
               + eps * (gi[0] * n[0] + gi[1] * n[1] + iota * div_n))
    d_n = np.empty_like(n)
    for i in range(2):
        adv_M = M[0] * gn[i, 0] + M[1] * gn[i, 1]
        stretch = gM[i, 0] * n[0] + gM[i, 1] * n[1]
        adv_n = n[0] * gn[i, 0] + n[1] * gn[i, 1]
        coriolis = -n[1] if i == 0 else n[0]
        d_n[i] = W[i] - (adv_M + stretch + eps * adv_n + (coriolis + gi[i]) / eps)
    out = np.concatenate([d_iota[None], d_n])
    return grid.dealias(out) if dealias else out


def assemble_simplified_rhs(grid, state, t, eps, sampler, form="symmetric"):
    """``d(state)/dt`` as a :class:`State` at time ``t``."""
    u = state.as_array() if isinstance(state, State) else np.asarray(state)
    f = Forcing(sampler, eps).at(t)
    rhs = symmetric_rhs if form == "symmetric" else direct_rhs
    return State.from_array(rhs(grid, u, f, eps, t), t)


def energy(grid, u, f, eps):
    """``int A0 u . u``, the weighted L2 energy of the symmetric form."""
    d = depth_factor(u[0], f["H"], eps)
    return grid.integrate(u[0] ** 2 / d + u[1] ** 2 + u[2] ** 2)


# -- time stepping ---------------------------------------------------------

class Stepper:
    """RK4 for the perturbation system with a fixed ``eps`` and field set."""

    def __init__(self, grid, sampler, eps, form="symmetric"):
        if not 0 < eps < 1:
            raise DomainError(f"eps must lie in (0, 1), got {eps}")
        self.grid = grid
        self.forcing = Forcing(sampler, eps)
        self.eps = eps
        self._rhs = symmetric_rhs if form == "symmetric" else direct_rhs

    def rhs(self, u, t):
        return self._rhs(self.grid, u, self.forcing.at(t), self.eps, t)

    def step(self, u, t, dt):
        k1 = self.rhs(u, t)
        k2 = self.rhs(u + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = self.rhs(u + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = self.rhs(u + dt * k3, t + dt)
        out = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(out)):
            raise NumericError(f"non-finite state after step at t={t + dt:.6g}")
        return out


def step_rk4(grid, state, dt, eps, sampler, form="symmetric"):
    """One classical RK4 step; raises :class:`SolverAbort` on failure."""
    u = state.as_array()
    try:
        out = Stepper(grid, sampler, eps, form).step(u, state.time, dt)
    except (NumericError, DomainError) as exc:
        raise SolverAbort(str(exc), last_state=state) from exc
    return State.from_array(out, state.time + dt)


def max_speed(sampler, T, nt=9, ntheta=16):
    """Largest ``|M|`` over a sample of slow times and phases in ``[0, T]``."""
    best = 0.0
    for t in np.linspace(0.0, T, nt):
        for theta in np.arange(ntheta) / ntheta:
            M = sampler.sample("M", t, theta)
            best = max(best, float(np.max(np.hypot(M[0], M[1]))))
    return best


def cfl_dt(grid, eps, max_M, max_n, safety=0.5):
    return safety * eps * min(grid.hx, grid.hy) / (1.0 + max_M + eps * max_n)


# -- initial data ----------------------------------------------------------

@dataclass(frozen=True)
class InitialData:
    """Smooth periodic bumps: height bump, stream bump and a small potential part.

    ``n0 = (-d2 psi, d1 psi) + grad chi`` with ``chi`` scaled so the
    gradient part is ``compressible`` (10% by default) of the stream part.
    """

    iota_amp: float = 0.5
    stream_amp: float = 0.5
    compressible: float = 0.1
    width: float = 2.0
    iota_center: tuple = (3.0, 3.0)
    stream_center: tuple = (3.5, 2.5)
    potential_center: tuple = (2.5, 3.5)

    def bump(self, grid, center):
        X1, X2 = grid.mesh
        k1, k2 = 2 * np.pi / grid.Lx, 2 * np.pi / grid.Ly
        return np.exp(self.width * (np.cos(k1 * (X1 - center[0])) + np.cos(k2 * (X2 - center[1])) - 2.0))

    def build(self, grid):
        iota = self.iota_amp * self.bump(grid, self.iota_center)
        psi = self.stream_amp * self.bump(grid, self.stream_center)
        chi = self.stream_amp * self.bump(grid, self.potential_center)
        g_psi, g_chi = grid.gradient(psi), grid.gradient(chi)
        rot = np.stack([-g_psi[1], g_psi[0]])
        scale = np.linalg.norm(rot) / max(np.linalg.norm(g_chi), 1e-300)
        n = rot + self.compressible * scale * g_chi
        u = grid.dealias(np.concatenate([iota[None], n]))
        return State.from_array(u, 0.0)


# -- runs ------------------------------------------------------------------

@dataclass(frozen=True)
class FullRunConfig:
    eps: float
    T: float
    grid: TorusGrid = TorusGrid(64, 64)
    scenario: Scenario = field(default_factory=default_scenario)
    initial: InitialData = InitialData()
    safety: float = 0.5
    output_stride: int = 10
    form: str = "symmetric"

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise DomainError(f"eps must lie in (0, 1), got {self.eps}")
        if not self.T >= 0:
            raise DomainError("end time must be non-negative")
        if not 0 < self.safety <= 1:
            raise DomainError("CFL safety factor must lie in (0, 1]")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise DomainError("output stride must be a positive integer")
        if self.form not in ("symmetric", "direct"):
            raise DomainError(f"unknown form {self.form!r}")


@dataclass
class RunResult:
    times: list
    diagnostics: list
    final: State
    dt: float
    steps: int
    aborted: bool = False
    message: str = ""
    snapshots: list = field(default_factory=list)
    energy: list = field(default_factory=list)

    def summary(self):
        h4 = [r["h4_norm"] for r in self.diagnostics]
        e = self.energy
        return {
            "aborted": self.aborted,
            "message": self.message,
            "dt": self.dt,
            "steps": self.steps,
            "final_time": self.final.time,
            "h4_initial": h4[0] if h4 else None,
            "h4_sup": max(h4) if h4 else None,
            "h4_sup_ratio": (max(h4) / h4[0]) if h4 and h4[0] > 0 else None,
            "l2_sup": max(r["l2_norm"] for r in self.diagnostics) if self.diagnostics else None,
            "energy_initial": e[0] if e else None,
            "energy_final": e[-1] if e else None,
        }


def diagnostics_row(grid, u, t, f, eps):
    return {
        "time": float(t),
        "h4_norm": grid.sobolev_norm(u, MONITOR_INDEX),
        "l2_norm": grid.sobolev_norm(u, 0.0),
        "min_depth_factor": float(np.min(depth_factor(u[0], f["H"], eps))),
        "max_abs_u": float(np.max(np.abs(u))),
    }


def run(config, observer=None, keep_snapshots=False):
    """Integrate to ``config.T`` with a fixed CFL step.

    ``observer(t, u)`` is called after every step (and at ``t = 0``) with
    the full state array; used for online pairings.  Diagnostics are
    recorded every ``output_stride`` steps and at the final time.
    """
    grid, eps = config.grid, config.eps
    sampler = FieldSampler(config.scenario, grid)
    state = config.initial.build(grid)
    u = state.as_array()
    max_M = max_speed(sampler, config.T)
    dt = cfl_dt(grid, eps, max_M, float(np.max(np.hypot(u[1], u[2]))), config.safety)
    steps = int(math.ceil(config.T / dt)) if config.T > 0 else 0
    dt = config.T / steps if steps else 0.0
    stepper = Stepper(grid, sampler, eps, config.form)

    result = RunResult([], [], state, dt, steps)

    def record(t, u):
        f = stepper.forcing.at(t)
        result.times.append(float(t))
        result.diagnostics.append(diagnostics_row(grid, u, t, f, eps))
        result.energy.append(energy(grid, u, f, eps))
        if keep_snapshots:
            result.snapshots.append((float(t), u.copy()))

    t = 0.0
    try:
        _check_depth(depth_factor(u[0], stepper.forcing.at(0.0)["H"], eps), 0.0)
        record(t, u)
        if observer is not None:
            observer(t, u)
        for k in range(1, steps + 1):
            u = stepper.step(u, t, dt)
            t = k * dt
            if observer is not None:
                observer(t, u)
            if k % config.output_stride == 0 or k == steps:
                record(t, u)
    except (NumericError, DomainError) as exc:
        result.aborted = True
        result.message = str(exc)
    result.final = State.from_array(u, t)
    result.steps = steps
    return result


def write_outputs(result, grid, out_dir):
    """Diagnostics CSV, summary JSON and any kept TSF1 snapshots."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "diagnostics.csv"), "w", newline="") as fh:
        fh.write(diagnostics_csv(result.diagnostics, DIAGNOSTIC_COLUMNS))
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    snaps = result.snapshots or [(result.final.time, result.final.as_array())]
    for i, (t, u) in enumerate(snaps):
        snapshot.write(os.path.join(out_dir, f"snap_{i:05d}.tsf"), grid, t, u)


def diagnostics_csv(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([repr(float(r[c])) for c in columns])
    return buf.getvalue()
