"""The eps-free limit model for the stream function ``I``.

The prognostic variable is ``q = (1 - Laplacian) I``; ``I`` is recovered by
Helmholtz inversion after every stage and the velocity is
``N = (-d2 I, d1 I)``.  With theta-averaged coefficients ``M``, ``H``,
``W`` the evolution reads::

    dq/dt = d2 W1 - d1 W2 - [ M . grad I
              - d1(M1 d11 I) - d1(M2 d12 I) - d2(M1 d12 I) - d2(M2 d22 I)
              - (grad H)_perp . grad I + (div M) I
              + d1(d1M2 d2I) - d1(d2M2 d1I) - d2(d1M1 d2I) + d2(d2M1 d1I) ]

with ``(a, b)_perp = (-b, a)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError, SolverAbort
from .fields import FieldSampler, Scenario, default_scenario
from .full_solver import InitialData, diagnostics_csv
from .spectral import TorusGrid

INIT_VARIANTS = ("literal", "curl")
DIAGNOSTIC_COLUMNS = ["time", "h4_norm", "l2_norm", "q_l2", "div_residual",
                      "constraint_residual", "helmholtz_residual"]


@dataclass
class StreamState:
    I: np.ndarray
    q: np.ndarray
    time: float = 0.0

    @classmethod
    def from_q(cls, grid, q, time=0.0):
        return cls(grid.helmholtz_inverse(q), np.array(q, dtype=float), float(time))


@dataclass
class AveragedCoeffs:
    """Theta-averaged ``M``, ``H``, ``W`` and the derivatives the limit model uses."""

    M: np.ndarray       # (2, nx, ny)
    grad_M: np.ndarray  # (2, 2, nx, ny), grad_M[i, j] = d_j M_i
    H: np.ndarray
    grad_H: np.ndarray  # (2, nx, ny)
    W: np.ndarray
    curl_W: np.ndarray  # d2 W1 - d1 W2

    @classmethod
    def from_sampler(cls, sampler, t):
        gW = sampler.average("W", t, "grad")
        return cls(
            M=sampler.average("M", t),
            grad_M=sampler.average("M", t, "grad"),
            H=sampler.average("H", t)[0],
            grad_H=sampler.average("H", t, "grad")[0],
            W=sampler.average("W", t),
            curl_W=gW[0, 1] - gW[1, 0],
        )


def init_from_perturbation(grid, iota0, n0, variant="literal"):
    """Initial ``q`` from perturbation data.

    ``literal``: ``q0 = iota0 + d1 n1 - d2 n2``.
    ``curl``: ``q0 = iota0 - d1 n2 + d2 n1``, the combination left invariant
    by the fast dynamics.
    """
    iota0, n0 = grid.check(iota0), grid.check(n0)
    if n0.shape != (2,) + grid.shape:
        raise DomainError(f"velocity shape {n0.shape} does not match grid {grid.shape}")
    if variant == "literal":
        q0 = iota0 + grid.ddx(n0[0]) - grid.ddy(n0[1])
    elif variant == "curl":
        q0 = iota0 - grid.ddx(n0[1]) + grid.ddy(n0[0])
    else:
        raise DomainError(f"unknown init variant {variant!r}, expected one of {INIT_VARIANTS}")
    return StreamState.from_q(grid, q0, 0.0)


def assemble_limit_rhs(grid, q, coeffs, dealias=True):
    """``dq/dt`` for the limit model (``q`` array or :class:`StreamState`)."""
    if isinstance(q, StreamState):
        q = q.q
    I = grid.helmholtz_inverse(q)
    I1, I2 = grid.gradient(I)
    I11, I12 = grid.gradient(I1)
    I22 = grid.ddy(I2)
    M1, M2 = coeffs.M
    g = coeffs.grad_M
    gH = coeffs.grad_H
    d1, d2 = grid.ddx, grid.ddy
    bracket = (
        M1 * I1 + M2 * I2
        - d1(M1 * I11) - d1(M2 * I12) - d2(M1 * I12) - d2(M2 * I22)
        - (-gH[1] * I1 + gH[0] * I2)
        + (g[0, 0] + g[1, 1]) * I
        + d1(g[1, 0] * I2) - d1(g[1, 1] * I1) - d2(g[0, 0] * I2) + d2(g[0, 1] * I1)
    )
    out = coeffs.curl_W - bracket
    return grid.dealias(out) if dealias else out


def reconstruct_N(grid, state):
    """``N = (-d2 I, d1 I)``."""
    I = state.I if isinstance(state, StreamState) else state
    g = grid.gradient(I)
    return np.stack([-g[1], g[0]])


def constraint_residuals(grid, I, N):
    """``(||div N||_0, ||N_perp + grad I||_0)``."""
    div = grid.ddx(N[0]) + grid.ddy(N[1])
    g = grid.gradient(I)
    r = np.stack([-N[1] + g[0], N[0] + g[1]])
    return grid.sobolev_norm(div, 0.0), grid.sobolev_norm(r, 0.0)


class LimitStepper:
    """RK4 on ``q``; coefficients re-sampled at each stage time.

    ``source(t)``, if given, is added to ``dq/dt`` (manufactured solutions).
    """

    def __init__(self, grid, sampler, source=None):
        self.grid = grid
        self.sampler = sampler
        self.source = source

    def rhs(self, q, t):
        out = assemble_limit_rhs(self.grid, q, AveragedCoeffs.from_sampler(self.sampler, t))
        if self.source is not None:
            out = out + self.source(t)
        return out

    def step(self, q, t, dt):
        k1 = self.rhs(q, t)
        k2 = self.rhs(q + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = self.rhs(q + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = self.rhs(q + dt * k3, t + dt)
        out = q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(out)):
            raise NumericError(f"non-finite limit state at t={t + dt:.6g}")
        return out


def step(grid, state, dt, sampler, source=None):
    """Advance ``q`` by one RK4 step and refresh ``I``."""
    try:
        q = LimitStepper(grid, sampler, source).step(state.q, state.time, dt)
    except NumericError as exc:
        raise SolverAbort(str(exc), last_state=state) from exc
    return StreamState.from_q(grid, q, state.time + dt)


def advective_dt(grid, sampler, T, safety=0.5, nt=9):
    """Step limited by the averaged tide speed; no eps enters."""
    top = 0.0
    for t in np.linspace(0.0, T, nt):
        M = sampler.average("M", t)
        top = max(top, float(np.max(np.hypot(M[0], M[1]))))
    return safety * min(grid.hx, grid.hy) / (1.0 + top)


@dataclass(frozen=True)
class LimitRunConfig:
    T: float
    grid: TorusGrid = TorusGrid(64, 64)
    scenario: Scenario = field(default_factory=default_scenario)
    initial: InitialData = InitialData()
    variant: str = "literal"
    safety: float = 0.5
    output_stride: int = 10

    def __post_init__(self):
        if not self.T >= 0:
            raise DomainError("end time must be non-negative")
        if self.variant not in INIT_VARIANTS:
            raise DomainError(f"unknown init variant {self.variant!r}")
        if not 0 < self.safety <= 1:
            raise DomainError("CFL safety factor must lie in (0, 1]")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise DomainError("output stride must be a positive integer")


@dataclass
class LimitResult:
    times: list
    diagnostics: list
    final: StreamState
    dt: float
    steps: int
    aborted: bool = False
    message: str = ""
    snapshots: list = field(default_factory=list)

    def summary(self):
        rows = self.diagnostics
        return {
            "aborted": self.aborted,
            "message": self.message,
            "dt": self.dt,
            "steps": self.steps,
            "final_time": self.final.time,
            "h4_sup": max(r["h4_norm"] for r in rows) if rows else None,
            "max_div_residual": max(r["div_residual"] for r in rows) if rows else None,
            "max_constraint_residual": max(r["constraint_residual"] for r in rows) if rows else None,
            "max_helmholtz_residual": max(r["helmholtz_residual"] for r in rows) if rows else None,
        }


def stream_array(grid, state):
    """The limit pair as a state-shaped array ``(I, N1, N2)``."""
    return np.concatenate([state.I[None], reconstruct_N(grid, state)])


def _diagnostics(grid, state):
    N = reconstruct_N(grid, state)
    u = np.concatenate([state.I[None], N])
    div, con = constraint_residuals(grid, state.I, N)
    return {
        "time": state.time,
        "h4_norm": grid.sobolev_norm(u, 4.0),
        "l2_norm": grid.sobolev_norm(u, 0.0),
        "q_l2": grid.sobolev_norm(state.q, 0.0),
        "div_residual": div,
        "constraint_residual": con,
        "helmholtz_residual": grid.sobolev_norm(grid.helmholtz(state.I) - state.q, 0.0),
    }


def run(config, observer=None, dt=None, source=None, keep_snapshots=False):
    """Integrate the limit model to ``config.T``.

    ``observer(t, u)`` receives ``u = (I, N1, N2)`` at ``t = 0`` and after
    every step.
    """
    grid = config.grid
    sampler = FieldSampler(config.scenario, grid)
    init = config.initial.build(grid)
    state = init_from_perturbation(grid, init.iota, init.n, config.variant)
    if dt is None:
        dt = advective_dt(grid, sampler, config.T, config.safety)
    steps = int(math.ceil(config.T / dt - 1e-12)) if config.T > 0 else 0
    dt = config.T / steps if steps else 0.0
    stepper = LimitStepper(grid, sampler, source)
    result = LimitResult([], [], state, dt, steps)

    def record(s):
        result.times.append(s.time)
        result.diagnostics.append(_diagnostics(grid, s))
        if keep_snapshots:
            result.snapshots.append((s.time, stream_array(grid, s)))

    record(state)
    if observer is not None:
        observer(0.0, stream_array(grid, state))
    try:
        for k in range(1, steps + 1):
            q = stepper.step(state.q, state.time, dt)
            state = StreamState.from_q(grid, q, k * dt)
            if observer is not None:
                observer(state.time, stream_array(grid, state))
            if k % config.output_stride == 0 or k == steps:
                record(state)
    except NumericError as exc:
        result.aborted = True
        result.message = str(exc)
    result.final = state
    return result


def limit_csv(result):
    return diagnostics_csv(result.diagnostics, DIAGNOSTIC_COLUMNS)
