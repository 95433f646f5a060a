"""Manufactured solutions for the limit model, built symbolically with sympy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .fields import FieldSampler, Harmonic, Scenario, Term, ThetaPeriodicField, vector
from .limit_solver import LimitStepper

t, x1, x2 = sp.symbols("t x1 x2", real=True)


def limit_operator(I, M, H, W=(0, 0)):
    """Symbolic ``dq/dt`` of the limit model for a given ``I(t, x1, x2)``."""
    M1, M2 = M
    d1 = lambda f: sp.diff(f, x1)  # noqa: E731
    d2 = lambda f: sp.diff(f, x2)  # noqa: E731
    I1, I2 = d1(I), d2(I)
    bracket = (
        M1 * I1 + M2 * I2
        - d1(M1 * d1(I1)) - d1(M2 * d2(I1)) - d2(M1 * d2(I1)) - d2(M2 * d2(I2))
        - (-d2(H) * I1 + d1(H) * I2)
        + (d1(M1) + d2(M2)) * I
        + d1(d1(M2) * I2) - d1(d2(M2) * I1) - d2(d1(M1) * I2) + d2(d2(M1) * I1)
    )
    return d2(W[0]) - d1(W[1]) - bracket


@dataclass
class Manufactured:
    """Exact ``I``, its ``q`` and the source making ``I`` solve the limit model."""

    exact_I: object
    exact_q: object
    source_fn: object
    scenario: object = None

    def I(self, grid, time):
        X1, X2 = grid.mesh
        return np.broadcast_to(self.exact_I(time, X1, X2), grid.shape).astype(float)

    def q(self, grid, time):
        X1, X2 = grid.mesh
        return np.broadcast_to(self.exact_q(time, X1, X2), grid.shape).astype(float)

    def source(self, grid):
        X1, X2 = grid.mesh
        return lambda time: np.broadcast_to(self.source_fn(time, X1, X2), grid.shape).astype(float)


def manufacture(I, M=(0, 0), H=0):
    """Build a :class:`Manufactured` case from sympy expressions in ``t, x1, x2``.

    The averaged coefficients ``M`` and ``H`` may depend on ``x`` but not on
    ``t`` for the convergence studies; wind is taken as zero.
    """
    I = sp.sympify(I)
    M = tuple(sp.sympify(m) for m in M)
    H = sp.sympify(H)
    q = I - sp.diff(I, x1, 2) - sp.diff(I, x2, 2)
    S = sp.simplify(sp.diff(q, t) - limit_operator(I, M, H))
    args = (t, x1, x2)
    return Manufactured(sp.lambdify(args, I, "numpy"), sp.lambdify(args, q, "numpy"),
                        sp.lambdify(args, S, "numpy"))


def default_case():
    """A smooth, non-band-limited periodic solution with constant tide ``(1, 0)``."""
    case = manufacture(sp.exp(-t) * sp.exp(sp.sin(x1)) * sp.cos(x2), M=(1, 0), H=0)
    M = ThetaPeriodicField(2, (Harmonic(0, cos=vector([Term(a=1.0)], [])),))
    case.scenario = Scenario(M=M)
    return case


def solve(case, grid, T, steps):
    """Integrate the case from its exact initial ``q``; returns the max error in ``I`` at ``T``."""
    sampler = FieldSampler(case.scenario, grid)
    stepper = LimitStepper(grid, sampler, case.source(grid))
    q = grid.dealias(case.q(grid, 0.0))
    dt = T / steps
    for k in range(steps):
        q = stepper.step(q, k * dt, dt)
    I = grid.helmholtz_inverse(q)
    return float(np.max(np.abs(I - case.I(grid, T))))
