"""Right-hand sides of the rescaled regime systems, for residual diagnostics.

All three regimes share one template; they differ only in the numeric
coefficient of each term (see :data:`tidal_perturbation.scales.TERMS`)
and in the anisotropy factor ``A = L/l`` that multiplies every
``x2``-derivative.  With ``D = E + (H/E) H + (I/E) iota`` the template is::

    d iota/dt = -h_depth (grad_A E . n + E div_A n)
                -h_tide  (grad_A H . n + H div_A n)
                -h_adv_tide (grad_A iota . M + iota div_A M)
                -h_adv_self (grad_A iota . n + iota div_A n)

    d n/dt = -n_adv_tide ((grad_A n) M + (grad_A M) n) - n_adv_self (grad_A n) n
             -coriolis n_perp - pressure grad_A iota
             +visc_tide lap_A M + visc_pert lap_A n
             +visc_tide (grad_A M) grad_A(E + (H/E) H) / D
             +visc_tide_iota (grad_A M) grad_A iota / D
             +visc_pert (grad_A n) grad_A(E + (H/E) H) / D
             +visc_pert_iota (grad_A n) grad_A iota / D
             -(bottom_tide M + bottom_pert n) Q(bottom_quot)
             +(air_wind W - air_tide M - air_pert n) Q(air_quot)
             +forcing F

where ``Q(r) = (1/D) / (1 + r D)`` and the ``H/E``, ``I/E`` ratios
are the ``depth_tide`` and ``depth_pert`` coefficients.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .full_solver import Forcing
from .scales import TERMS, reference_coefficients, regime_coefficients


def _vals(coefficients):
    out = {}
    for k in TERMS:
        v = coefficients.get(k, 0.0)
        out[k] = float(getattr(v, "value", v))
    out["aniso"] = float(getattr(coefficients.get("aniso", 1.0), "value", coefficients.get("aniso", 1.0)))
    return out


def regime_terms(grid, u, t, eps, sampler, coefficients, forcing=None):
    """Each term's contribution to ``du/dt`` (arrays of shape ``(3, nx, ny)``)."""
    c = _vals(coefficients)
    A = c["aniso"]
    f = Forcing(sampler, eps).at(t)
    M, gM, H, gH, W = f["M"], f["gradM"], f["H"], f["gradH"], f["W"]
    E, gE = sampler.E, sampler.grad_E
    iota, n = u[0], u[1:]
    zero = np.zeros_like(iota)

    def ga(g):
        # anisotropic gradient: second direction scaled by A
        return np.stack([g[0], A * g[1]])

    gi = ga(grid.gradient(iota))
    gn = np.stack([ga(grid.gradient(n[0])), ga(grid.gradient(n[1]))])
    gMa = np.stack([ga(gM[0]), ga(gM[1])])
    gHa, gEa = ga(gH), ga(gE)
    div_n = gn[0, 0] + gn[1, 1]
    div_M = gMa[0, 0] + gMa[1, 1]

    def lap_a(v):
        return np.stack([grid.ddx(grid.ddx(v[i])) + A ** 2 * grid.ddy(grid.ddy(v[i])) for i in range(2)])

    def matvec(G, v):
        return np.stack([G[i, 0] * v[0] + G[i, 1] * v[1] for i in range(2)])

    D = E + c["depth_tide"] * H + c["depth_pert"] * iota
    if np.min(D) <= 0:
        raise DomainError(f"regime depth denominator vanishes (min {float(np.min(D)):.3g})")
    gdepth = gEa + c["depth_tide"] * gHa

    def q(r):
        return (1.0 / D) / (1.0 + r * D)

    def scal(x):
        return np.concatenate([x[None], np.zeros_like(n)])

    def vec(x):
        return np.concatenate([zero[None], x])

    # analytic laplacian of M is exact; the spectral one matches for band-limited M
    lap_M = sampler.sample("M", t, t / eps, "lap")
    lap_M_a = lap_M if A == 1.0 else np.stack([grid.ddx(grid.ddx(M[i])) + A ** 2 * grid.ddy(grid.ddy(M[i]))
                                               for i in range(2)])
    terms = {
        "h_depth": scal(-c["h_depth"] * (gEa[0] * n[0] + gEa[1] * n[1] + E * div_n)),
        "h_tide": scal(-c["h_tide"] * (gHa[0] * n[0] + gHa[1] * n[1] + H * div_n)),
        "h_adv_tide": scal(-c["h_adv_tide"] * (gi[0] * M[0] + gi[1] * M[1] + iota * div_M)),
        "h_adv_self": scal(-c["h_adv_self"] * (gi[0] * n[0] + gi[1] * n[1] + iota * div_n)),
        "n_adv_tide": vec(-c["n_adv_tide"] * (matvec(gn, M) + matvec(gMa, n))),
        "n_adv_self": vec(-c["n_adv_self"] * matvec(gn, n)),
        "coriolis": vec(-c["coriolis"] * np.stack([-n[1], n[0]])),
        "pressure": vec(-c["pressure"] * gi),
        "visc_tide": vec(c["visc_tide"] * (lap_M_a + matvec(gMa, gdepth) / D)),
        "visc_pert": vec(c["visc_pert"] * (lap_a(n) + matvec(gn, gdepth) / D)),
        "visc_tide_iota": vec(c["visc_tide_iota"] * matvec(gMa, gi) / D),
        "visc_pert_iota": vec(c["visc_pert_iota"] * matvec(gn, gi) / D),
        "bottom_tide": vec(-c["bottom_tide"] * q(c["bottom_quot"]) * M),
        "bottom_pert": vec(-c["bottom_pert"] * q(c["bottom_quot"]) * n),
        "air_wind": vec(c["air_wind"] * q(c["air_quot"]) * W),
        "air_tide": vec(-c["air_tide"] * q(c["air_quot"]) * M),
        "air_pert": vec(-c["air_pert"] * q(c["air_quot"]) * n),
    }
    F = np.zeros_like(n) if forcing is None else np.asarray(forcing(t) if callable(forcing) else forcing)
    terms["forcing"] = vec(c["forcing"] * F)
    return terms


def regime_rhs(regime, grid, u, t, eps, sampler, groups=None, coefficients=None, forcing=None):
    """Full regime right-hand side ``du/dt`` (not dealiased).

    Coefficients come from, in order of precedence, an explicit
    ``coefficients`` mapping, measured ``groups``, or the reference
    classification of ``regime`` evaluated at ``eps``.
    """
    if coefficients is None:
        if groups is not None:
            if groups.regime.kind is not regime.kind:
                raise DomainError("groups were derived for a different regime")
            coefficients = regime_coefficients(groups)
        else:
            coefficients = reference_coefficients(regime, eps)
    terms = regime_terms(grid, np.asarray(u, dtype=float), t, eps, sampler, coefficients, forcing)
    return sum(terms.values())
