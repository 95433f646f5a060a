"""Scale analysis: the small parameter, dimensionless groups and their eps-power tags.

Inputs are dimensional reference values in mixed practical units (hours,
metres, km/h, ...).  They are normalized to kilometres and days before any
ratio is formed.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, fields, replace

from .errors import DomainError

HOURS_PER_DAY = 24.0
SECONDS_PER_DAY = 86400.0
M_PER_KM = 1000.0

# "~" in the classification means agreement within 50% relative.
SIMILAR_TOL = 0.5
COEFF_RANGE = (0.1, 30.0)


class RegimeKind(enum.Enum):
    SHELF = "shelf"
    ZONE = "zone"
    LAYER = "layer"


class Weather(enum.Enum):
    CALM = "calm"
    STORM = "storm"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    weather: Weather = Weather.CALM

    @classmethod
    def parse(cls, kind, weather="calm"):
        try:
            return cls(RegimeKind(kind), Weather(weather))
        except ValueError as exc:
            raise DomainError(str(exc)) from None


@dataclass(frozen=True)
class PhysicalScales:
    """Dimensional reference values, each in the unit noted beside it."""

    t_obs: float          # h
    omega_tide: float     # 1/h
    L_long: float         # km
    l_lat: float          # km
    M_tide: float         # km/day
    N_pert: float         # km/day
    E_depth: float        # m
    H_range: float        # m
    I_pert: float         # m
    W_wind: float         # km/h
    f_coriolis: float     # 1/s
    g_gravity: float      # km/day^2
    c_viscosity: float    # km^2/day
    kappa_bottom: float   # km/day
    mu_air: float         # km/day
    F_scale: float | None = None  # km/day^2, optional

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None and f.name == "F_scale":
                continue
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise DomainError(f"{f.name} must be a positive finite number, got {v!r}")

    def in_km_day(self):
        """All values converted to km and days (keys match field names)."""
        return {
            "t_obs": self.t_obs / HOURS_PER_DAY,
            "omega_tide": self.omega_tide * HOURS_PER_DAY,
            "L_long": self.L_long,
            "l_lat": self.l_lat,
            "M_tide": self.M_tide,
            "N_pert": self.N_pert,
            "E_depth": self.E_depth / M_PER_KM,
            "H_range": self.H_range / M_PER_KM,
            "I_pert": self.I_pert / M_PER_KM,
            "W_wind": self.W_wind * HOURS_PER_DAY,
            "f_coriolis": self.f_coriolis * SECONDS_PER_DAY,
            "g_gravity": self.g_gravity,
            "c_viscosity": self.c_viscosity,
            "kappa_bottom": self.kappa_bottom,
            "mu_air": self.mu_air,
            "F_scale": self.F_scale,
        }

    def with_overrides(self, **overrides):
        names = {f.name for f in fields(self)}
        bad = set(overrides) - names
        if bad:
            raise DomainError(f"unknown scale field(s): {sorted(bad)}")
        return replace(self, **overrides)


@dataclass(frozen=True)
class PowerTag:
    """``coeff * eps**power``."""

    coeff: float
    power: float

    def value(self, eps):
        return self.coeff * eps ** self.power

    def __mul__(self, other):
        return PowerTag(self.coeff * other.coeff, self.power + other.power)

    def inverse(self):
        return PowerTag(1.0 / self.coeff, -self.power)

    def __str__(self):
        p = int(self.power) if float(self.power).is_integer() else self.power
        return f"{self.coeff:.3g} eps^{p}"


def compute_epsilon(scales):
    """Tide period over observation time, ``1/(t_obs * omega_tide)``."""
    t, w = scales.t_obs, scales.omega_tide
    if not (t > 0 and w > 0):
        raise DomainError("t_obs and omega_tide must be positive")
    return 1.0 / (t * w)


def fit_power_tag(value, eps):
    """Classify ``value`` as ``coeff * eps**power``.

    Integer powers whose coefficient lands in ``[0.1, 30]`` are preferred;
    among them the one with coefficient closest to 1 in log scale wins, ties
    going to the smaller ``|power|``.  Half-integer powers are only used when
    no integer power qualifies.
    """
    if not value > 0:
        raise DomainError(f"only positive values can be tagged, got {value!r}")
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    lo, hi = COEFF_RANGE
    lv, le = math.log10(value), math.log10(eps)

    def candidates(step):
        # powers putting log10(coeff) within [-2, 2] of zero, widened to be safe
        centre = lv / le
        span = int(abs(4 / le)) + 2
        p0 = round(centre / step) * step
        return [p0 + step * j for j in range(-span, span + 1)]

    def best(powers):
        scored = []
        for p in powers:
            coeff = value / eps ** p
            scored.append((abs(math.log10(coeff)), abs(p), p, coeff))
        scored.sort()
        return scored[0] if scored else None

    ints = [p for p in candidates(1.0) if lo <= value / eps ** p <= hi]
    if ints:
        _, _, p, c = best(ints)
        return PowerTag(c, float(p))
    halves = [p for p in candidates(0.5) if lo <= value / eps ** p <= hi]
    _, _, p, c = best(halves or candidates(0.5))
    return PowerTag(c, float(p))


# Group definitions: key -> (symbol, description)
GROUP_INFO = {
    "eps": ("eps", "tide period / observation time"),
    "f_t": ("f t", "Coriolis"),
    "pressure": ("(g t/N)(I/L)", "pressure gradient"),
    "c_t_L2": ("c t/L^2", "viscosity"),
    "kappa_t_E": ("kappa t/E", "bottom friction"),
    "kappa_E_c": ("kappa E/c", "bottom friction quotient"),
    "mu_t_E": ("mu t/E", "air-water friction"),
    "mu_E_c": ("mu E/c", "air-water friction quotient"),
    "M_t_L": ("M t/L", "tide advection"),
    "N_t_L": ("N t/L", "perturbation advection"),
    "L_l": ("L/l", "anisotropy"),
    "H_E": ("H/E", "tidal range / depth"),
    "excursion": ("(M/omega)/L", "tidal excursion / length"),
    "gamma": ("gamma", "wind factor"),
    "M_N": ("M/N", "tide / perturbation velocity"),
    "H_I": ("H/I", "tide / perturbation height"),
    "I_E": ("I/E", "perturbation height / depth"),
    "W_N": ("W/N", "wind / perturbation velocity"),
    "F_t_N": ("F t/N", "other forcing"),
}


@dataclass(frozen=True)
class DimensionlessGroups:
    regime: Regime
    eps: float
    values: dict
    tags: dict

    def row(self, key):
        return self.values[key], self.tags[key]


def gamma_factor(kind):
    """Convention linking gamma to W/M: shelf uses W/M, zone and layer 2 W/M."""
    return 1.0 if kind is RegimeKind.SHELF else 2.0


def derive_groups(scales, regime):
    """All dimensionless groups, computed from km/day-normalized inputs."""
    eps = compute_epsilon(scales)
    if not eps < 1:
        raise DomainError("observation window must exceed one tide period")
    s = scales.in_km_day()
    t, L, l = s["t_obs"], s["L_long"], s["l_lat"]
    M, N, E, H, I, W = (s[k] for k in ("M_tide", "N_pert", "E_depth", "H_range", "I_pert", "W_wind"))
    c, kappa, mu = s["c_viscosity"], s["kappa_bottom"], s["mu_air"]
    M_t_L = M * t / L
    values = {
        "eps": eps,
        "f_t": s["f_coriolis"] * t,
        "pressure": (s["g_gravity"] * t / N) * (I / L),
        "c_t_L2": c * t / L ** 2,
        "kappa_t_E": kappa * t / E,
        "kappa_E_c": kappa * E / c,
        "mu_t_E": mu * t / E,
        "mu_E_c": mu * E / c,
        "M_t_L": M_t_L,
        "N_t_L": M_t_L * (N / M),
        "L_l": L / l,
        "H_E": H / E,
        "excursion": (M / s["omega_tide"]) / L,
        "gamma": gamma_factor(regime.kind) * W / M,
        "M_N": M / N,
        "H_I": H / I,
        "I_E": I / E,
        "W_N": W / N,
    }
    if s["F_scale"] is not None:
        values["F_t_N"] = s["F_scale"] * t / N
    tags = {k: fit_power_tag(v, eps) for k, v in values.items()}
    return DimensionlessGroups(regime, eps, values, tags)


# Preset dimensional values.  g is taken as 1e6 km/day^2 to reproduce the
# reference classification (see README for the physical-unit caveat).
_SHARED = dict(t_obs=2400.0, omega_tide=1 / 13.0, f_coriolis=math.pi / SECONDS_PER_DAY,
               g_gravity=1.0e6, c_viscosity=1.0e-7, kappa_bottom=1.0e-2, mu_air=1.0e-4)
_GEOMETRY = {
    RegimeKind.SHELF: dict(M_kmh=0.5, L_long=500.0, l_lat=500.0, E_depth=300.0, H_range=3.0),
    RegimeKind.ZONE: dict(M_kmh=1.0, L_long=5.0, l_lat=5.0, E_depth=50.0, H_range=10.0),
    RegimeKind.LAYER: dict(M_kmh=1.0, L_long=500.0, l_lat=5.0, E_depth=50.0, H_range=10.0),
}
_WIND_KMH = {Weather.CALM: 10.0, Weather.STORM: 100.0}


def preset(regime):
    """Reference values for a regime; perturbation scales are eps times tide scales."""
    geo = dict(_GEOMETRY[regime.kind])
    eps = 1.0 / (_SHARED["t_obs"] * _SHARED["omega_tide"])
    M = geo.pop("M_kmh") * HOURS_PER_DAY
    return PhysicalScales(M_tide=M, N_pert=eps * M, I_pert=eps * geo["H_range"],
                          W_wind=_WIND_KMH[regime.weather], **geo, **_SHARED)


# Reference classifications, group -> (coeff, power).
_REF_COMMON = {"f_t": (math.pi / 2, -1), "M_N": (1, -1), "H_I": (1, -1)}
REFERENCE_TAGS = {
    RegimeKind.SHELF: {
        "pressure": (0.25, -1), "c_t_L2": (13, 5), "kappa_t_E": (3, 0), "kappa_E_c": (0.8, -2),
        "mu_t_E": (6, 1), "mu_E_c": (1.5, -1), "M_t_L": (2, 0), "N_t_L": (2, 1), "L_l": (1, 0),
        "H_E": (2, 1), "excursion": (2, 1), "I_E": (2, 2),
    },
    RegimeKind.ZONE: {
        "pressure": (0.2, -2), "c_t_L2": (0.6, 3), "kappa_t_E": (0.1, -1), "kappa_E_c": (0.1, -2),
        "mu_t_E": (0.2, 0), "mu_E_c": (0.25, -1), "M_t_L": (2, -1), "N_t_L": (2, 0), "L_l": (1, 0),
        "H_E": (0.2, 0), "excursion": (2, 0), "I_E": (0.2, 1),
    },
    RegimeKind.LAYER: {
        "pressure": (0.4, -1), "c_t_L2": (13, 5), "kappa_t_E": (0.1, -1), "kappa_E_c": (0.1, -2),
        "mu_t_E": (0.2, 0), "mu_E_c": (0.25, -1), "M_t_L": (4, 0), "N_t_L": (4, 1), "L_l": (0.5, -1),
        "H_E": (0.2, 0), "excursion": (4, 1), "I_E": (0.2, 1),
    },
}
_REF_GAMMA = {
    (RegimeKind.SHELF, Weather.CALM): (0.1, -1),
    (RegimeKind.SHELF, Weather.STORM): (1, -1),
    (RegimeKind.ZONE, Weather.CALM): (0.1, -1),
    (RegimeKind.ZONE, Weather.STORM): (1, -1),
    (RegimeKind.LAYER, Weather.CALM): (0.1, -1),
    (RegimeKind.LAYER, Weather.STORM): (1, -1),
}


def reference_tags(regime):
    """Reference eps-power classification of every group for ``regime``."""
    tags = {k: PowerTag(float(c), float(p)) for k, (c, p) in _REF_COMMON.items()}
    tags.update({k: PowerTag(float(c), float(p)) for k, (c, p) in REFERENCE_TAGS[regime.kind].items()})
    g = PowerTag(*map(float, _REF_GAMMA[(regime.kind, regime.weather)]))
    tags["gamma"] = g
    # W/N = (W/M)(M/N) = gamma / (factor * eps)
    tags["W_N"] = PowerTag(g.coeff / gamma_factor(regime.kind), g.power - 1)
    tags["F_t_N"] = PowerTag(1.0, 0.0)
    return tags


def similar(value, reference, tol=SIMILAR_TOL):
    """``value ~ reference``: relative deviation from the reference within ``tol``."""
    return abs(value - reference) <= tol * abs(reference)


# Each PDE term coefficient is a product of groups (group -> exponent).
TERMS = {
    "h_depth": {"H_I": 1, "N_t_L": 1, "H_E": -1},
    "h_tide": {"H_I": 1, "N_t_L": 1},
    "h_adv_tide": {"M_t_L": 1},
    "h_adv_self": {"N_t_L": 1},
    "aniso": {"L_l": 1},
    "n_adv_tide": {"M_t_L": 1},
    "n_adv_self": {"N_t_L": 1},
    "coriolis": {"f_t": 1},
    "pressure": {"pressure": 1},
    "visc_tide": {"c_t_L2": 1, "M_N": 1},
    "visc_pert": {"c_t_L2": 1},
    "visc_tide_iota": {"c_t_L2": 1, "M_N": 1, "I_E": 1},
    "visc_pert_iota": {"c_t_L2": 1, "I_E": 1},
    "depth_tide": {"H_E": 1},
    "depth_pert": {"I_E": 1},
    "bottom_tide": {"kappa_t_E": 1, "M_N": 1},
    "bottom_pert": {"kappa_t_E": 1},
    "bottom_quot": {"kappa_E_c": 1},
    "air_wind": {"mu_t_E": 1, "W_N": 1},
    "air_tide": {"mu_t_E": 1, "M_N": 1},
    "air_pert": {"mu_t_E": 1},
    "air_quot": {"mu_E_c": 1},
    "forcing": {"F_t_N": 1},
}


@dataclass(frozen=True)
class TermCoefficient:
    value: float
    tag: PowerTag


def _product(parts, lookup_value, lookup_tag):
    value, tag = 1.0, PowerTag(1.0, 0.0)
    for g, e in parts.items():
        v, tg = lookup_value(g), lookup_tag(g)
        value *= v ** e
        tag = tag * (tg if e == 1 else tg.inverse())
    return value, tag


def regime_coefficients(groups):
    """Per-term coefficients of the rescaled regime system, from measured groups.

    The tag of a term is the product of its groups' tags.  ``forcing`` falls
    back to 1 when no forcing scale was given.
    """
    def value(g):
        return groups.values.get(g, 1.0)

    def tag(g):
        return groups.tags.get(g, PowerTag(1.0, 0.0))
    out = {}
    for term, parts in TERMS.items():
        v, tg = _product(parts, value, tag)
        out[term] = TermCoefficient(v, tg)
    return out


def reference_coefficients(regime, eps):
    """Per-term coefficients from the reference classification, evaluated at ``eps``."""
    tags = reference_tags(regime)
    out = {}
    for term, parts in TERMS.items():
        _, tg = _product(parts, lambda g: tags[g].value(eps), lambda g: tags[g])
        out[term] = TermCoefficient(tg.value(eps), tg)
    return out


# -- reports -------------------------------------------------------------

REPORT_COLUMNS = ["group", "symbol", "value", "coeff", "power", "ref_tag", "ref_value", "rel_dev"]


def report_rows(groups):
    ref = reference_tags(groups.regime)
    rows = []
    for key, v in groups.values.items():
        tg = groups.tags[key]
        if key == "eps":
            pv, pt = 1.0 / 200, "1/200"
        elif key in ref:
            pv, pt = ref[key].value(groups.eps), str(ref[key])
        else:
            pv, pt = None, ""
        rows.append({
            "group": key, "symbol": GROUP_INFO[key][0], "value": v,
            "coeff": tg.coeff, "power": tg.power, "ref_tag": pt, "ref_value": pv,
            "rel_dev": None if pv is None else (v - pv) / pv,
        })
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def format_text(groups):
    rows = [[_fmt(r[c]) for c in REPORT_COLUMNS] for r in report_rows(groups)]
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(REPORT_COLUMNS)]
    head = f"regime={groups.regime.kind.value} weather={groups.regime.weather.value} eps={groups.eps:.6g}"
    lines = [head, "  ".join(c.ljust(w) for c, w in zip(REPORT_COLUMNS, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(x.ljust(w) for x, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def format_csv(groups):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in report_rows(groups):
        writer.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                         for c in REPORT_COLUMNS])
    return buf.getvalue()
