"""Prescribed tide, depth and wind fields.

Every field is a finite harmonic sum in the fast phase ``theta``::

    f(t, theta, x) = sum_k a_k(t, x) cos(2 pi k theta) + b_k(t, x) sin(2 pi k theta)

and every amplitude ``a_k``, ``b_k`` is a finite sum of :class:`Term`
objects, ``envelope(t) * (a cos(k.x) + b sin(k.x))`` with a polynomial times
exponential envelope.  Restricting to this family keeps values, spatial
derivatives and theta-averages exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SCHEMA = "tidal-fields/1"


@dataclass(frozen=True)
class Term:
    """``poly(t) * exp(rate*t) * (a*cos(kx*x1 + ky*x2) + b*sin(kx*x1 + ky*x2))``."""

    a: float = 0.0
    b: float = 0.0
    kx: float = 0.0
    ky: float = 0.0
    poly: tuple = (1.0,)
    rate: float = 0.0

    def envelope(self, t):
        return np.polyval(self.poly[::-1], t) * np.exp(self.rate * t)

    def phase(self, x1, x2):
        return self.kx * np.asarray(x1) + self.ky * np.asarray(x2)

    def value(self, t, x1, x2):
        p = self.phase(x1, x2)
        return self.envelope(t) * (self.a * np.cos(p) + self.b * np.sin(p))

    def gradient(self, t, x1, x2):
        p = self.phase(x1, x2)
        d = self.envelope(t) * (-self.a * np.sin(p) + self.b * np.cos(p))
        return np.stack([self.kx * d, self.ky * d])

    def to_dict(self):
        return {"a": self.a, "b": self.b, "kx": self.kx, "ky": self.ky,
                "poly": list(self.poly), "rate": self.rate}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"a", "b", "kx", "ky", "poly", "rate"}
        if unknown:
            raise DomainError(f"unknown term keys: {sorted(unknown)}")
        return cls(a=float(d.get("a", 0.0)), b=float(d.get("b", 0.0)),
                   kx=float(d.get("kx", 0.0)), ky=float(d.get("ky", 0.0)),
                   poly=tuple(float(c) for c in d.get("poly", (1.0,))),
                   rate=float(d.get("rate", 0.0)))


def _amp_value(terms, t, x1, x2):
    out = np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
    for term in terms:
        out = out + term.value(t, x1, x2)
    return out


def _amp_gradient(terms, t, x1, x2):
    shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
    out = np.zeros((2,) + shape)
    for term in terms:
        out = out + term.gradient(t, x1, x2)
    return out


def _amp_laplacian(terms, t, x1, x2):
    out = np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
    for term in terms:
        out = out - (term.kx ** 2 + term.ky ** 2) * term.value(t, x1, x2)
    return out


@dataclass(frozen=True)
class Harmonic:
    """Mode ``k`` in theta: per-component cosine and sine amplitudes."""

    k: int
    cos: tuple = ()
    sin: tuple = ()


@dataclass(frozen=True)
class ThetaPeriodicField:
    """Field ``f(t, theta, x)``, exactly 1-periodic in ``theta``."""

    components: int
    harmonics: tuple = ()

    def __post_init__(self):
        if self.components not in (1, 2):
            raise DomainError("fields have 1 (scalar) or 2 (vector) components")
        for h in self.harmonics:
            if int(h.k) != h.k or h.k < 0:
                raise DomainError(f"harmonic index must be a non-negative integer, got {h.k}")
            for amps in (h.cos, h.sin):
                if amps and len(amps) != self.components:
                    raise DomainError("one amplitude per component is required")

    def _combine(self, fn, t, theta, x1, x2, extra=()):
        shape = extra + np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        out = np.zeros((self.components,) + shape)
        theta = np.mod(theta, 1.0)
        for h in self.harmonics:
            c = np.cos(2 * np.pi * h.k * theta)
            s = np.sin(2 * np.pi * h.k * theta)
            for i in range(self.components):
                if h.cos:
                    out[i] += c * fn(h.cos[i], t, x1, x2)
                if h.sin and h.k != 0:
                    out[i] += s * fn(h.sin[i], t, x1, x2)
        return out

    def eval(self, t, theta, x1, x2):
        """Values, shape ``(components,) + broadcast(x1, x2)``."""
        return self._combine(_amp_value, t, theta, x1, x2)

    def spatial_gradient(self, t, theta, x1, x2):
        """Exact spatial gradient, shape ``(components, 2, ...)``."""
        return self._combine(_amp_gradient, t, theta, x1, x2, extra=(2,))

    def spatial_laplacian(self, t, theta, x1, x2):
        return self._combine(_amp_laplacian, t, theta, x1, x2)

    def mean_field(self):
        """The theta-average as a field with only the ``k = 0`` harmonic."""
        kept = tuple(Harmonic(0, cos=h.cos) for h in self.harmonics if h.k == 0 and h.cos)
        return ThetaPeriodicField(self.components, kept)

    def theta_average(self, t, x1, x2):
        """``int_0^1 f dtheta``: the ``k = 0`` cosine amplitude."""
        return self.mean_field().eval(t, 0.0, x1, x2)

    def average_gradient(self, t, x1, x2):
        return self.mean_field().spatial_gradient(t, 0.0, x1, x2)

    def all_terms(self):
        for h in self.harmonics:
            for amps in (h.cos, h.sin):
                for amp in amps:
                    yield from amp

    def to_dict(self):
        def amps(a):
            return [[t.to_dict() for t in comp] for comp in a]
        return {"components": self.components,
                "harmonics": [{"k": h.k, "cos": amps(h.cos), "sin": amps(h.sin)}
                              for h in self.harmonics]}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"components", "harmonics"}
        if unknown:
            raise DomainError(f"unknown field keys: {sorted(unknown)}")

        def amps(a):
            return tuple(tuple(Term.from_dict(t) for t in comp) for comp in a)
        harmonics = []
        for h in d.get("harmonics", []):
            if set(h) - {"k", "cos", "sin"}:
                raise DomainError(f"unknown harmonic keys: {sorted(set(h) - {'k', 'cos', 'sin'})}")
            harmonics.append(Harmonic(int(h["k"]), amps(h.get("cos", [])), amps(h.get("sin", []))))
        return cls(int(d["components"]), tuple(harmonics))


def curl_of_average(W, t, x1, x2):
    """``d(avg W1)/dx2 - d(avg W2)/dx1``, exact."""
    if W.components != 2:
        raise DomainError("curl needs a 2-component field")
    g = W.average_gradient(t, x1, x2)
    return g[0, 1] - g[1, 0]


@dataclass(frozen=True)
class MeanDepthField:
    """Rescaled mean depth ``E(x)``, time-independent and positive."""

    terms: tuple = (Term(a=1.0),)

    @property
    def flat(self):
        return all(t.kx == 0 and t.ky == 0 and t.rate == 0 and tuple(t.poly) == (1.0,)
                   for t in self.terms) and sum(t.a for t in self.terms) == 1.0

    def value(self, x1, x2):
        return _amp_value(self.terms, 0.0, x1, x2)

    def gradient(self, x1, x2):
        return _amp_gradient(self.terms, 0.0, x1, x2)


def _zero(components):
    return ThetaPeriodicField(components, ())


@dataclass(frozen=True)
class Scenario:
    """Tide velocity ``M``, tide depth ``H``, wind ``W`` and mean depth ``E``."""

    M: ThetaPeriodicField = field(default_factory=lambda: _zero(2))
    H: ThetaPeriodicField = field(default_factory=lambda: _zero(1))
    W: ThetaPeriodicField = field(default_factory=lambda: _zero(2))
    E: MeanDepthField = field(default_factory=MeanDepthField)

    def __post_init__(self):
        if self.M.components != 2 or self.W.components != 2 or self.H.components != 1:
            raise DomainError("M and W must be vector fields and H a scalar field")

    def to_dict(self):
        return {"schema": SCHEMA, "M": self.M.to_dict(), "H": self.H.to_dict(),
                "W": self.W.to_dict(), "E": [t.to_dict() for t in self.E.terms]}

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEMA:
            raise DomainError(f"unsupported scenario schema {d.get('schema')!r}, expected {SCHEMA!r}")
        unknown = set(d) - {"schema", "M", "H", "W", "E"}
        if unknown:
            raise DomainError(f"unknown scenario keys: {sorted(unknown)}")
        kw = {}
        for name in ("M", "H", "W"):
            if name in d:
                kw[name] = ThetaPeriodicField.from_dict(d[name])
        if "E" in d:
            kw["E"] = MeanDepthField(tuple(Term.from_dict(t) for t in d["E"]))
        return cls(**kw)


def dumps(scenario):
    return json.dumps(scenario.to_dict(), indent=2, sort_keys=True)


def loads(text):
    return Scenario.from_dict(json.loads(text))


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def vector(*comps):
    """Build a per-component amplitude tuple from term sequences."""
    return tuple(tuple(c) for c in comps)


def default_scenario():
    """Tide with a dominant ``k=1`` harmonic, slowly growing envelope; windy mean.

    Amplitudes are O(1) and wavenumbers are integers so everything is
    periodic on the default ``2 pi`` torus.
    """
    slow = (1.0, 0.4)  # envelope 1 + 0.4 t
    M = ThetaPeriodicField(2, (
        Harmonic(0, cos=vector(
            [Term(a=0.3), Term(a=0.15, kx=0, ky=1)],
            [Term(b=0.15, kx=1, ky=0)])),
        Harmonic(1, cos=vector(
            [Term(a=0.8, poly=slow), Term(a=0.1, kx=1, ky=1, poly=slow)],
            [Term(a=0.4, poly=slow), Term(b=0.1, kx=0, ky=1)])),
    ))
    H = ThetaPeriodicField(1, (
        Harmonic(0, cos=vector([Term(a=0.2, kx=1, ky=1)])),
        Harmonic(1, cos=vector([Term(a=0.6, poly=slow), Term(a=0.2, kx=1, ky=0)]),
                 sin=vector([Term(b=0.2, kx=0, ky=1)])),
    ))
    W = ThetaPeriodicField(2, (
        Harmonic(0, cos=vector(
            [Term(a=0.2), Term(b=0.3, kx=0, ky=1)],
            [Term(a=0.25, kx=1, ky=0)])),
        Harmonic(1, sin=vector([Term(a=0.2)], [Term(a=0.1, kx=1, ky=0)])),
    ))
    return Scenario(M=M, H=H, W=W)


class FieldSampler:
    """Scenario fields evaluated on a fixed grid with cached spatial bases."""

    def __init__(self, scenario, grid):
        self.scenario = scenario
        self.grid = grid
        X1, X2 = grid.mesh
        self._basis = {}
        for f in (scenario.M, scenario.H, scenario.W):
            for term in f.all_terms():
                key = (term.kx, term.ky)
                if key not in self._basis:
                    p = term.phase(X1, X2)
                    self._basis[key] = (np.cos(p), np.sin(p))
        self.E = scenario.E.value(X1, X2)
        self.grad_E = scenario.E.gradient(X1, X2)
        if np.any(self.E <= 0):
            raise DomainError("mean depth must be positive")

    def _amp(self, terms, t, want):
        out = 0.0
        for term in terms:
            c, s = self._basis[(term.kx, term.ky)]
            env = term.envelope(t)
            if want == "value":
                out = out + env * (term.a * c + term.b * s)
            elif want == "grad":
                d = env * (-term.a * s + term.b * c)
                out = out + np.stack([term.kx * d, term.ky * d])
            else:
                out = out - (term.kx ** 2 + term.ky ** 2) * env * (term.a * c + term.b * s)
        return out

    def _field(self, f, t, theta, want, average=False):
        shape = ((2,) if want == "grad" else ()) + self.grid.shape
        out = np.zeros((f.components,) + shape)
        theta = np.mod(theta, 1.0)
        for h in f.harmonics:
            if average and h.k != 0:
                continue
            c = np.cos(2 * np.pi * h.k * theta)
            s = np.sin(2 * np.pi * h.k * theta)
            for i in range(f.components):
                if h.cos:
                    out[i] += c * self._amp(h.cos[i], t, want)
                if h.sin and h.k != 0:
                    out[i] += s * self._amp(h.sin[i], t, want)
        return out

    def sample(self, name, t, theta, want="value"):
        return self._field(getattr(self.scenario, name), t, theta, want)

    def average(self, name, t, want="value"):
        return self._field(getattr(self.scenario, name), t, 0.0, want, average=True)
