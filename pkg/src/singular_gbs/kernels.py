"""Elliptical generator functions.

A generator ``h`` turns a quadratic form ``u`` into a density value
``h(u)``.  Each generator here carries the normalizing constant that makes
the full-rank spherical density ``x -> h(|x|^2)`` on ``dims`` coordinates
integrate to one, so density formulas elsewhere never add constants of
their own.

Kernels (``u >= 0``):

=========== ============================== ==========================
kind        h(u) up to its constant         parameters
=========== ============================== ==========================
gaussian    exp(-u / 2)                     none
kotz        u^(N-1) exp(-r u^s)             N > 1 - dims/2, r > 0, s > 0
pearson7    (1 + u / theta)^(-nu)           nu > dims/2, theta > 0
pearson2    (1 - u)^gamma on u < 1          gamma > -1
=========== ============================== ==========================
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DomainError, NotIntegrable

__all__ = ["Kind", "GeneratorFunction", "make_generator", "log_h", "radial_mass"]


class Kind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    KOTZ = "kotz"
    PEARSON7 = "pearson7"
    PEARSON2 = "pearson2"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "").replace("-", "").replace(" ", "")
        aliases = {
            "gaussian": cls.GAUSSIAN,
            "normal": cls.GAUSSIAN,
            "kotz": cls.KOTZ,
            "pearson7": cls.PEARSON7,
            "pearsonvii": cls.PEARSON7,
            "pearson2": cls.PEARSON2,
            "pearsonii": cls.PEARSON2,
        }
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown generator kind {value!r}") from None


def _defaults(kind, dims):
    if kind is Kind.GAUSSIAN:
        return {}
    if kind is Kind.KOTZ:
        return {"N": 1.0, "r": 0.5, "s": 1.0}
    if kind is Kind.PEARSON7:
        # multivariate t with 3 degrees of freedom
        return {"nu": (dims + 3) / 2, "theta": 3.0}
    return {"gamma": 1.0}


def _log_constant(kind, p, d):
    half = d / 2
    if kind is Kind.GAUSSIAN:
        return -half * np.log(2 * np.pi)
    if kind is Kind.KOTZ:
        N, r, s = p["N"], p["r"], p["s"]
        a = (2 * N + d - 2) / (2 * s)
        return gammaln(half) + np.log(s) + a * np.log(r) - half * np.log(np.pi) - gammaln(a)
    if kind is Kind.PEARSON7:
        nu, theta = p["nu"], p["theta"]
        return gammaln(nu) - half * np.log(np.pi * theta) - gammaln(nu - half)
    g = p["gamma"]
    return gammaln(half + g + 1) - half * np.log(np.pi) - gammaln(g + 1)


def _validate(kind, p, d):
    if kind is Kind.GAUSSIAN:
        if p:
            raise DomainError(f"gaussian generator takes no parameters, got {sorted(p)}")
        return
    expected = set(_defaults(kind, d))
    if set(p) != expected:
        raise DomainError(f"{kind.value} expects parameters {sorted(expected)}, got {sorted(p)}")
    if not all(np.isfinite(v) for v in p.values()):
        raise DomainError("generator parameters must be finite")
    if kind is Kind.KOTZ:
        if p["r"] <= 0 or p["s"] <= 0 or 2 * p["N"] + d <= 2:
            raise DomainError(f"kotz needs r > 0, s > 0 and 2N + dims > 2, got {p}")
    elif kind is Kind.PEARSON7:
        if p["theta"] <= 0 or p["nu"] <= d / 2:
            raise DomainError(f"pearson7 needs theta > 0 and nu > dims/2 = {d / 2}, got {p}")
    elif p["gamma"] <= -1:
        raise DomainError(f"pearson2 needs gamma > -1, got {p}")


@dataclass(frozen=True)
class GeneratorFunction:
    """Normalized generator ``h`` for ``dims`` effective coordinates."""

    kind: Kind
    dims: int
    params: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    log_const: float = 0.0

    @property
    def samplable(self) -> bool:
        return self.kind in (Kind.GAUSSIAN, Kind.PEARSON7)

    def support_upper(self) -> float:
        return 1.0 if self.kind is Kind.PEARSON2 else np.inf

    def log_h(self, u, strict=True):
        """Log of ``h(u)``; vectorized over ``u``.

        Points outside the support raise :class:`DomainError` when
        ``strict``, otherwise they map to ``-inf``.
        """
        u = np.asarray(u, dtype=float)
        bad = ~(u >= 0) | (u >= self.support_upper())
        if np.any(bad):
            if strict:
                raise DomainError(f"u={u[bad].ravel()[0]!r} outside the support of {self.kind.value}")
            u = np.where(bad, 0.0, u)
        p = self.params
        with np.errstate(divide="ignore"):
            if self.kind is Kind.GAUSSIAN:
                core = -u / 2
            elif self.kind is Kind.KOTZ:
                core = (p["N"] - 1) * np.log(u) - p["r"] * u ** p["s"] if p["N"] != 1 else -p["r"] * u ** p["s"]
            elif self.kind is Kind.PEARSON7:
                core = -p["nu"] * np.log1p(u / p["theta"])
            else:
                core = p["gamma"] * np.log1p(-u) if p["gamma"] != 0 else np.zeros_like(u)
        out = self.log_const + core
        if np.any(bad):
            out = np.where(bad, -np.inf, out)
        return out if out.ndim else float(out)

    def with_dims(self, dims: int) -> "GeneratorFunction":
        return make_generator(self.kind, dict(self.params), dims)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params), "dims": self.dims}


def radial_mass(gen: GeneratorFunction) -> float:
    """Integral of ``x -> h(|x|^2)`` over R^dims, via the radial integral."""
    d = gen.dims
    log_area = np.log(2.0) + d / 2 * np.log(np.pi) - gammaln(d / 2)

    def integrand(t):
        # r = exp(t) keeps both the origin and heavy tails well resolved
        r2 = np.exp(2 * t)
        if r2 >= gen.support_upper():
            return 0.0
        return np.exp(log_area + d * t + gen.log_h(r2))

    upper = 0.5 * np.log(gen.support_upper()) if gen.kind is Kind.PEARSON2 else 60.0
    pieces = [(-60.0, -5.0), (-5.0, min(0.0, upper)), (min(0.0, upper), upper)]
    total = 0.0
    for a, b in pieces:
        if b > a:
            val, _ = integrate.quad(integrand, a, b, limit=400, epsabs=0, epsrel=1e-11)
            total += val
    return total


def make_generator(kind, params=None, dims: int = 1, check: bool | None = None) -> GeneratorFunction:
    """Build a normalized generator.

    Missing parameters take the kind's defaults.  Nonstandard parameters
    are checked by radial quadrature unless ``check=False``.

    Raises
    ------
    DomainError
        Illegal parameters or ``dims < 1``.
    NotIntegrable
        The quadrature check does not return unit mass.
    """
    kind = Kind.parse(kind)
    if int(dims) != dims or dims < 1:
        raise DomainError(f"dims must be a positive integer, got {dims}")
    dims = int(dims)
    defaults = _defaults(kind, dims)
    given = {k: float(v) for k, v in (params or {}).items()}
    unknown = set(given) - set(defaults)
    if unknown:
        raise DomainError(f"{kind.value} does not take parameters {sorted(unknown)}")
    full = {**defaults, **given}
    _validate(kind, full, dims)
    gen = GeneratorFunction(kind, dims, MappingProxyType(full), float(_log_constant(kind, full, dims)))
    if check is None:
        check = full != defaults
    if check:
        mass = radial_mass(gen)
        if not abs(mass - 1.0) < 1e-6:
            raise NotIntegrable(f"{kind.value} with {full} on {dims} dims has radial mass {mass!r}")
    return gen


def log_h(gen: GeneratorFunction, u, strict=True):
    """Functional alias of :meth:`GeneratorFunction.log_h`."""
    return gen.log_h(u, strict=strict)
