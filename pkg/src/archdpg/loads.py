"""Structured closed-form expressions and load specifications.

Loads are restricted to finite sums of polynomial and trigonometric terms
plus endpoint Dirac loads.  The set is closed under differentiation,
antidifferentiation and the reflection x -> 1-x, which keeps manufactured
solutions and mirrored problems exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import polynomial as npoly

COMPONENTS = ("u", "w", "theta", "n", "q", "m")

# trace/test component paired with each displacement point load
CONJUGATE_STRESS = {"u": "n", "w": "q", "theta": "m"}


@dataclass(frozen=True)
class TrigTerm:
    """amplitude * kind(frequency*x + phase), kind in {cos, sin}."""

    amplitude: float
    frequency: float
    phase: float = 0.0
    kind: str = "cos"

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ValueError(f"trig kind must be 'cos' or 'sin', got {self.kind!r}")
        if self.frequency == 0.0:
            raise ValueError("zero-frequency trig term; fold constants into the polynomial part")

    def __call__(self, x):
        fn = np.cos if self.kind == "cos" else np.sin
        return self.amplitude * fn(self.frequency * np.asarray(x, dtype=float) + self.phase)

    def derivative(self) -> "TrigTerm":
        a, f, p = self.amplitude, self.frequency, self.phase
        if self.kind == "cos":
            return TrigTerm(-a * f, f, p, "sin")
        return TrigTerm(a * f, f, p, "cos")

    def antiderivative(self) -> "TrigTerm":
        a, f, p = self.amplitude, self.frequency, self.phase
        if self.kind == "cos":
            return TrigTerm(a / f, f, p, "sin")
        return TrigTerm(-a / f, f, p, "cos")

    def reflect(self) -> "TrigTerm":
        # kind(f*(1-x)+p) = kind(-(f*x - f - p)); cos is even, sin is odd
        a, f, p = self.amplitude, self.frequency, self.phase
        if self.kind == "cos":
            return TrigTerm(a, f, -(f + p), "cos")
        return TrigTerm(-a, f, -(f + p), "sin")


@dataclass(frozen=True)
class Expr:
    """Sum of a polynomial (ascending coefficients) and trig terms.

    ``reflected`` marks lazy composition with x -> 1-x so that mirroring a
    problem twice restores it bit for bit.
    """

    poly: tuple = ()
    trig: tuple = ()
    reflected: bool = False

    @staticmethod
    def zero() -> "Expr":
        return Expr()

    @staticmethod
    def polynomial(*coeffs: float) -> "Expr":
        return Expr(poly=tuple(float(c) for c in coeffs))

    @staticmethod
    def cosine(amplitude=1.0, frequency=1.0, phase=0.0) -> "Expr":
        return Expr(trig=(TrigTerm(amplitude, frequency, phase, "cos"),))

    @staticmethod
    def sine(amplitude=1.0, frequency=1.0, phase=0.0) -> "Expr":
        return Expr(trig=(TrigTerm(amplitude, frequency, phase, "sin"),))

    @property
    def is_zero(self) -> bool:
        return not self.trig and all(c == 0.0 for c in self.poly)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.reflected:
            x = 1.0 - x
        out = npoly.polyval(x, self.poly) if self.poly else np.zeros_like(x)
        for t in self.trig:
            out = out + t(x)
        return out

    def __neg__(self) -> "Expr":
        return Expr(
            poly=tuple(-c for c in self.poly),
            trig=tuple(replace(t, amplitude=-t.amplitude) for t in self.trig),
            reflected=self.reflected,
        )

    def __mul__(self, scalar: float) -> "Expr":
        s = float(scalar)
        return Expr(
            poly=tuple(s * c for c in self.poly),
            trig=tuple(replace(t, amplitude=s * t.amplitude) for t in self.trig),
            reflected=self.reflected,
        )

    __rmul__ = __mul__

    def __add__(self, other: "Expr") -> "Expr":
        if not isinstance(other, Expr):
            return NotImplemented
        a, b = self, other
        if a.reflected != b.reflected:
            a = a.materialized()
            b = b.materialized()
        n = max(len(a.poly), len(b.poly))
        poly = tuple(
            (a.poly[i] if i < len(a.poly) else 0.0) + (b.poly[i] if i < len(b.poly) else 0.0)
            for i in range(n)
        )
        return Expr(poly=poly, trig=a.trig + b.trig, reflected=a.reflected)

    def __sub__(self, other: "Expr") -> "Expr":
        return self + (-other)

    def derivative(self) -> "Expr":
        base = Expr(
            poly=tuple(npoly.polyder(self.poly)) if len(self.poly) > 1 else (),
            trig=tuple(t.derivative() for t in self.trig),
        )
        if self.reflected:
            # d/dx f(1-x) = -f'(1-x)
            return Expr(poly=(-base).poly, trig=(-base).trig, reflected=True)
        return base

    def antiderivative(self) -> "Expr":
        """Antiderivative vanishing at x = 0."""
        if self.reflected:
            # int_0^x f(1-t) dt = F(1) - F(1-x) with F the base antiderivative
            base = Expr(self.poly, self.trig).antiderivative()
            shifted = -base + Expr.polynomial(float(base(1.0)))
            return Expr(poly=shifted.poly, trig=shifted.trig, reflected=True)
        poly = tuple(npoly.polyint(self.poly)) if self.poly else ()
        trig = tuple(t.antiderivative() for t in self.trig)
        out = Expr(poly=poly, trig=trig)
        c0 = float(out(0.0))
        if c0 != 0.0:
            p = list(out.poly) if out.poly else [0.0]
            p[0] -= c0
            out = Expr(poly=tuple(p), trig=trig)
        return out

    def reflect(self) -> "Expr":
        """Compose with x -> 1-x (lazily; an exact involution)."""
        return replace(self, reflected=not self.reflected)

    def materialized(self) -> "Expr":
        """Fold a pending reflection into the coefficients."""
        if not self.reflected:
            return self
        poly = ()
        if self.poly:
            # p(1-x) via repeated multiplication by (1 - x)
            acc = np.zeros(len(self.poly))
            power = np.array([1.0])
            for c in self.poly:
                acc[: len(power)] += c * power
                power = npoly.polymul(power, [1.0, -1.0])
            poly = tuple(acc)
        return Expr(poly=poly, trig=tuple(t.reflect() for t in self.trig))

    def to_dict(self) -> dict:
        e = self.materialized()
        d: dict = {}
        if e.poly:
            d["poly"] = list(e.poly)
        if e.trig:
            d["trig"] = [
                {"kind": t.kind, "amplitude": t.amplitude, "frequency": t.frequency, "phase": t.phase}
                for t in e.trig
            ]
        return d

    @staticmethod
    def from_dict(d: dict) -> "Expr":
        poly = tuple(float(c) for c in d.get("poly", ()))
        trig = tuple(
            TrigTerm(float(t["amplitude"]), float(t["frequency"]),
                     float(t.get("phase", 0.0)), t.get("kind", "cos"))
            for t in d.get("trig", ())
        )
        return Expr(poly=poly, trig=trig)


@dataclass(frozen=True)
class PointLoad:
    """Dirac load at a domain endpoint acting on a displacement component."""

    endpoint: int
    component: str
    magnitude: float

    def __post_init__(self):
        if self.endpoint not in (0, 1):
            raise ValueError("point loads are allowed at endpoints 0 and 1 only")
        if self.component not in ("u", "w", "theta"):
            raise ValueError(f"point load component must be u, w or theta, got {self.component!r}")

    def mirrored(self) -> "PointLoad":
        sign = -1.0 if self.component in ("u", "theta") else 1.0
        return PointLoad(1 - self.endpoint, self.component, sign * self.magnitude)


@dataclass(frozen=True)
class LoadSpec:
    """Distributed loads f_u, f_w plus endpoint point loads.

    ``extra`` carries optional volume data for the remaining test components
    (theta, n, q, m); it is verification plumbing for manufactured solutions
    and is not part of the CLI configuration surface.
    """

    distributed_u: Expr = field(default_factory=Expr.zero)
    distributed_w: Expr = field(default_factory=Expr.zero)
    point_loads: tuple = ()
    extra: tuple = ()  # ((component, Expr), ...) with component in theta/n/q/m

    def __post_init__(self):
        for comp, _ in self.extra:
            if comp not in ("theta", "n", "q", "m"):
                raise ValueError(f"extra load data allowed for theta/n/q/m only, got {comp!r}")

    def volume_data(self) -> dict:
        """Distributed data keyed by the test component it is paired with."""
        data = {"u": self.distributed_u, "w": self.distributed_w}
        for comp, expr in self.extra:
            data[comp] = data.get(comp, Expr.zero()) + expr
        return {c: e for c, e in data.items() if not e.is_zero}

    def scaled(self, factor: float) -> "LoadSpec":
        return LoadSpec(
            distributed_u=self.distributed_u * factor,
            distributed_w=self.distributed_w * factor,
            point_loads=tuple(replace(p, magnitude=factor * p.magnitude) for p in self.point_loads),
            extra=tuple((c, e * factor) for c, e in self.extra),
        )

    def mirrored(self) -> "LoadSpec":
        # u- and theta-tested data flip sign under x -> 1-x; w-tested does not.
        flip = {"theta": -1.0, "n": 1.0, "q": -1.0, "m": 1.0}
        return LoadSpec(
            distributed_u=-(self.distributed_u.reflect()),
            distributed_w=self.distributed_w.reflect(),
            point_loads=tuple(p.mirrored() for p in self.point_loads),
            extra=tuple((c, e.reflect() * flip[c]) for c, e in self.extra),
        )
