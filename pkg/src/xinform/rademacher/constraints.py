"""Constraint records describing membership of a candidate function in the
prediction-consistent or explanation-consistent subclass, plus labeled samples
and solver results."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..geometry import AxisBox, UniformBox, as_point, distribution_from_json


def _tup(p) -> tuple:
    return tuple(float(v) for v in as_point(p))


def _finite(*vals):
    for v in vals:
        if not math.isfinite(v):
            raise DomainError("bad-constraint", "constraint fields must be finite")


@dataclass(frozen=True)
class ValueAt:
    point: tuple
    value: float
    kind = "value-at"

    def __post_init__(self):
        object.__setattr__(self, "point", _tup(self.point))
        object.__setattr__(self, "value", float(self.value))
        _finite(self.value)

    def to_json(self):
        return {"kind": self.kind, "point": list(self.point), "value": self.value}


@dataclass(frozen=True)
class GradientAt:
    point: tuple
    vector: tuple
    kind = "gradient-at"

    def __post_init__(self):
        object.__setattr__(self, "point", _tup(self.point))
        object.__setattr__(self, "vector", _tup(self.vector))

    def to_json(self):
        return {"kind": self.kind, "point": list(self.point), "vector": list(self.vector)}


@dataclass(frozen=True)
class TopComponentAt:
    point: tuple
    index: int  # 0-based
    magnitude: float
    kind = "top-component-at"

    def __post_init__(self):
        object.__setattr__(self, "point", _tup(self.point))
        object.__setattr__(self, "magnitude", float(self.magnitude))
        _finite(self.magnitude)
        if not 0 <= self.index < len(self.point) or self.magnitude < 0:
            raise DomainError("bad-constraint", "top component needs a valid index and a non-negative magnitude")

    def to_json(self):
        return {"kind": self.kind, "point": list(self.point), "index": self.index + 1, "magnitude": self.magnitude}


@dataclass(frozen=True)
class MeanEquals:
    value: float
    dist: object
    kind = "mean-equals"

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        _finite(self.value)

    def to_json(self):
        return {"kind": self.kind, "value": self.value, "dist": self.dist.to_json()}


@dataclass(frozen=True)
class ShapEquals:
    """SHAP vector at a point; partial coalitions use `ambient` when set."""

    point: tuple
    vector: tuple
    dist: object
    ambient: UniformBox | None = None
    kind = "shap-equals"

    def __post_init__(self):
        object.__setattr__(self, "point", _tup(self.point))
        object.__setattr__(self, "vector", _tup(self.vector))

    def to_json(self):
        doc = {"kind": self.kind, "point": list(self.point), "vector": list(self.vector), "dist": self.dist.to_json()}
        if self.ambient is not None:
            doc["ambient"] = self.ambient.to_json()
        return doc


@dataclass(frozen=True)
class AnchorHolds:
    """Precision of `rule` for the label `label` (the prediction at `point`)."""

    rule: AxisBox
    precision: float
    point: tuple
    label: int
    dist: object
    equality: bool = True
    kind = "anchor-holds"

    def __post_init__(self):
        object.__setattr__(self, "point", _tup(self.point))
        object.__setattr__(self, "precision", float(self.precision))
        if not 0 <= self.precision <= 1 or self.label not in (-1, 1):
            raise DomainError("bad-constraint", "anchor precision must lie in [0, 1] and the label must be +-1")
        if not self.rule.contains(self.point):
            raise DomainError("bad-constraint", "the anchor rule must contain its point")

    def to_json(self):
        return {"kind": self.kind, "rule": self.rule.to_json(), "precision": self.precision,
                "point": list(self.point), "label": self.label, "dist": self.dist.to_json(),
                "equality": self.equality}


@dataclass(frozen=True)
class SignAt:
    point: tuple
    sign: int
    kind = "sign-at"

    def __post_init__(self):
        object.__setattr__(self, "point", _tup(self.point))
        if self.sign not in (-1, 1):
            raise DomainError("bad-constraint", "sign must be +1 or -1")

    def to_json(self):
        return {"kind": self.kind, "point": list(self.point), "sign": self.sign}


@dataclass(frozen=True)
class SignOnBall:
    center: tuple
    radius: float
    sign: int
    kind = "sign-on-ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _tup(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0 or self.sign not in (-1, 1):
            raise DomainError("bad-constraint", "ball radius must be positive and the sign +-1")

    def to_json(self):
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius, "sign": self.sign}


@dataclass(frozen=True)
class LocallyStableGradient:
    point: tuple
    vector: tuple
    r: float
    delta: float
    kind = "locally-stable-gradient"

    def __post_init__(self):
        object.__setattr__(self, "point", _tup(self.point))
        object.__setattr__(self, "vector", _tup(self.vector))
        if not (self.r > 0 and self.delta > 0):
            raise DomainError("bad-constraint", "r and delta must be positive")

    def to_json(self):
        return {"kind": self.kind, "point": list(self.point), "vector": list(self.vector), "r": self.r, "delta": self.delta}


Constraint = (ValueAt | GradientAt | TopComponentAt | MeanEquals | ShapEquals | AnchorHolds
              | SignAt | SignOnBall | LocallyStableGradient)


def constraint_from_json(doc: dict):
    kind = doc.get("kind")
    try:
        if kind == "value-at":
            return ValueAt(doc["point"], doc["value"])
        if kind == "gradient-at":
            return GradientAt(doc["point"], doc["vector"])
        if kind == "top-component-at":
            return TopComponentAt(doc["point"], int(doc["index"]) - 1, doc["magnitude"])
        if kind == "mean-equals":
            return MeanEquals(doc["value"], distribution_from_json(doc["dist"]))
        if kind == "shap-equals":
            amb = distribution_from_json(doc["ambient"]) if "ambient" in doc else None
            return ShapEquals(doc["point"], doc["vector"], distribution_from_json(doc["dist"]), amb)
        if kind == "anchor-holds":
            return AnchorHolds(AxisBox.from_json(doc["rule"]), doc["precision"], doc["point"], int(doc["label"]),
                               distribution_from_json(doc["dist"]), bool(doc.get("equality", True)))
        if kind == "sign-at":
            return SignAt(doc["point"], int(doc["sign"]))
        if kind == "sign-on-ball":
            return SignOnBall(doc["center"], doc["radius"], int(doc["sign"]))
        if kind == "locally-stable-gradient":
            return LocallyStableGradient(doc["point"], doc["vector"], doc["r"], doc["delta"])
    except KeyError as exc:
        raise DomainError("bad-document", f"constraint {kind!r} is missing field {exc}") from exc
    raise DomainError("bad-document", f"unknown constraint kind {kind!r}")


def constraints_to_json(cs) -> list:
    return [c.to_json() for c in cs]


def constraints_from_json(docs) -> list:
    return [constraint_from_json(d) for d in docs]


@dataclass(frozen=True)
class LabeledSample:
    points: np.ndarray = field(compare=False)
    sigma: np.ndarray = field(compare=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.points, dtype=float))
        s = np.asarray(self.sigma, dtype=int).reshape(-1)
        if X.shape[0] != s.size or s.size < 1:
            raise DomainError("bad-sample", "points and labels must have the same positive length")
        if not np.all(np.isin(s, (-1, 1))):
            raise DomainError("bad-sample", "labels must be +-1")
        X.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "sigma", s)

    @property
    def n(self) -> int:
        return self.sigma.size

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def correlation(self, values) -> float:
        return float(np.dot(self.sigma, np.asarray(values, dtype=float)) / self.n)


@dataclass(frozen=True)
class SupResult:
    kind: str  # "exact" or "bracket"
    lower: float
    upper: float
    witness: object = field(default=None, compare=False)

    @classmethod
    def exact(cls, value: float, witness=None) -> "SupResult":
        return cls("exact", float(value), float(value), witness)

    @classmethod
    def bracket(cls, lower: float, upper: float, witness=None) -> "SupResult":
        lower, upper = float(lower), float(upper)
        if lower > upper:
            # rounding in independent bound computations; both are valid bounds
            if lower - upper > 1e-9:
                raise AssertionError(f"bracket lower {lower} exceeds upper {upper}")
            lower = upper
        return cls("bracket", lower, upper, witness)

    @property
    def value(self) -> float:
        if self.kind != "exact":
            raise DomainError("bracket", "a bracket has no single value")
        return self.lower

    def to_json(self) -> dict:
        if self.kind == "exact":
            return {"kind": "exact", "value": self.lower}
        return {"kind": "bracket", "lower": self.lower, "upper": self.upper}


def split_constraints(constraints):
    """Group constraints by kind, preserving order."""
    out = {}
    for c in constraints:
        out.setdefault(c.kind, []).append(c)
    return out


def value_at_point(constraints, x) -> float | None:
    for c in constraints:
        if isinstance(c, ValueAt) and np.array_equal(np.array(c.point), np.asarray(x, dtype=float)):
            return c.value
    return None
