"""Witness functions that are not one of the document model kinds."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..models import FunctionModel


@dataclass(frozen=True)
class LipschitzExtension(FunctionModel):
    """Upper (or lower) McShane extension of node values, clipped to [-1, 1]."""

    nodes: np.ndarray = field(compare=False)
    values: np.ndarray = field(compare=False)
    L: float = 1.0
    upper: bool = True

    kind = "lipschitz-extension"

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        D = np.linalg.norm(X[:, None, :] - self.nodes[None, :, :], axis=2)
        if self.upper:
            v = np.min(self.values[None, :] + self.L * D, axis=1)
        else:
            v = np.max(self.values[None, :] - self.L * D, axis=1)
        return np.clip(v, -1.0, 1.0)

    def gradient(self, x0):
        return None

    def to_json(self):
        return {"kind": self.kind, "nodes": self.nodes.tolist(), "values": self.values.tolist(),
                "L": self.L, "upper": self.upper}


def bump(t: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - t^2)) on |t| < 1, zero outside; equals 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


@dataclass(frozen=True)
class BumpSum(FunctionModel):
    """sum_k (a_k + b_k.(x - c_k)) * bump(||x - c_k|| / rho); supports disjoint."""

    centers: np.ndarray = field(compare=False)
    offsets: np.ndarray = field(compare=False)
    slopes: np.ndarray = field(compare=False)
    rho: float = 1.0

    kind = "bump-sum"

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        H = X[:, None, :] - self.centers[None, :, :]
        r = np.linalg.norm(H, axis=2) / self.rho
        lin = self.offsets[None, :] + np.einsum("nkd,kd->nk", H, self.slopes)
        return np.sum(lin * bump(r), axis=1)

    def gradient(self, x0):
        x = np.asarray(x0, dtype=float)
        h = x[None, :] - self.centers
        r = np.linalg.norm(h, axis=1) / self.rho
        g = np.zeros(self.d)
        for k in range(len(self.centers)):
            if r[k] >= 1:
                continue
            psi = float(bump(np.array([r[k]]))[0])
            # d psi / dx = psi * (-2 t / (1 - t^2)^2) * (h / (rho^2 t)) = -2 psi h / (rho^2 (1 - t^2)^2)
            dpsi = -2.0 * psi * h[k] / (self.rho ** 2 * (1 - r[k] ** 2) ** 2)
            g += self.slopes[k] * psi + (self.offsets[k] + self.slopes[k] @ h[k]) * dpsi
        return g

    def to_json(self):
        return {"kind": self.kind, "centers": self.centers.tolist(), "offsets": self.offsets.tolist(),
                "slopes": self.slopes.tolist(), "rho": self.rho}


@dataclass(frozen=True)
class PeakPolynomial(FunctionModel):
    """sum_k (a_k + b_k.(x - c_k)) * (1 - ||x - c_k||^2 / D^2)^m, a polynomial of degree 2m + 1."""

    centers: np.ndarray = field(compare=False)
    offsets: np.ndarray = field(compare=False)
    slopes: np.ndarray = field(compare=False)
    D: float = 1.0
    m: int = 1

    kind = "peak-polynomial"

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def degree(self) -> int:
        return 2 * self.m + 1

    def _basis(self, X):
        H = X[:, None, :] - self.centers[None, :, :]
        u = 1.0 - np.sum(H * H, axis=2) / self.D ** 2
        return H, u

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        H, u = self._basis(X)
        phi = np.sign(u) ** self.m * np.exp(self.m * np.log(np.abs(u) + 1e-300))
        lin = self.offsets[None, :] + np.einsum("nkd,kd->nk", H, self.slopes)
        return np.sum(lin * phi, axis=1)

    def gradient(self, x0):
        X = np.asarray(x0, dtype=float)[None, :]
        H, u = self._basis(X)
        H, u = H[0], u[0]
        g = np.zeros(self.d)
        for k in range(len(self.centers)):
            phi = u[k] ** self.m
            dphi = -2.0 * self.m * H[k] / self.D ** 2 * u[k] ** (self.m - 1)
            g += self.slopes[k] * phi + (self.offsets[k] + self.slopes[k] @ H[k]) * dphi
        return g

    def to_json(self):
        return {"kind": self.kind, "centers": self.centers.tolist(), "offsets": self.offsets.tolist(),
                "slopes": self.slopes.tolist(), "D": self.D, "m": self.m}


def huber(h: np.ndarray, tau: float) -> np.ndarray:
    """Radial Huber function: ||h||^2/2 inside radius tau, linear growth outside."""
    r = np.linalg.norm(np.atleast_2d(h), axis=1)
    return np.where(r <= tau, 0.5 * r * r, tau * r - 0.5 * tau * tau)


@dataclass(frozen=True)
class TaylorHuber(FunctionModel):
    """y0 + v.(x - x0) + gamma * huber(x - x0, tau)."""

    x0: tuple
    y0: float
    v: tuple
    gamma: float
    tau: float

    kind = "taylor-huber"

    @property
    def d(self) -> int:
        return len(self.x0)

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        H = X - np.array(self.x0)
        return self.y0 + H @ np.array(self.v) + self.gamma * huber(H, self.tau)

    def gradient(self, x0):
        h = np.asarray(x0, dtype=float) - np.array(self.x0)
        r = float(np.linalg.norm(h))
        dh = h if r <= self.tau else self.tau * h / r
        return np.array(self.v) + self.gamma * dh

    def to_json(self):
        return {"kind": self.kind, "x0": list(self.x0), "y0": self.y0, "v": list(self.v),
                "gamma": self.gamma, "tau": self.tau}
