"""Benchmark models: analytical ridge function, 2-D additive function, borehole, piston."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .orthobasis import Gaussian, Uniform, sample_inputs

RIDGE_GENERATOR = np.array([
    [2.0, 3.0, 1.0, -4.0, 1.0, 0.1],
    [-3.0, 1.0, -2.0, 1.0, -1.0, -0.3],
]).T


@dataclass
class BenchmarkModel:
    name: str
    families: list
    names: list
    func: Callable[[np.ndarray], np.ndarray]
    units: list = field(default_factory=list)
    descriptions: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return len(self.families)

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"{self.name} expects {self.dim} inputs, got {X.shape[1]}")
        return self.func(X)

    def sample(self, n, rng):
        return sample_inputs(self.families, n, rng)

    def spec(self):
        rows = []
        for k, fam in enumerate(self.families):
            row = {"name": self.names[k], **fam.to_dict()}
            if self.units:
                row["unit"] = self.units[k]
            if self.descriptions:
                row["description"] = self.descriptions[k]
            rows.append(row)
        return {"model": self.name, "dim": self.dim, "inputs": rows, "params": self.params}


def ridge_subspaces():
    """Orthonormal bases (U, W) of the column space and left null space of the generator.

    Householder QR of the 6 x 2 generator; columns of U are sign-fixed so
    that the triangular factor has a positive diagonal.
    """
    Q, R = np.linalg.qr(RIDGE_GENERATOR, mode="complete")
    signs = np.sign(np.diag(R))
    U = Q[:, :2] * signs
    W = Q[:, 2:]
    return U, W


def _quartic_ridge(v1, v2):
    return v1**2 - 0.1 * v2**2 - 2.0 * v1**2 * v2**2 + 2.0 * v1 * v2


def analytical_ridge(s=0.0):
    if s < 0:
        raise ConfigError("s must be non-negative")
    U, W = ridge_subspaces()

    def f(X):
        u = X @ U
        out = _quartic_ridge(u[:, 0], u[:, 1])
        if s:
            w = X @ W
            out = out + s * _quartic_ridge(w[:, 0], w[:, 1])
        return out

    return BenchmarkModel("analytical_ridge", [Uniform(-1.0, 1.0)] * 6,
                          [f"x{i}" for i in range(1, 7)], f, ["-"] * 6, params={"s": s})


def additive_2d():
    def f(X):
        return -X[:, 0] * (X[:, 0] - 2.0) + X[:, 1] ** 4

    return BenchmarkModel("additive_2d", [Uniform(0.0, 1.0)] * 2, ["x1", "x2"], f, ["-", "-"])


def borehole_flow(X):
    rw, r, Tu, Hu, Tl, Hl, L, Kw = X.T
    log_ratio = np.log(r / rw)
    return 2.0 * np.pi * Tu * (Hu - Hl) / (
        log_ratio * (1.0 + 2.0 * L * Tu / (log_ratio * rw**2 * Kw) + Tu / Tl))


def borehole():
    fams = [Gaussian(0.10, 0.0161812), Uniform(100.0, 50000.0), Uniform(63070.0, 115600.0),
            Uniform(990.0, 1110.0), Uniform(63.1, 116.0), Uniform(700.0, 820.0),
            Uniform(1120.0, 1680.0), Uniform(1500.0, 15000.0)]
    names = ["r_w", "r", "T_u", "H_u", "T_l", "H_l", "L", "K_w"]
    units = ["m", "m", "m^2/yr", "m", "m^2/yr", "m", "m", "m/yr"]
    desc = ["Radius of borehole", "Radius of influence", "Transmissivity of upper aquifer",
            "Potentiometric head of upper aquifer", "Transmissivity of lower aquifer",
            "Potentiometric head of lower aquifer", "Length of borehole",
            "Hydraulic conductivity of borehole"]
    return BenchmarkModel("borehole", fams, names, borehole_flow, units, desc)


def piston_cycle_time(X):
    """Cycle time; the input V is the initial gas volume V0."""
    M, S, V0, k, P0, Ta, T0 = X.T
    A = P0 * S + 19.62 * M - k * V0 / S
    V = S / (2.0 * k) * (np.sqrt(A**2 + 4.0 * k * (P0 * V0 / T0) * Ta) - A)
    return 2.0 * np.pi * np.sqrt(M / (k + S**2 * P0 * V0 * Ta / (T0 * V**2)))


def piston():
    fams = [Uniform(30.0, 60.0), Uniform(0.005, 0.020), Uniform(0.002, 0.010),
            Uniform(1000.0, 5000.0), Uniform(90000.0, 110000.0), Uniform(290.0, 296.0),
            Uniform(340.0, 360.0)]
    names = ["M", "S", "V", "k", "P_0", "T_a", "T_0"]
    units = ["kg", "m^2", "m^3", "N/m", "N/m^2", "K", "K"]
    desc = ["Piston mass", "Piston surface area", "Initial gas volume", "Spring coefficient",
            "Atmospheric pressure", "Ambient temperature", "Filling gas temperature"]
    return BenchmarkModel("piston", fams, names, piston_cycle_time, units, desc)


MODELS = {
    "analytical_ridge": analytical_ridge,
    "additive_2d": additive_2d,
    "borehole": borehole,
    "piston": piston,
}


def get_model(name, **params):
    try:
        factory = MODELS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(**params)
