"""Causal mechanisms: linear weights, random Fourier feature functions, noise laws,
and the two weight-rescaling heuristics for taming variance accumulation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCalibration, DimensionMismatch, InvalidParameter
from .graphs import Dag


@dataclass(frozen=True)
class Gaussian:
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidParameter("Gaussian variance must be positive")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, math.sqrt(self.variance), size=n)

    def to_json(self) -> dict:
        return {"law": "gaussian", "variance": self.variance}


@dataclass(frozen=True)
class UniformSymmetric:
    half_width: float = math.sqrt(3.0)

    def __post_init__(self):
        if not self.half_width > 0:
            raise InvalidParameter("half-width must be positive")

    @property
    def variance(self) -> float:
        return self.half_width ** 2 / 3.0

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=n)

    def to_json(self) -> dict:
        return {"law": "uniform", "half_width": self.half_width}


NoiseSpec = Gaussian | UniformSymmetric


def noise_from_json(obj: dict) -> NoiseSpec:
    law = obj.get("law", "gaussian")
    if law == "gaussian":
        return Gaussian(float(obj.get("variance", 1.0)))
    if law == "uniform":
        if "half_width" in obj:
            return UniformSymmetric(float(obj["half_width"]))
        return UniformSymmetric(math.sqrt(3.0 * float(obj.get("variance", 1.0))))
    raise InvalidParameter(f"unknown noise law {law!r}")


def sample_noise(spec: NoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise InvalidParameter("n must be non-negative")
    return spec.sample(n, rng)


def _check_range(lo: float, hi: float, name: str) -> None:
    if not (0 < lo <= hi):
        raise InvalidParameter(f"{name} must satisfy 0 < a <= b, got [{lo}, {hi}]")


def sample_linear_weights(dag: Dag, support, rng: np.random.Generator) -> np.ndarray:
    """Weights ``s * u`` with s uniform on {-1, +1} and u ~ Unif[a, b], one per edge.

    Entry ``W[i, j]`` is the weight of edge i -> j; zero off the edge set.
    """
    a, b = support
    _check_range(a, b, "weight support")
    W = np.zeros((dag.d, dag.d))
    edges = dag.sorted_edges()
    if not edges:
        return W
    mag = rng.uniform(a, b, size=len(edges))
    sign = rng.choice([-1.0, 1.0], size=len(edges))
    rows, cols = zip(*edges)
    W[list(rows), list(cols)] = sign * mag
    return W


@dataclass(frozen=True)
class RffMechanism:
    """h(x) = c * sqrt(2/M) * sum_m alpha_m cos(omega_m . x / ell + delta_m)."""

    parents: tuple
    c: float
    length_scale: float
    alpha: np.ndarray  # (M,)
    omega: np.ndarray  # (M, |pa|)
    delta: np.ndarray  # (M,)

    @property
    def n_features(self) -> int:
        return self.alpha.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return eval_rff(self, x)

    def to_json(self) -> dict:
        return {
            "parents": [p + 1 for p in self.parents],
            "c": self.c,
            "length_scale": self.length_scale,
            "alpha": self.alpha.tolist(),
            "omega": self.omega.tolist(),
            "delta": self.delta.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RffMechanism":
        M = len(obj["alpha"])
        return cls(
            tuple(p - 1 for p in obj["parents"]),
            float(obj["c"]),
            float(obj["length_scale"]),
            np.asarray(obj["alpha"], dtype=float),
            np.asarray(obj["omega"], dtype=float).reshape(M, -1),
            np.asarray(obj["delta"], dtype=float),
        )


def eval_rff(m: RffMechanism, x) -> np.ndarray:
    """Evaluate at one parent vector (shape ``(p,)``) or a batch (shape ``(n, p)``)."""
    x = np.asarray(x, dtype=float)
    p = m.omega.shape[1]
    if x.shape[-1] != p:
        raise DimensionMismatch(f"mechanism expects {p} parent values, got {x.shape[-1]}")
    phase = x @ m.omega.T / m.length_scale + m.delta
    return m.c * math.sqrt(2.0 / m.n_features) * (np.cos(phase) @ m.alpha)


def sample_rff_mechanisms(
    dag: Dag, ls_range, c_range, rng: np.random.Generator, n_features: int = 100
) -> dict[int, RffMechanism]:
    """One RFF function per non-root node, visited in topological order."""
    _check_range(*ls_range, "length-scale range")
    _check_range(*c_range, "output-scale range")
    if n_features < 1:
        raise InvalidParameter("feature count must be >= 1")
    out = {}
    for j in dag.order:
        pa = dag.parents(j)
        if not pa:
            continue
        ell = rng.uniform(*ls_range)
        c = rng.uniform(*c_range)
        alpha = rng.normal(size=n_features)
        omega = rng.normal(size=(n_features, len(pa)))
        delta = rng.uniform(0.0, 2 * math.pi, size=n_features)
        out[j] = RffMechanism(pa, float(c), float(ell), alpha, omega, delta)
    return out


def mooij_rescale(W: np.ndarray, dag: Dag) -> np.ndarray:
    """Divide each node's incoming weights by sqrt(1 + sum of their squares)."""
    W = np.asarray(W, dtype=float)
    return W / np.sqrt(1.0 + np.sum(W ** 2, axis=0))[None, :]


def squires_rescale(W: np.ndarray, dag: Dag, n_cal: int, rng: np.random.Generator):
    """Calibrate weights so every non-root node has unit variance and CEV 0.5.

    Nodes are visited in topological order. For each node the variance of the
    parents' contribution is estimated from ``n_cal`` calibration samples of the
    already-calibrated upstream system, and the incoming weights are divided by
    sqrt(2 * that variance). Returns the new weights and per-node noise laws:
    unit variance at roots, variance 0.5 elsewhere.
    """
    if n_cal < 2:
        raise InvalidParameter("n_cal must be >= 2")
    W = np.array(W, dtype=float)
    X = np.zeros((n_cal, dag.d))
    noise = []
    for j in range(dag.d):
        noise.append(Gaussian(1.0) if not dag.parents(j) else Gaussian(0.5))
    for j in dag.order:
        pa = list(dag.parents(j))
        if pa:
            contrib = X[:, pa] @ W[pa, j]
            var = contrib.var()
            if not var > 0:
                raise DegenerateCalibration(f"parents of node {j} contribute zero variance")
            W[pa, j] /= math.sqrt(2.0 * var)
            X[:, j] = X[:, pa] @ W[pa, j]
        X[:, j] += noise[j].sample(n_cal, rng)
    return W, noise
