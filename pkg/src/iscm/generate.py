"""Sampling under the raw, post-hoc standardized and internally standardized regimes.

Noise protocol: the noise of every node is drawn as one contiguous block, nodes
visited in topological order, before any mechanism is evaluated. All regimes
consume the stream identically, so one seed gives paired Raw/iSCM datasets.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import analytic
from .errors import (
    DimensionMismatch,
    InvalidParameter,
    MissingStandardizationStats,
    NonFiniteInput,
    PopulationUnavailable,
    ZeroVariance,
)
from .graphs import Dag
from .mechanisms import Gaussian, sample_noise

REGIMES = ("raw", "standardized", "iscm")
MODES = ("population", "empirical")

# f(parent_values (n, p), eps (n,)) -> (n,)
Mechanism = Callable[[np.ndarray, np.ndarray], np.ndarray]


def constant(value: float) -> Mechanism:
    """Hard intervention do(x_i := value) on the latent variable."""
    return lambda pa, eps: np.full(eps.shape[0], float(value))


@dataclass(frozen=True)
class GenerativeSpec:
    """Full description of a data-generating process.

    Exactly one of ``weights`` (linear) or ``rff`` (node -> RffMechanism) is set.
    ``noise`` holds one law per node. ``overrides`` maps nodes to replacement
    mechanisms, and ``stats`` = (mu, s) pins the standardization constants.
    """

    dag: Dag
    weights: np.ndarray | None = None
    rff: dict | None = None
    noise: tuple = ()
    regime: str = "raw"
    standardization: str = "population"
    overrides: dict = field(default_factory=dict)
    stats: tuple | None = None

    def __post_init__(self):
        d = self.dag.d
        if (self.weights is None) == (self.rff is None):
            raise InvalidParameter("set exactly one of weights or rff")
        if self.weights is not None:
            W = np.asarray(self.weights, dtype=float)
            if W.shape != (d, d):
                raise DimensionMismatch(f"weight matrix must be {d}x{d}")
            if np.any((W != 0) & ~self.dag.adjacency()):
                raise InvalidParameter("weights are nonzero off the edge set")
            object.__setattr__(self, "weights", W)
        else:
            for j in range(d):
                pa = self.dag.parents(j)
                if pa and (j not in self.rff or tuple(self.rff[j].parents) != pa):
                    raise InvalidParameter(f"node {j} lacks a matching RFF mechanism")
        noise = self.noise
        if noise == () or noise is None:
            noise = Gaussian(1.0)
        if not isinstance(noise, (tuple, list)):
            noise = (noise,) * d
        if len(noise) != d:
            raise DimensionMismatch(f"need {d} noise laws, got {len(noise)}")
        object.__setattr__(self, "noise", tuple(noise))
        if self.regime not in REGIMES:
            raise InvalidParameter(f"regime must be one of {REGIMES}")
        if self.standardization not in MODES:
            raise InvalidParameter(f"standardization must be one of {MODES}")
        if self.standardization == "population" and self.rff is not None and self.regime == "iscm":
            raise PopulationUnavailable("population standardization needs linear mechanisms")
        for k in self.overrides:
            if not 0 <= k < d:
                raise InvalidParameter(f"intervened node {k} out of range")

    @property
    def is_linear(self) -> bool:
        return self.weights is not None

    def linear_scm(self) -> analytic.LinearScm:
        if not self.is_linear:
            raise PopulationUnavailable("no closed-form moments for RFF mechanisms")
        return analytic.LinearScm(self.dag, self.weights, [z.variance for z in self.noise])

    def to_json(self) -> dict:
        out = {"regime": self.regime, "graph": self.dag.to_json()}
        if self.is_linear:
            out["weights"] = self.weights.tolist()
        else:
            out["rff"] = {str(j + 1): m.to_json() for j, m in sorted(self.rff.items())}
        out["noise"] = [z.to_json() for z in self.noise]
        if self.regime != "raw":
            out["standardization"] = self.standardization
        if self.overrides:
            out["intervened"] = sorted(k + 1 for k in self.overrides)
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Dataset:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionMismatch("dataset values must be an n x d matrix")
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("dataset contains NaN or Inf")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def draw_noise(spec: GenerativeSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    eps = np.empty((n, spec.dag.d))
    for i in spec.dag.order:
        eps[:, i] = sample_noise(spec.noise[i], n, rng)
    return eps


def sample_linear(dag: Dag, W: np.ndarray, eps: np.ndarray, scale=None) -> np.ndarray:
    """x_i = W[:, i]' x + scale_i * eps_i along the topological order."""
    X = np.zeros_like(eps)
    for i in dag.order:
        pa = list(dag.parents(i))
        e = eps[:, i] if scale is None else eps[:, i] * scale[i]
        X[:, i] = (X[:, pa] @ W[pa, i] + e) if pa else e
    return X


def _latent(spec: GenerativeSpec, i: int, pa_vals: np.ndarray, eps: np.ndarray) -> np.ndarray:
    if i in spec.overrides:
        out = np.asarray(spec.overrides[i](pa_vals, eps), dtype=float)
        if out.shape != eps.shape:
            raise DimensionMismatch(f"intervention on node {i} returned shape {out.shape}")
        return out
    pa = spec.dag.parents(i)
    if not pa:
        return eps.copy()
    if spec.is_linear:
        return pa_vals @ spec.weights[list(pa), i] + eps
    return spec.rff[i](pa_vals) + eps


def _forward(spec: GenerativeSpec, eps: np.ndarray, standardize: str | None):
    """Generic ancestral pass; ``standardize`` is None, "batch" or "fixed".

    Returns the output matrix and the per-node (mean, std) actually applied.
    """
    n, d = eps.shape
    X = np.zeros_like(eps)
    mu = np.zeros(d)
    sd = np.ones(d)
    for i in spec.dag.order:
        pa = list(spec.dag.parents(i))
        z = _latent(spec, i, X[:, pa], eps[:, i])
        if standardize == "batch":
            mu[i] = z.mean()
            sd[i] = z.std()
            if not sd[i] > 0:
                raise ZeroVariance(f"latent variable {i} has zero batch variance")
        elif standardize == "fixed":
            mu[i], sd[i] = spec.stats[0][i], spec.stats[1][i]
        if standardize is not None:
            z = (z - mu[i]) / sd[i]
        X[:, i] = z
    return X, mu, sd


def _meta(spec: GenerativeSpec, regime: str, seed) -> dict:
    return {"seed": seed, "regime": regime, "fingerprint": spec.fingerprint()}


def _check_n(n: int, least: int = 1) -> None:
    if n < least:
        raise InvalidParameter(f"need n >= {least}, got {n}")


def sample_raw(spec: GenerativeSpec, n: int, rng: np.random.Generator, seed=None) -> Dataset:
    _check_n(n)
    eps = draw_noise(spec, n, rng)
    if spec.is_linear and not spec.overrides:
        X = sample_linear(spec.dag, spec.weights, eps)
    else:
        X, _, _ = _forward(spec, eps, None)
    return Dataset(X, _meta(spec, "raw", seed))


def standardize_posthoc(ds: Dataset) -> Dataset:
    """Z-score every column with the divide-by-n variance estimator."""
    X = ds.values
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    if np.any(~(sd > 0)):
        bad = np.flatnonzero(~(sd > 0)).tolist()
        raise ZeroVariance(f"constant columns: {bad}")
    Z = (X - mu) / sd
    meta = dict(ds.meta)
    meta["regime"] = "standardized"
    return Dataset(Z, meta)


def population_stats(spec: GenerativeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Observational (mean, std) used by the standardization step of ``spec.regime``.

    Noise laws are centered, so every linear variable has mean zero.
    """
    m = spec.linear_scm()
    if spec.regime == "iscm":
        var = analytic.implied_iscm(m).marginal_var
    else:
        var = np.diag(analytic.covariance_of(m))
    return np.zeros(spec.dag.d), np.sqrt(var)


def sample_iscm(spec: GenerativeSpec, n: int, rng: np.random.Generator, seed=None) -> Dataset:
    """Internally standardized sampling.

    Each latent x_i = f_i(standardized parents) + eps_i is standardized before
    its children see it: with batch statistics (empirical), closed-form moments
    (population, linear only), or fixed observational statistics after an
    intervention.
    """
    eps_needed = 2 if spec.standardization == "empirical" and spec.stats is None else 1
    _check_n(n, eps_needed)
    eps = draw_noise(spec, n, rng)
    if spec.stats is not None:
        X, _, _ = _forward(spec, eps, "fixed")
    elif spec.standardization == "empirical":
        X, _, _ = _forward(spec, eps, "batch")
    else:
        if spec.overrides:
            raise MissingStandardizationStats("interventions need fixed statistics")
        imp = analytic.implied_iscm(spec.linear_scm())
        X = sample_linear(spec.dag, imp.weights, eps, imp.noise_scale)
    return Dataset(X, _meta(spec, "iscm", seed))


def sample_standardized_scm(spec: GenerativeSpec, n: int, rng: np.random.Generator, seed=None) -> Dataset:
    """Raw sampling followed by post-hoc z-scoring (fixed statistics if pinned)."""
    raw = sample_raw(spec, n, rng, seed)
    if spec.stats is None:
        return standardize_posthoc(raw)
    mu, sd = spec.stats
    return Dataset((raw.values - mu) / sd, _meta(spec, "standardized", seed))


def sample(spec: GenerativeSpec, n: int, rng: np.random.Generator, seed=None) -> Dataset:
    if spec.regime == "raw":
        return sample_raw(spec, n, rng, seed)
    if spec.regime == "standardized":
        return sample_standardized_scm(spec, n, rng, seed)
    return sample_iscm(spec, n, rng, seed)


def observational_stats(spec: GenerativeSpec, rng: np.random.Generator | None = None,
                        n_pilot: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Standardization constants of the unintervened system.

    Closed form for linear population mode, otherwise estimated from an
    observational pilot sample of size ``n_pilot``.
    """
    base = replace(spec, overrides={}, stats=None)
    if base.is_linear and base.standardization == "population":
        return population_stats(base)
    if rng is None:
        raise MissingStandardizationStats("a pilot sample needs a random stream")
    _check_n(n_pilot, 2)
    eps = draw_noise(base, n_pilot, rng)
    if base.regime == "iscm":
        _, mu, sd = _forward(base, eps, "batch")
        return mu, sd
    X, _, _ = _forward(base, eps, None)
    return X.mean(axis=0), X.std(axis=0)


def apply_intervention(spec: GenerativeSpec, node: int, new_mechanism: Mechanism,
                       rng: np.random.Generator | None = None, n_pilot: int = 10_000,
                       stats=None) -> GenerativeSpec:
    """Replace f_node while keeping standardization at observational values.

    ``stats`` may supply (mu, s) directly; otherwise they are computed from the
    unintervened spec (analytically, or from a pilot sample drawn from ``rng``).
    """
    if not 0 <= node < spec.dag.d:
        raise InvalidParameter(f"node {node} out of range")
    if spec.regime != "raw" and stats is None:
        stats = spec.stats if spec.stats is not None else observational_stats(spec, rng, n_pilot)
    if stats is not None:
        mu, sd = (np.asarray(a, dtype=float) for a in stats)
        if mu.shape != (spec.dag.d,) or sd.shape != (spec.dag.d,):
            raise DimensionMismatch("standardization statistics must have length d")
        stats = (mu, sd)
    overrides = dict(spec.overrides)
    overrides[node] = new_mechanism
    return replace(spec, overrides=overrides, stats=stats)


def write_dataset(ds: Dataset, spec: GenerativeSpec, stem) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (17 significant digits) and the ``<stem>.json`` sidecar."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    header = ",".join(f"x{i + 1}" for i in range(ds.d))
    np.savetxt(csv_path, ds.values, fmt="%.17g", delimiter=",", header=header, comments="")
    side = spec.to_json()
    side = {"seed": ds.meta.get("seed"), **side, "n": ds.n}
    side["regime"] = ds.meta.get("regime", spec.regime)
    json_path.write_text(json.dumps(side, sort_keys=True) + "\n")
    return csv_path, json_path


def read_dataset(path) -> Dataset:
    path = Path(path)
    X = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = {}
    side = path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text())
    return Dataset(X, meta)


def linear_spec(dag: Dag, W, noise_var: float | list = 1.0, regime: str = "raw",
                standardization: str = "population") -> GenerativeSpec:
    """Convenience constructor for Gaussian linear systems."""
    if np.ndim(noise_var) == 0:
        noise = (Gaussian(float(noise_var)),) * dag.d
    else:
        noise = tuple(Gaussian(float(v)) for v in noise_var)
    return GenerativeSpec(dag, weights=np.asarray(W, dtype=float), noise=noise,
                          regime=regime, standardization=standardization)

