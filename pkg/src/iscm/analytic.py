"""Closed-form moments of linear systems.

Covers implied models of internally- and post-hoc-standardized linear SCMs,
population covariances (forward propagation, plus a path-sum oracle for
unit-variance models), cause-explained variance and its bound, and the
noise-transfer construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidParameter,
    NonPositiveTarget,
    RootVarianceMismatch,
    TooLarge,
)
from .graphs import Dag


@dataclass(frozen=True)
class LinearScm:
    dag: Dag
    weights: np.ndarray
    noise_var: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        s2 = np.broadcast_to(np.asarray(self.noise_var, dtype=float), (self.dag.d,)).copy()
        if W.shape != (self.dag.d, self.dag.d):
            raise InvalidParameter(f"weight matrix must be {self.dag.d}x{self.dag.d}")
        support = W != 0
        if np.any(support & ~self.dag.adjacency()):
            raise InvalidParameter("weights are nonzero off the edge set")
        if not np.all(s2 > 0):
            raise InvalidParameter("noise variances must be positive")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "noise_var", s2)

    def to_json(self) -> dict:
        return {
            "graph": self.dag.to_json(),
            "weights": self.weights.tolist(),
            "noise_var": self.noise_var.tolist(),
        }


@dataclass(frozen=True)
class ImpliedLinearModel:
    """Observed-variable SCM form of a standardized linear system.

    ``marginal_var`` holds Var[x_i] of the unstandardized (latent) variables.
    """

    dag: Dag
    weights: np.ndarray
    noise_var: np.ndarray
    marginal_var: np.ndarray

    def as_scm(self) -> LinearScm:
        return LinearScm(self.dag, self.weights, self.noise_var)

    @property
    def noise_scale(self) -> np.ndarray:
        """Factor 1/s_i applied to the original noise draw."""
        return 1.0 / np.sqrt(self.marginal_var)

    def to_json(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "noise_var": self.noise_var.tolist(),
            "marginal_var": self.marginal_var.tolist(),
        }


def _propagate(dag: Dag, W: np.ndarray, noise_var: np.ndarray) -> np.ndarray:
    d = dag.d
    S = np.zeros((d, d))
    done: list[int] = []
    for i in dag.order:
        pa = list(dag.parents(i))
        if pa:
            w = W[pa, i]
            S[i, i] = w @ S[np.ix_(pa, pa)] @ w + noise_var[i]
            if done:
                row = S[np.ix_(done, pa)] @ w
                S[done, i] = row
                S[i, done] = row
        else:
            S[i, i] = noise_var[i]
        done.append(i)
    return S


def implied_iscm(m: LinearScm) -> ImpliedLinearModel:
    """Implied weights and noise variances of a linear iSCM.

    Bottom-up over the topological order: the latent variance is
    w' Sigma w + sigma^2 with Sigma the covariance of the standardized parents,
    then w / sqrt(Var) and sigma^2 / Var, then the covariance row of the new node.
    """
    d = m.dag.d
    W = m.weights
    Wt = np.zeros((d, d))
    nv = np.empty(d)
    var = np.empty(d)
    S = np.eye(d)
    done: list[int] = []
    for i in m.dag.order:
        pa = list(m.dag.parents(i))
        w = W[pa, i]
        v = (w @ S[np.ix_(pa, pa)] @ w if pa else 0.0) + m.noise_var[i]
        var[i] = v
        Wt[pa, i] = w / math.sqrt(v)
        nv[i] = m.noise_var[i] / v
        if done and pa:
            # off-diagonal only; the diagonal stays 1 by construction
            row = S[np.ix_(done, pa)] @ Wt[pa, i]
            S[done, i] = row
            S[i, done] = row
        done.append(i)
    return ImpliedLinearModel(m.dag, Wt, nv, var)


def implied_standardized_scm(m: LinearScm) -> ImpliedLinearModel:
    """Implied model of a linear SCM whose variables are z-scored after generation."""
    s2 = np.diag(_propagate(m.dag, m.weights, m.noise_var)).copy()
    s = np.sqrt(s2)
    Wt = m.weights * s[:, None] / s[None, :]
    return ImpliedLinearModel(m.dag, Wt, m.noise_var / s2, s2)


def _unit_variance_path_sum(dag: Dag, W: np.ndarray, max_d: int = 12) -> np.ndarray:
    # Sum over collider-free simple paths of edge-weight products. Such a path
    # climbs against edge direction, then descends along it, never switching back.
    if dag.d > max_d:
        raise TooLarge(f"path enumeration limited to d <= {max_d}")
    d = dag.d
    parents = [dag.parents(v) for v in range(d)]
    children = [dag.children(v) for v in range(d)]
    C = np.eye(d)

    def walk(v, prod, descending, visited, acc):
        acc[v] += prod
        for c in children[v]:
            if c not in visited:
                visited.add(c)
                walk(c, prod * W[v, c], True, visited, acc)
                visited.discard(c)
        if not descending:
            for p in parents[v]:
                if p not in visited:
                    visited.add(p)
                    walk(p, prod * W[p, v], False, visited, acc)
                    visited.discard(p)

    for s in range(d):
        acc = np.zeros(d)
        walk(s, 1.0, False, {s}, acc)
        acc[s] = 1.0
        C[s] = acc
    return C


def covariance_of(model, method: str = "propagate") -> np.ndarray:
    """Population covariance of a linear model.

    ``method="propagate"`` runs forward covariance propagation and works for
    any noise variances. ``method="paths"`` sums weight products over unblocked
    paths; it is only valid for unit-variance models and limited to d <= 12.
    """
    if isinstance(model, ImpliedLinearModel):
        model = model.as_scm()
    if method == "propagate":
        return _propagate(model.dag, model.weights, model.noise_var)
    if method == "paths":
        return _unit_variance_path_sum(model.dag, model.weights)
    raise InvalidParameter(f"unknown method {method!r}")


def correlation_of(model) -> np.ndarray:
    S = covariance_of(model)
    s = np.sqrt(np.diag(S))
    return S / np.outer(s, s)


def cev_fraction(model, i: int) -> float:
    """Fraction of Var[x_i] explained by the parents: 1 - sigma_i^2 / Var[x_i]."""
    if isinstance(model, ImpliedLinearModel):
        model = model.as_scm()
    if not model.dag.parents(i):
        return 0.0
    var = covariance_of(model)[i, i]
    return 1.0 - model.noise_var[i] / var


def cev_fractions(model) -> np.ndarray:
    if isinstance(model, ImpliedLinearModel):
        model = model.as_scm()
    var = np.diag(covariance_of(model))
    out = 1.0 - model.noise_var / var
    roots = [i for i in range(model.dag.d) if not model.dag.parents(i)]
    out[roots] = 0.0
    return out


def cev_bound(m_parents: int, w_max: float, noise_var: float) -> float:
    """Upper bound on the CEV fraction of any node in a linear iSCM."""
    if m_parents <= 0 or w_max <= 0 or noise_var <= 0:
        raise InvalidParameter("cev_bound arguments must be positive")
    return 1.0 - noise_var / (m_parents ** 2 * w_max ** 2 + noise_var)


def noise_transfer(a: LinearScm, b: LinearScm, marginal_var=None) -> LinearScm:
    """SCM with the marginal variances of ``a`` and the noise variances of ``b``.

    Along the topological order, node i keeps a's incoming weight vector up to
    a positive factor sqrt((Var_a[x_i] - sigma_b,i^2) / Var[w_a' pa_i]), where
    the denominator is evaluated in the system under construction.

    ``marginal_var`` overrides Var_a (e.g. with empirical column variances).
    """
    if a.dag != b.dag:
        raise InvalidParameter("source systems must share a DAG")
    dag = a.dag
    target = (
        np.diag(covariance_of(a)).copy() if marginal_var is None
        else np.asarray(marginal_var, dtype=float)
    )
    nv = b.noise_var.copy()
    W = np.zeros_like(a.weights)
    d = dag.d
    S = np.zeros((d, d))
    done: list[int] = []
    for i in dag.order:
        pa = list(dag.parents(i))
        if not pa:
            if not math.isclose(a.noise_var[i], nv[i], rel_tol=1e-12, abs_tol=0.0):
                raise RootVarianceMismatch(f"root {i}: {a.noise_var[i]} != {nv[i]}")
            S[i, i] = nv[i]
        else:
            w = a.weights[pa, i]
            contrib = w @ S[np.ix_(pa, pa)] @ w
            gap = target[i] - nv[i]
            if not gap > 0 or not contrib > 0:
                raise NonPositiveTarget(f"node {i}: Var_a={target[i]}, sigma_b^2={nv[i]}")
            W[pa, i] = w * math.sqrt(gap / contrib)
            wt = W[pa, i]
            S[i, i] = wt @ S[np.ix_(pa, pa)] @ wt + nv[i]
            row = S[np.ix_(done, pa)] @ wt
            S[done, i] = row
            S[i, done] = row
        done.append(i)
    return LinearScm(dag, W, nv)
