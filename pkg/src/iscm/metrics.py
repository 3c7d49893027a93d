"""Sortability scores, R^2 coefficients and graph-recovery scores."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, NoPaths, SingularCovariance
from .graphs import Dag

RIDGE = 1e-8  # added to the diagonal of the correlation matrix


@dataclass(frozen=True)
class SortabilityReport:
    criterion: str
    value: float
    per_node: np.ndarray

    def to_json(self) -> dict:
        return {"criterion": self.criterion, "value": self.value,
                "per_node": np.asarray(self.per_node).tolist()}


def _values_of(ds) -> np.ndarray:
    X = ds.values if hasattr(ds, "values") else ds
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("expected an n x d matrix")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("data contains NaN or Inf")
    return X


def tau_sortability(values, dag: Dag) -> float:
    """Agreement between per-node ``values`` and the causal order along directed paths.

    A pair (s, t) counts once for every length i at which a directed path
    s ~> t of exactly that length exists, scoring 1 if values[t] > values[s],
    1/2 on ties and 0 otherwise.
    """
    v = np.asarray(values, dtype=float)
    if v.shape != (dag.d,):
        raise DimensionMismatch(f"need {dag.d} node values, got shape {v.shape}")
    if dag.n_edges == 0:
        raise NoPaths("graph has no edges")
    A = dag.adjacency().astype(np.int64)
    incr = np.where(v[None, :] > v[:, None], 1.0, np.where(v[None, :] == v[:, None], 0.5, 0.0))
    reach = A.astype(bool)
    num = 0.0
    den = 0
    while reach.any():
        num += incr[reach].sum()
        den += int(reach.sum())
        reach = (reach.astype(np.int64) @ A) > 0
    return float(num / den)


def var_sortability(ds, dag: Dag) -> SortabilityReport:
    var = _values_of(ds).var(axis=0)
    return SortabilityReport("var", tau_sortability(var, dag), var)


def r2_from_covariance(S) -> np.ndarray:
    """R^2 of regressing each variable on all others, from its covariance matrix.

    Uses 1 - 1 / (R^-1)_tt on the ridge-damped correlation matrix R, so the
    result is invariant to rescaling of individual variables.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatch("covariance must be square")
    if not np.all(np.isfinite(S)):
        raise NonFiniteInput("covariance contains NaN or Inf")
    d = S.shape[0]
    if d == 1:
        return np.zeros(1)
    sd = np.sqrt(np.diag(S))
    if not np.all(sd > 0):
        raise SingularCovariance("a variable has zero variance")
    R = S / np.outer(sd, sd) + RIDGE * np.eye(d)
    try:
        P = np.linalg.inv(R)
    except np.linalg.LinAlgError as e:
        raise SingularCovariance(str(e)) from None
    diag = np.diag(P) * np.diag(R)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise SingularCovariance("covariance is not positive definite after damping")
    return 1.0 - 1.0 / diag


def r2_coefficients(ds) -> np.ndarray:
    X = _values_of(ds)
    Xc = X - X.mean(axis=0)
    return r2_from_covariance(Xc.T @ Xc / X.shape[0])


def r2_sortability(ds, dag: Dag) -> SortabilityReport:
    r2 = r2_coefficients(ds)
    return SortabilityReport("r2", tau_sortability(r2, dag), r2)


def _check_same_d(pred: Dag, truth: Dag) -> None:
    if pred.d != truth.d:
        raise DimensionMismatch(f"graphs have {pred.d} and {truth.d} vertices")


def f1_score(pred: Dag, truth: Dag) -> float:
    """F1 over directed edges."""
    _check_same_d(pred, truth)
    if not pred.edges and not truth.edges:
        return 1.0
    tp = len(pred.edges & truth.edges)
    if tp == 0:
        return 0.0
    p = tp / len(pred.edges)
    r = tp / len(truth.edges)
    return 2 * p * r / (p + r)


def shd(pred: Dag, truth: Dag) -> int:
    """Missing + extra skeleton edges + reversed edges (a reversal costs 1)."""
    _check_same_d(pred, truth)
    sp, st = pred.skeleton(), truth.skeleton()
    reversed_ = sum(1 for i, j in pred.edges if (j, i) in truth.edges)
    return len(sp ^ st) + reversed_
