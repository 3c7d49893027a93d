"""SortnRegress baselines and the forest identifiability oracles."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numba
import numpy as np

from .analytic import LinearScm
from .errors import (
    InconsistentCovariance,
    InvalidParameter,
    NonFiniteInput,
    NotAForest,
    NotInMec,
)
from .graphs import Cpdag, Dag, cpdag_of_forest, is_forest, meek_rule1
from .metrics import r2_coefficients

N_LAMBDA = 100
LAMBDA_RATIO = 1e-3
CD_TOL = 1e-8
CD_MAX_SWEEPS = 10_000


@dataclass(frozen=True)
class SparsePath:
    lambdas: np.ndarray  # (L,), decreasing
    coefs: np.ndarray  # (L, p)
    bic: np.ndarray  # (L,)


@dataclass(frozen=True)
class LassoSelection:
    active: tuple
    coef: np.ndarray
    lam: float
    path: SparsePath


@numba.njit(cache=True)
def _cd(G, c, beta, lam, tol, max_sweeps):
    """Cyclic coordinate descent for b'Gb/2 - c'b + lam |b|_1, updating ``beta`` in place.

    Alternates full sweeps with sweeps over the current nonzeros; stops once a
    full sweep moves no coefficient by more than ``tol``.
    """
    p = beta.shape[0]
    grad = c - G @ beta
    on_full = True
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(p):
            if G[j, j] <= 0.0 or (not on_full and beta[j] == 0.0):
                continue
            old = beta[j]
            z = grad[j] + G[j, j] * old
            new = max(abs(z) - lam, 0.0) / G[j, j]
            if z < 0:
                new = -new
            if new != old:
                step = new - old
                for k in range(p):
                    grad[k] -= G[k, j] * step
                beta[j] = new
                delta = max(delta, abs(step))
        if on_full and delta < tol:
            break
        on_full = delta < tol


@numba.njit(cache=True)
def _path(G, c, yy, n, lambdas, tol, max_sweeps):
    p = c.shape[0]
    L = lambdas.shape[0]
    coefs = np.zeros((L, p))
    bic = np.empty(L)
    beta = np.zeros(p)
    for k in range(L):
        if k > 0:
            _cd(G, c, beta, lambdas[k], tol, max_sweeps)
        coefs[k] = beta
        mse = max(yy - 2.0 * (beta @ c) + beta @ (G @ beta), 1e-300)
        nnz = 0
        for j in range(p):
            if beta[j] != 0.0:
                nnz += 1
        bic[k] = n * np.log(mse) + nnz * np.log(n)
    return coefs, bic


def lasso_path(y, X, n_lambda: int = N_LAMBDA, ratio: float = LAMBDA_RATIO) -> SparsePath:
    """Warm-started Lasso path on centered data with BIC scores per lambda.

    Objective per lambda: ||y - Xb||^2 / (2n) + lambda |b|_1, no intercept.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float).reshape(y.shape[0], -1)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise NonFiniteInput("regression inputs contain NaN or Inf")
    n, p = X.shape
    if n < 2:
        raise InvalidParameter("need n >= 2")
    y = y - y.mean()
    X = X - X.mean(axis=0)
    G = np.ascontiguousarray(X.T @ X / n)
    c = X.T @ y / n
    yy = float(y @ y / n)
    lam_max = float(np.max(np.abs(c))) if p else 0.0
    if lam_max > 0:
        lambdas = lam_max * np.logspace(0.0, math.log10(ratio), n_lambda)
    else:
        lambdas = np.zeros(1)
    coefs, bic = _path(G, c, yy, float(n), lambdas, CD_TOL, CD_MAX_SWEEPS)
    return SparsePath(lambdas, coefs, bic)


def lasso_bic_select(y, X) -> LassoSelection:
    """Active set and coefficients at the BIC-minimizing point of the Lasso path."""
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float).reshape(y.shape[0], -1)
    path = lasso_path(y, X)
    k = int(np.argmin(path.bic))
    coef = path.coefs[k]
    return LassoSelection(tuple(np.flatnonzero(coef).tolist()), coef.copy(),
                          float(path.lambdas[k]), path)


CRITERIA = ("var", "r2", "random")


def sort_order(ds, criterion: str, rng: np.random.Generator | None = None) -> np.ndarray:
    """Vertex order used by SortnRegress: ascending criterion, ties by index."""
    X = ds.values if hasattr(ds, "values") else np.asarray(ds, dtype=float)
    d = X.shape[1]
    if criterion == "var":
        return np.argsort(X.var(axis=0), kind="stable")
    if criterion == "r2":
        return np.argsort(r2_coefficients(X), kind="stable")
    if criterion == "random":
        if rng is None:
            raise InvalidParameter("random criterion needs a random stream")
        return rng.permutation(d)
    raise InvalidParameter(f"criterion must be one of {CRITERIA}")


def sort_n_regress(ds, criterion: str = "var", rng: np.random.Generator | None = None,
                   order=None, adaptive: bool = True) -> Dag:
    """Regress every variable on its predecessors in the sort order with Lasso+BIC.

    With ``adaptive`` the predictors are first rescaled by the magnitudes of
    their least-squares coefficients (adaptive Lasso), as in the reference
    SortnRegress implementation; plain Lasso+BIC keeps many spurious edges.
    """
    X = ds.values if hasattr(ds, "values") else np.asarray(ds, dtype=float)
    d = X.shape[1]
    if d < 2:
        raise InvalidParameter("need at least two variables")
    if order is None:
        order = sort_order(X, criterion, rng)
    order = [int(v) for v in order]
    edges = []
    for k in range(1, d):
        preds = order[:k]
        y = X[:, order[k]]
        Z = X[:, preds]
        if adaptive:
            Zc = Z - Z.mean(axis=0)
            Z = Zc * np.abs(np.linalg.lstsq(Zc, y - y.mean(), rcond=None)[0])
        sel = lasso_bic_select(y, Z)
        edges.extend((preds[a], order[k]) for a in sel.active)
    return Dag(d, frozenset(edges))


def _component_adjacency(undirected) -> dict[int, list[int]]:
    nb: dict[int, list[int]] = {}
    for e in undirected:
        a, b = sorted(e)
        nb.setdefault(a, []).append(b)
        nb.setdefault(b, []).append(a)
    for v in nb:
        nb[v].sort()
    return nb


def _bfs_far(nb, start, allowed):
    prev = {start: None}
    q = deque([start])
    last = start
    while q:
        v = q.popleft()
        last = v
        for u in nb[v]:
            if u in allowed and u not in prev:
                prev[u] = v
                q.append(u)
    # farthest vertex; BFS visits by level so the last one popped is at max depth
    path = [last]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return last, path


def longest_chain(nb: dict[int, list[int]], comp) -> list[int]:
    """A longest path of an undirected tree (double BFS)."""
    allowed = set(comp)
    a, _ = _bfs_far(nb, min(comp), allowed)
    _, path = _bfs_far(nb, a, allowed)
    return path


def _orient_chain(chain, S, tol):
    """Directed edges implied by the pair covariances along one chain."""
    c = np.array([abs(S[chain[k], chain[k + 1]]) for k in range(len(chain) - 1)])
    k = int(np.argmin(c))
    root = None
    if k + 1 < c.size and abs(c[k + 1] - c[k]) <= tol:
        root = k + 1
    elif k > 0 and abs(c[k - 1] - c[k]) <= tol:
        root = k
    out = []
    for e in range(c.size):
        a, b = chain[e], chain[e + 1]
        if root is not None:
            out.append((b, a) if e < root else (a, b))
        elif e < k:
            out.append((b, a))
        elif e > k:
            out.append((a, b))
    return out


def orient_forest_from_covariance(cpdag: Cpdag, S, min_abs_weight: float = 1.0 + 1e-12,
                                  tol: float = 1e-9) -> Cpdag:
    """Orient all but at most one edge per undirected tree of a forest CPDAG.

    Valid for covariances of post-hoc standardized linear SCMs with equal noise
    variances and all |w| >= ``min_abs_weight`` > 1. Along a longest undirected
    chain, |Cov| of consecutive pairs grows away from the chain's root, so the
    edges are oriented away from the pair with the smallest |Cov|, which stays
    undirected unless an adjacent pair ties (then their shared node is the root).
    First-Meek-rule closure follows and the procedure repeats on what remains.
    """
    if not min_abs_weight > 1:
        raise InvalidParameter("orientation needs min_abs_weight > 1")
    S = np.asarray(S, dtype=float)
    if S.shape != (cpdag.d, cpdag.d):
        raise InvalidParameter(f"covariance must be {cpdag.d}x{cpdag.d}")
    skel = cpdag.skeleton()
    skel_edges = [tuple(sorted(e)) for e in skel]
    if skel_edges and not is_forest(Dag(cpdag.d, frozenset(skel_edges))):
        raise NotAForest("skeleton contains a cycle")
    for a, b in skel_edges:
        if abs(S[a, b]) <= 1e-12:
            raise InconsistentCovariance(f"adjacent pair ({a}, {b}) has zero covariance")

    directed = set(cpdag.directed)
    undirected = set(cpdag.undirected)

    def adjacent(a, c):
        return frozenset((a, c)) in skel

    while True:
        nb = _component_adjacency(undirected)
        comps = [c for c in Cpdag(cpdag.d, frozenset(), frozenset(undirected)).undirected_components()
                 if sum(1 for v in c for u in nb[v] if u > v) >= 2]
        if not comps:
            break
        for comp in comps:
            chain = longest_chain(nb, comp)
            for a, b in _orient_chain(chain, S, tol):
                e = frozenset((a, b))
                if e not in undirected:
                    raise InconsistentCovariance(f"edge {a}-{b} already oriented")
                undirected.discard(e)
                directed.add((a, b))
        meek_rule1(cpdag.d, directed, undirected, adjacent)
    try:
        return Cpdag(cpdag.d, frozenset(directed), frozenset(undirected))
    except InvalidParameter as e:
        raise InconsistentCovariance(str(e)) from None


def orient_forest_from_data(cpdag: Cpdag, ds, tol: float = 1e-2) -> Cpdag:
    """Empirical variant: uses the sample correlation matrix and a tie tolerance."""
    X = ds.values if hasattr(ds, "values") else np.asarray(ds, dtype=float)
    return orient_forest_from_covariance(cpdag, np.corrcoef(X, rowvar=False), tol=tol)


def nonident_witness(model: LinearScm, target: Dag) -> LinearScm:
    """Linear system on ``target`` with the same skeleton weights and noise.

    For forests with equal noise variances, its internally standardized
    distribution coincides with that of ``model``.
    """
    if not is_forest(model.dag) or not is_forest(target):
        raise NotAForest("witness construction requires forest DAGs")
    if not np.allclose(model.noise_var, model.noise_var[0], rtol=0, atol=0):
        raise InvalidParameter("noise variances must be equal")
    if target.d != model.dag.d or cpdag_of_forest(target) != cpdag_of_forest(model.dag):
        raise NotInMec("target is not in the Markov equivalence class of the model DAG")
    W = np.zeros_like(model.weights)
    for a, b in target.edges:
        W[a, b] = model.weights[a, b] if (a, b) in model.dag.edges else model.weights[b, a]
    return LinearScm(target, W, model.noise_var.copy())
