"""Temperature-controlled relaxations: maximize ``u . x - t * f(x)`` over
the convex hull of a structure's vertex set.

Supported (structure, regularizer) pairs:

====================  =======  =========  ==============  ==================  =======
structure             shannon  euclidean  binary_entropy  categorical_entropy expfam
====================  =======  =========  ==============  ==================  =======
one_hot               yes      yes        yes             yes                 yes
subsets               -        yes        yes             yes                 yes
k_subsets             -        yes        yes             yes                 yes
corr_k_subsets        -        -          -               -                   yes
matching              yes      -          -               -                   n <= 6
spanning_tree         -        -          -               -                   yes
arborescence          -        -          -               -                   yes
====================  =======  =========  ==============  ==================  =======

On the probability simplex the shannon, categorical-entropy and
exponential-family solutions coincide with the tempered softmax, so all
three dispatch to it.  Every solver works in a shifted or log domain so
that temperatures far below 1 stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp

from .errors import (
    ConvergenceError,
    EnumerationLimitError,
    InfeasibleStructureError,
    InputError,
    InvalidSpecError,
    NumericalError,
    UnsupportedPairError,
)
from .structures import (
    Graph,
    StructureKind,
    StructureSpec,
    _check_dim,
    enumerate_vertices,
)

__all__ = [
    "Regularizer",
    "RelaxationSpec",
    "RelaxedPoint",
    "relax",
    "softmax_simplex",
    "euclidean_project",
    "binary_entropy_relax",
    "categorical_entropy_relax",
    "expfam_marginals",
    "matrix_tree_marginals",
    "directed_matrix_tree_marginals",
    "sinkhorn_relax",
    "relaxation_to_dict",
    "relaxation_from_dict",
]

DEFAULT_BISECT_ITER = 200
DEFAULT_SINKHORN_ITER = 1000
MATCHING_EXACT_LIMIT = 6


class Regularizer(str, Enum):
    SHANNON = "shannon"
    EUCLIDEAN = "euclidean"
    BINARY_ENTROPY = "binary_entropy"
    CATEGORICAL_ENTROPY = "categorical_entropy"
    EXPFAM_ENTROPY = "expfam_entropy"


@dataclass(frozen=True)
class RelaxationSpec:
    """Regularizer choice, temperature and solver tolerances.

    ``max_iter`` of ``None`` resolves to 200 for bisections and 1000 for
    Sinkhorn.  ``clip_range`` caps the spread of the log edge weights in
    the matrix-tree solvers before inversion; off by default.
    """

    regularizer: Regularizer
    temperature: float = 1.0
    tol: float = 1e-10
    max_iter: Optional[int] = None
    clip_range: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "regularizer", Regularizer(self.regularizer))
        if not self.temperature > 0:
            raise InvalidSpecError("temperature must be > 0")
        if not self.tol > 0:
            raise InvalidSpecError("tol must be > 0")
        if self.max_iter is not None and self.max_iter < 1:
            raise InvalidSpecError("max_iter must be positive")
        if self.clip_range is not None and not self.clip_range > 0:
            raise InvalidSpecError("clip_range must be positive")

    def bisect_iter(self) -> int:
        return self.max_iter if self.max_iter is not None else DEFAULT_BISECT_ITER

    def sinkhorn_iter(self) -> int:
        return self.max_iter if self.max_iter is not None else DEFAULT_SINKHORN_ITER


@dataclass(frozen=True)
class RelaxedPoint:
    """A point of the hull, with solver by-products where they exist."""

    x: np.ndarray
    dual: Optional[np.ndarray] = None
    residual: Optional[float] = None
    condition_estimate: Optional[float] = None


def _scaled(u: np.ndarray, t: float) -> np.ndarray:
    """``u / t``, failing loudly if the division itself overflows."""
    with np.errstate(over="ignore"):
        z = np.asarray(u, dtype=float) / t
    if not np.isfinite(z).all():
        raise NumericalError(
            f"u / t overflows double precision at temperature {t:.3e}"
        )
    return z


def softmax_simplex(u: np.ndarray, t: float) -> RelaxedPoint:
    """Tempered softmax with max-subtraction."""
    z = _scaled(u, t)
    z = z - z.max()
    e = np.exp(z)
    return RelaxedPoint(x=e / e.sum())


def _bisect_shift(values_of, target, z, tol, max_iter):
    """Find ``nu`` with ``sum(values_of(z - nu)) = target``.

    ``values_of`` is coordinatewise nonincreasing in ``nu``; the partial
    sum therefore decreases from the left bracket to the right one,
    which is asserted on every step.
    """
    n = z.shape[0]
    lo = z.min() - np.log(n) - 1.0
    hi = z.max() + np.log(n) + 1.0
    s_lo = float(values_of(z - lo).sum())
    s_hi = float(values_of(z - hi).sum())
    width = hi - lo
    guard = 0
    while s_lo < target and guard < 200:
        lo -= width
        width *= 2.0
        s_lo = float(values_of(z - lo).sum())
        guard += 1
    guard = 0
    while s_hi > target and guard < 200:
        hi += width
        width *= 2.0
        s_hi = float(values_of(z - hi).sum())
        guard += 1
    best_res = min(abs(s_lo - target), abs(s_hi - target))
    for _ in range(max_iter):
        if s_lo < s_hi:
            raise NumericalError("bisection objective is not decreasing in nu")
        mid = 0.5 * (lo + hi)
        s = float(values_of(z - mid).sum())
        best_res = min(best_res, abs(s - target))
        if abs(s - target) <= tol:
            return mid
        if s > target:
            lo, s_lo = mid, s
        else:
            hi, s_hi = mid, s
    raise ConvergenceError(
        f"bisection did not reach |sum(x) - {target}| <= {tol}", residual=best_res
    )


def _capped_simplex_point(spec, u, t, target, values_of, tol, max_iter):
    z = _scaled(u, t)
    n = z.shape[0]
    if target == n:  # the feasible set is the single all-ones point
        return RelaxedPoint(x=np.ones(n))
    nu = _bisect_shift(values_of, target, z, tol, max_iter)
    x = values_of(z - nu)
    return RelaxedPoint(x=x, dual=np.asarray(nu), residual=abs(float(x.sum()) - target))


def _project_simplex(z: np.ndarray) -> tuple:
    """Euclidean projection onto the probability simplex; returns (x, threshold)."""
    srt = np.sort(z)[::-1]
    css = np.cumsum(srt)
    ks = np.arange(1, z.shape[0] + 1)
    cond = srt - (css - 1.0) / ks > 0
    rho = int(np.nonzero(cond)[0][-1])
    tau = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(z - tau, 0.0), tau


def _require_target(spec: StructureSpec) -> int:
    return 1 if spec.kind == StructureKind.ONE_HOT else spec.k


def euclidean_project(spec: StructureSpec, u: np.ndarray, t: float,
                      tol: float = 1e-10, max_iter: int = DEFAULT_BISECT_ITER) -> RelaxedPoint:
    """Euclidean projection of ``u / t`` onto the structure's hull.

    One-hot uses the simplex threshold rule, subsets clamp to the unit
    box, and k-subsets bisect the shift of a clamped affine map on the
    capped simplex.
    """
    u = _check_dim(spec, u)
    z = _scaled(u, t)
    if spec.kind == StructureKind.ONE_HOT:
        x, tau = _project_simplex(z)
        return RelaxedPoint(x=x, dual=np.asarray(tau))
    if spec.kind == StructureKind.SUBSETS:
        return RelaxedPoint(x=np.clip(z, 0.0, 1.0))
    if spec.kind == StructureKind.K_SUBSETS:
        return _capped_simplex_point(
            spec, u, t, spec.k, lambda v: np.clip(v, 0.0, 1.0), tol, max_iter
        )
    raise UnsupportedPairError(f"euclidean relaxation does not support {spec.kind.value}")


def binary_entropy_relax(spec: StructureSpec, u: np.ndarray, t: float,
                         tol: float = 1e-10, max_iter: int = DEFAULT_BISECT_ITER) -> RelaxedPoint:
    """Coordinatewise sigmoid, with a bisected shift under a cardinality sum."""
    u = _check_dim(spec, u)
    if spec.kind == StructureKind.SUBSETS:
        return RelaxedPoint(x=expit(_scaled(u, t)))
    if spec.kind in (StructureKind.ONE_HOT, StructureKind.K_SUBSETS):
        return _capped_simplex_point(
            spec, u, t, _require_target(spec), expit, tol, max_iter
        )
    raise UnsupportedPairError(f"binary-entropy relaxation does not support {spec.kind.value}")


def categorical_entropy_relax(spec: StructureSpec, u: np.ndarray, t: float,
                              tol: float = 1e-10, max_iter: int = DEFAULT_BISECT_ITER) -> RelaxedPoint:
    """Capped exponential, with a bisected shift under a cardinality sum."""
    u = _check_dim(spec, u)
    if spec.kind == StructureKind.SUBSETS:
        z = _scaled(u, t)
        return RelaxedPoint(x=np.minimum(1.0, np.exp(np.minimum(z, 0.0))))
    if spec.kind == StructureKind.ONE_HOT:
        # the cap is inactive on the simplex; coincides with the softmax
        return softmax_simplex(u, t)
    if spec.kind == StructureKind.K_SUBSETS:
        return _capped_simplex_point(
            spec, u, t, spec.k,
            lambda v: np.minimum(1.0, np.exp(np.minimum(v, 0.0))), tol, max_iter
        )
    raise UnsupportedPairError(
        f"categorical-entropy relaxation does not support {spec.kind.value}"
    )


# --- exponential-family marginals -------------------------------------------

def _cardinality_dp_marginals(z: np.ndarray, k: int) -> np.ndarray:
    """Inclusion marginals of the k-of-n distribution p(S) ~ exp(sum z_S).

    Log-domain forward/backward over (position, count); O(n k).
    """
    n = z.shape[0]
    neg = -np.inf
    fwd = np.full((n + 1, k + 1), neg)
    fwd[0, 0] = 0.0
    for i in range(1, n + 1):
        fwd[i, 0] = fwd[i - 1, 0]
        fwd[i, 1:] = np.logaddexp(fwd[i - 1, 1:], fwd[i - 1, :-1] + z[i - 1])
    bwd = np.full((n + 1, k + 1), neg)
    bwd[n, 0] = 0.0
    for i in range(n - 1, -1, -1):
        bwd[i, 0] = bwd[i + 1, 0]
        bwd[i, 1:] = np.logaddexp(bwd[i + 1, 1:], bwd[i + 1, :-1] + z[i])
    log_z = fwd[n, k]
    mu = np.empty(n)
    for i in range(n):
        terms = fwd[i, :k] + bwd[i + 1, :k][::-1]
        mu[i] = np.exp(z[i] + logsumexp(terms) - log_z)
    return np.clip(mu, 0.0, 1.0)


def _chain_dp_marginals(n: int, k: int, z: np.ndarray) -> np.ndarray:
    """Unary and adjacent-pair marginals of the cardinality-k chain.

    Scores: ``z[:n]`` per selected element, ``z[n + i]`` whenever
    elements i and i+1 are both selected.  Forward/backward over the
    (position, state, count) lattice in the log domain.
    """
    phi, psi = z[:n], z[n:]
    neg = -np.inf
    fwd = np.full((n, 2, k + 1), neg)
    fwd[0, 0, 0] = 0.0
    fwd[0, 1, 1] = phi[0]
    for i in range(1, n):
        for s in (0, 1):
            gain = phi[i] if s else 0.0
            for c in range(s, k + 1):
                a = fwd[i - 1, 0, c - s] + gain
                b = fwd[i - 1, 1, c - s] + gain + (psi[i - 1] if s else 0.0)
                fwd[i, s, c] = np.logaddexp(a, b)
    log_z = logsumexp(fwd[n - 1, :, k])
    bwd = np.full((n, 2, k + 1), neg)
    bwd[n - 1, :, 0] = 0.0
    for i in range(n - 2, -1, -1):
        for s in (0, 1):
            for c in range(k + 1):
                a = bwd[i + 1, 0, c]
                b = neg
                if c >= 1:
                    b = bwd[i + 1, 1, c - 1] + phi[i + 1] + (psi[i] if s else 0.0)
                bwd[i, s, c] = np.logaddexp(a, b)
    mu = np.zeros(2 * n - 1)
    for i in range(n):
        terms = [fwd[i, 1, c] + bwd[i, 1, k - c] for c in range(1, k + 1)]
        mu[i] = np.exp(logsumexp(terms) - log_z)
    for i in range(n - 1):
        # both endpoints selected leaves at most k - 2 ones for the rest
        terms = [
            fwd[i, 1, c] + psi[i] + phi[i + 1] + bwd[i + 1, 1, k - c - 1]
            for c in range(1, k)
        ]
        if terms:
            mu[n + i] = np.exp(logsumexp(terms) - log_z)
    return np.clip(mu, 0.0, 1.0)


def _center_and_clip(theta: np.ndarray, clip_range: Optional[float]) -> np.ndarray:
    # Subtracting the max rescales every structure's weight equally and
    # leaves marginals unchanged; clipping changes them and is opt-in.
    mx = theta.max()
    if clip_range is not None:
        theta = np.maximum(theta, mx - clip_range)
    return theta - mx


def _logdet_reduced_laplacian(nn: int, boundary: int, log_w: np.ndarray, directed: bool):
    """Log-determinant of the weighted Laplacian with ``boundary`` deleted.

    ``log_w[a, b]`` is the log weight of edge a->b (symmetric when
    undirected; -inf where absent).  Pivoted elimination of a Laplacian
    is star-mesh graph contraction, so run it directly on log weights:
    every pivot is a logsumexp of in-weights and every fill-in a
    logaddexp, which keeps the computation subtraction-free and immune
    to the exponent range of the weights.  Returns (logdet, pivots).
    """
    lw = log_w.astype(float).copy()
    present = [v for v in range(nn) if v != boundary]
    pivots = []
    for pos, v in enumerate(present):
        others = present[pos + 1:] + [boundary]
        incoming = lw[others, v] if directed else lw[v, others]
        pivot = float(logsumexp(incoming)) if len(incoming) else -np.inf
        pivots.append(pivot)
        if pivot == -np.inf:
            return -np.inf, pivots
        dst = [b for b in others if b != boundary]
        if not dst:
            continue
        if directed:
            src = others
            upd = lw[src, v][:, None] + lw[v, dst][None, :] - pivot
            lw[np.ix_(src, dst)] = np.logaddexp(lw[np.ix_(src, dst)], upd)
        else:
            upd = lw[v, others][:, None] + lw[v, others][None, :] - pivot
            block = np.logaddexp(lw[np.ix_(others, others)], upd)
            np.fill_diagonal(block, -np.inf)
            lw[np.ix_(others, others)] = block
    return float(np.sum(pivots)), pivots


def _tree_marginals_by_logdet(nn, boundary, edges, theta, directed):
    """Per-edge marginals from determinant ratios.

    Deleting edge e scales the structure partition function by
    (1 - mu_e), so mu_e = 1 - exp(logdet without e - logdet).  Both
    determinants are subtraction-free products of elimination pivots;
    the direct formula through the inverse Laplacian cancels
    catastrophically once the distribution concentrates.
    """
    neg = -np.inf
    log_w = np.full((nn, nn), neg)
    keep = []  # edges that enter the reduced matrix at all
    for e, (i, j) in enumerate(edges):
        if directed and j == boundary:
            continue
        keep.append(e)
        log_w[i, j] = theta[e]
        if not directed:
            log_w[j, i] = theta[e]
    full, pivots = _logdet_reduced_laplacian(nn, boundary, log_w, directed)
    if full == neg:
        raise NumericalError("singular reduced Laplacian")
    mu = np.zeros(len(edges))
    for e in keep:
        i, j = edges[e]
        saved_ij, saved_ji = log_w[i, j], log_w[j, i]
        log_w[i, j] = neg
        if not directed:
            log_w[j, i] = neg
        without, _ = _logdet_reduced_laplacian(nn, boundary, log_w, directed)
        log_w[i, j] = saved_ij
        log_w[j, i] = saved_ji
        mu[e] = -np.expm1(without - full)
    finite = [p for p in pivots if p != neg]
    spread = (max(finite) - min(finite)) if finite else 0.0
    cond = float(np.exp(min(spread, 700.0)))
    return mu, cond


def matrix_tree_marginals(graph: Graph, u: np.ndarray, t: float = 1.0,
                          clip_range: Optional[float] = None,
                          drop_index: Optional[int] = None) -> RelaxedPoint:
    """Per-edge spanning-tree marginals of p(T) ~ exp(u . x_T / t).

    Works on the weighted Laplacian of exp(u/t) with one row/column
    deleted (by default that of a node incident to the largest weight);
    each marginal is a ratio of reduced-Laplacian determinants, taken in
    the log domain.  ``condition_estimate`` is the spread of the
    elimination pivots.
    """
    if graph.directed:
        raise InvalidSpecError("matrix_tree_marginals needs an undirected graph")
    u = np.asarray(u, dtype=float)
    if u.shape != (graph.num_edges,):
        raise InputError(f"expected {graph.num_edges} edge utilities, got shape {u.shape}")
    if not graph.is_connected():
        raise InfeasibleStructureError("graph is disconnected; no spanning tree exists")
    theta = _center_and_clip(_scaled(u, t), clip_range)
    drop = drop_index if drop_index is not None else graph.edges[int(np.argmax(theta))][0]
    if not 0 <= drop < graph.num_nodes:
        raise InputError(f"drop_index {drop} out of range")
    mu, cond = _tree_marginals_by_logdet(
        graph.num_nodes, drop, graph.edges, theta, directed=False
    )
    return RelaxedPoint(x=np.clip(mu, 0.0, 1.0), condition_estimate=cond)


def directed_matrix_tree_marginals(graph: Graph, root: int, u: np.ndarray,
                                   t: float = 1.0,
                                   clip_range: Optional[float] = None) -> RelaxedPoint:
    """Per-edge marginals of the root-directed tree family p(T) ~ exp(u . x_T / t).

    The Laplacian collects entering weights on the diagonal and the
    root row/column is deleted; marginals are log-domain determinant
    ratios as in the undirected case.  Edges entering the root have
    marginal zero by definition.
    """
    if not graph.directed:
        raise InvalidSpecError("directed_matrix_tree_marginals needs a directed graph")
    u = np.asarray(u, dtype=float)
    if u.shape != (graph.num_edges,):
        raise InputError(f"expected {graph.num_edges} edge utilities, got shape {u.shape}")
    if not 0 <= root < graph.num_nodes:
        raise InputError(f"root {root} out of range")
    if graph.reachable_from(root) != set(range(graph.num_nodes)):
        raise InfeasibleStructureError("no arborescence: some node unreachable from the root")
    theta = _center_and_clip(_scaled(u, t), clip_range)
    mu, cond = _tree_marginals_by_logdet(
        graph.num_nodes, root, graph.edges, theta, directed=True
    )
    return RelaxedPoint(x=np.clip(mu, 0.0, 1.0), condition_estimate=cond)


def sinkhorn_relax(u: np.ndarray, t: float, tol: float = 1e-10,
                   max_iter: int = DEFAULT_SINKHORN_ITER,
                   warm_start: Optional[np.ndarray] = None) -> RelaxedPoint:
    """Doubly stochastic matrix from alternating log-domain normalization.

    Iterates until the worst row/column sum deviates from 1 by at most
    ``tol``; raises ``ConvergenceError`` (carrying the residual) past
    ``max_iter``.  The output ``x`` is flattened row-major; ``dual``
    stacks the row and column log-scalings and can seed ``warm_start``
    of a nearby solve, e.g. along a decreasing temperature schedule
    where cold starts converge slowly.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InputError(f"utility matrix must be square, got shape {u.shape}")
    if not np.isfinite(u).all():
        raise InputError("utilities must be finite")
    n = u.shape[0]
    base = _scaled(u, t)
    if warm_start is not None:
        f = np.array(warm_start[0], dtype=float)
        g = np.array(warm_start[1], dtype=float)
    else:
        f = np.zeros(n)
        g = np.zeros(n)
    residual = np.inf
    for _ in range(max_iter):
        m = base - f[:, None] - g[None, :]
        mx = m.max(axis=1)
        f += mx + np.log(np.exp(m - mx[:, None]).sum(axis=1))
        m = base - f[:, None] - g[None, :]
        mx = m.max(axis=0)
        g += mx + np.log(np.exp(m - mx[None, :]).sum(axis=0))
        x = np.exp(base - f[:, None] - g[None, :])
        residual = float(
            max(np.abs(x.sum(axis=1) - 1.0).max(), np.abs(x.sum(axis=0) - 1.0).max())
        )
        if residual <= tol:
            return RelaxedPoint(
                x=x.reshape(-1), dual=np.stack([f, g]), residual=residual
            )
    raise ConvergenceError(
        f"sinkhorn row/col residual {residual:.3e} > tol {tol:.3e} after {max_iter} iterations",
        residual=residual,
    )


def _matching_marginals_by_enumeration(spec: StructureSpec, u: np.ndarray, t: float) -> RelaxedPoint:
    if spec.n > MATCHING_EXACT_LIMIT:
        raise EnumerationLimitError(
            f"exact matching marginals are limited to n <= {MATCHING_EXACT_LIMIT}"
        )
    verts = np.stack(enumerate_vertices(spec, limit=10_000)).astype(float)
    logw = verts @ _scaled(u, t)
    w = np.exp(logw - logw.max())
    mu = verts.T @ w / w.sum()
    return RelaxedPoint(x=np.clip(mu, 0.0, 1.0))


def expfam_marginals(spec: StructureSpec, u: np.ndarray, t: float,
                     clip_range: Optional[float] = None) -> RelaxedPoint:
    """Marginal vector of p(x) ~ exp(u . x / t) over the spec's vertices.

    ``clip_range`` only affects the tree and arborescence weights; the
    other kinds run entirely in the log domain and need no cap.
    """
    u = np.asarray(_check_dim(spec, u), dtype=float)
    kind = spec.kind
    if kind == StructureKind.ONE_HOT:
        return softmax_simplex(u, t)
    if kind == StructureKind.SUBSETS:
        return RelaxedPoint(x=expit(_scaled(u, t)))
    if kind == StructureKind.K_SUBSETS:
        return RelaxedPoint(x=_cardinality_dp_marginals(_scaled(u, t), spec.k))
    if kind == StructureKind.CORR_K_SUBSETS:
        return RelaxedPoint(x=_chain_dp_marginals(spec.n, spec.k, _scaled(u, t)))
    if kind == StructureKind.SPANNING_TREE:
        return matrix_tree_marginals(spec.graph, u, t, clip_range=clip_range)
    if kind == StructureKind.ARBORESCENCE:
        return directed_matrix_tree_marginals(spec.graph, spec.root, u, t, clip_range=clip_range)
    if kind == StructureKind.MATCHING:
        return _matching_marginals_by_enumeration(spec, u, t)
    raise InvalidSpecError(f"unknown kind {kind!r}")  # pragma: no cover


_CLOSED_SIMPLEX = (Regularizer.SHANNON, Regularizer.CATEGORICAL_ENTROPY, Regularizer.EXPFAM_ENTROPY)


def supported_pairs() -> list:
    """All (kind, regularizer) pairs ``relax`` accepts."""
    pairs = []
    for reg in (Regularizer.SHANNON, Regularizer.EUCLIDEAN,
                Regularizer.BINARY_ENTROPY, Regularizer.CATEGORICAL_ENTROPY,
                Regularizer.EXPFAM_ENTROPY):
        kinds = {
            Regularizer.SHANNON: (StructureKind.ONE_HOT, StructureKind.MATCHING),
            Regularizer.EUCLIDEAN: (StructureKind.ONE_HOT, StructureKind.SUBSETS, StructureKind.K_SUBSETS),
            Regularizer.BINARY_ENTROPY: (StructureKind.ONE_HOT, StructureKind.SUBSETS, StructureKind.K_SUBSETS),
            Regularizer.CATEGORICAL_ENTROPY: (StructureKind.ONE_HOT, StructureKind.SUBSETS, StructureKind.K_SUBSETS),
            Regularizer.EXPFAM_ENTROPY: tuple(StructureKind),
        }[reg]
        pairs.extend((kind, reg) for kind in kinds)
    return pairs


def relax(spec: StructureSpec, rspec: RelaxationSpec, u: np.ndarray) -> RelaxedPoint:
    """Dispatch to the solver for (structure kind, regularizer)."""
    u = np.asarray(_check_dim(spec, u), dtype=float)
    if not np.isfinite(u).all():
        raise InputError("utilities must be finite")
    t = rspec.temperature
    reg = rspec.regularizer
    kind = spec.kind
    if reg == Regularizer.EXPFAM_ENTROPY:
        return expfam_marginals(spec, u, t, clip_range=rspec.clip_range)
    if kind == StructureKind.ONE_HOT and reg in _CLOSED_SIMPLEX:
        return softmax_simplex(u, t)
    if reg == Regularizer.SHANNON and kind == StructureKind.MATCHING:
        return sinkhorn_relax(u.reshape(spec.n, spec.n), t, rspec.tol, rspec.sinkhorn_iter())
    if reg == Regularizer.EUCLIDEAN:
        if kind in (StructureKind.ONE_HOT, StructureKind.SUBSETS, StructureKind.K_SUBSETS):
            return euclidean_project(spec, u, t, rspec.tol, rspec.bisect_iter())
    if reg == Regularizer.BINARY_ENTROPY:
        if kind in (StructureKind.ONE_HOT, StructureKind.SUBSETS, StructureKind.K_SUBSETS):
            return binary_entropy_relax(spec, u, t, rspec.tol, rspec.bisect_iter())
    if reg == Regularizer.CATEGORICAL_ENTROPY:
        if kind in (StructureKind.SUBSETS, StructureKind.K_SUBSETS):
            return categorical_entropy_relax(spec, u, t, rspec.tol, rspec.bisect_iter())
    raise UnsupportedPairError(
        f"no solver for structure {kind.value!r} with regularizer {reg.value!r}"
    )


# --- JSON wire format -------------------------------------------------------

def relaxation_to_dict(rspec: RelaxationSpec) -> dict:
    d = {
        "regularizer": rspec.regularizer.value,
        "temperature": rspec.temperature,
        "tol": rspec.tol,
    }
    if rspec.max_iter is not None:
        d["max_iter"] = rspec.max_iter
    if rspec.clip_range is not None:
        d["clip_range"] = rspec.clip_range
    return d


def relaxation_from_dict(d: dict) -> RelaxationSpec:
    try:
        return RelaxationSpec(
            regularizer=Regularizer(d["regularizer"]),
            temperature=float(d.get("temperature", 1.0)),
            tol=float(d.get("tol", 1e-10)),
            max_iter=d.get("max_iter"),
            clip_range=d.get("clip_range"),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidSpecError(f"malformed relaxation spec: {d!r}") from exc
