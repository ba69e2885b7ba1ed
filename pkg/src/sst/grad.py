"""Gradients of relaxed solutions with respect to utilities.

The Jacobian of every relaxation here is symmetric, so a single central
finite difference along a direction ``d`` doubles as the vector-Jacobian
product needed for backpropagation: two extra solver calls, no dense
matrix.  Closed forms exist for the softmax, the coordinatewise maps,
the bisection solvers (by the implicit function theorem), and any
exponential-family relaxation small enough to enumerate, where the
Jacobian is the Gibbs covariance over temperature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EnumerationLimitError, InputError, InvalidSpecError, UnsupportedPairError
from .relax import Regularizer, RelaxationSpec, relax, softmax_simplex
from .structures import StructureKind, StructureSpec, _check_dim, enumerate_vertices

__all__ = [
    "FDConfig",
    "GradcheckReport",
    "fd_vjp",
    "fd_jacobian",
    "analytic_jacobian",
    "gradcheck",
]


@dataclass(frozen=True)
class FDConfig:
    epsilon: float = 1e-4
    scheme: str = "central"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidSpecError("epsilon must be > 0")
        if self.scheme != "central":
            raise InvalidSpecError(f"unknown finite-difference scheme {self.scheme!r}")


def fd_vjp(spec: StructureSpec, rspec: RelaxationSpec, u: np.ndarray,
           d: np.ndarray, fd: FDConfig = FDConfig()) -> np.ndarray:
    """Symmetric finite-difference estimate of J(u) . d.

    Because the Jacobian of the relaxed solution is symmetric, this is
    also the pullback of ``d`` through the solver.
    """
    u = np.asarray(_check_dim(spec, u), dtype=float)
    d = np.asarray(d, dtype=float)
    if d.shape != u.shape:
        raise InputError(f"direction must have shape {u.shape}, got {d.shape}")
    if not np.isfinite(d).all():
        raise InputError("direction must be finite")
    eps = fd.epsilon
    xp = relax(spec, rspec, u + eps * d).x
    xm = relax(spec, rspec, u - eps * d).x
    return (xp - xm) / (2.0 * eps)


def fd_jacobian(spec: StructureSpec, rspec: RelaxationSpec, u: np.ndarray,
                fd: FDConfig = FDConfig()) -> np.ndarray:
    """Dense central-difference Jacobian, one coordinate direction at a time."""
    u = np.asarray(_check_dim(spec, u), dtype=float)
    n = u.shape[0]
    cols = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols[:, j] = fd_vjp(spec, rspec, u, e, fd)
    return cols


def _gibbs_covariance_jacobian(spec, u, t, limit=10_000):
    verts = np.stack(enumerate_vertices(spec, limit=limit)).astype(float)
    logw = verts @ (u / t)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    mean = verts.T @ w
    second = verts.T @ (verts * w[:, None])
    return (second - np.outer(mean, mean)) / t


def analytic_jacobian(spec: StructureSpec, rspec: RelaxationSpec, u: np.ndarray) -> np.ndarray:
    """Exact Jacobian of the relaxed solution in ``u`` where a form is known."""
    u = np.asarray(_check_dim(spec, u), dtype=float)
    t = rspec.temperature
    reg = rspec.regularizer
    kind = spec.kind
    n = u.shape[0]

    if kind == StructureKind.ONE_HOT and reg in (
        Regularizer.SHANNON, Regularizer.CATEGORICAL_ENTROPY, Regularizer.EXPFAM_ENTROPY
    ):
        p = softmax_simplex(u, t).x
        return (np.diag(p) - np.outer(p, p)) / t

    if reg == Regularizer.EXPFAM_ENTROPY:
        if kind == StructureKind.SUBSETS:
            x = relax(spec, rspec, u).x
            return np.diag(x * (1.0 - x)) / t
        # Gibbs covariance over temperature, by enumeration
        try:
            return _gibbs_covariance_jacobian(spec, u, t)
        except EnumerationLimitError as exc:
            raise UnsupportedPairError(
                f"{kind.value!r} instance too large to enumerate a covariance Jacobian; use fd_vjp"
            ) from exc

    if reg == Regularizer.BINARY_ENTROPY and kind in (
        StructureKind.ONE_HOT, StructureKind.SUBSETS, StructureKind.K_SUBSETS
    ):
        x = relax(spec, rspec, u).x
        s = x * (1.0 - x)
        if kind == StructureKind.SUBSETS:
            return np.diag(s) / t
        total = s.sum()
        if total == 0.0:
            return np.zeros((n, n))
        return (np.diag(s) - np.outer(s, s) / total) / t

    if reg == Regularizer.CATEGORICAL_ENTROPY and kind in (
        StructureKind.SUBSETS, StructureKind.K_SUBSETS
    ):
        x = relax(spec, rspec, u).x
        free = x < 1.0
        if kind == StructureKind.SUBSETS:
            return np.diag(np.where(free, x, 0.0)) / t
        xf = np.where(free, x, 0.0)
        total = xf.sum()
        if total == 0.0:
            return np.zeros((n, n))
        return (np.diag(xf) - np.outer(xf, xf) / total) / t

    if reg == Regularizer.EUCLIDEAN and kind in (
        StructureKind.ONE_HOT, StructureKind.SUBSETS, StructureKind.K_SUBSETS
    ):
        x = relax(spec, rspec, u).x
        if kind == StructureKind.SUBSETS:
            z = u / t
            return np.diag(((z > 0.0) & (z < 1.0)).astype(float)) / t
        if kind == StructureKind.ONE_HOT:
            free = x > 0.0
        else:
            free = (x > 0.0) & (x < 1.0)
        m = int(free.sum())
        if m == 0:
            return np.zeros((n, n))
        fv = free.astype(float)
        return (np.diag(fv) - np.outer(fv, fv) / m) / t

    raise UnsupportedPairError(
        f"no closed-form Jacobian for {kind.value!r} with {reg.value!r}; use fd_vjp"
    )


@dataclass(frozen=True)
class GradcheckReport:
    symmetry_defect: float
    max_discrepancy: Optional[float]
    covariance_discrepancy: Optional[float]
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "symmetry_defect": self.symmetry_defect,
            "max_discrepancy": self.max_discrepancy,
            "covariance_discrepancy": self.covariance_discrepancy,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def gradcheck(spec: StructureSpec, rspec: RelaxationSpec, u: np.ndarray,
              tolerance: float = 1e-6, fd: FDConfig = FDConfig()) -> GradcheckReport:
    """Compare the dense finite-difference Jacobian against every exact
    form available for the pair, and measure its symmetry defect."""
    jac = fd_jacobian(spec, rspec, u, fd)
    symmetry = float(np.abs(jac - jac.T).max())
    discrepancy = None
    try:
        exact = analytic_jacobian(spec, rspec, u)
        discrepancy = float(np.abs(jac - exact).max())
    except UnsupportedPairError:
        pass
    cov_disc = None
    if rspec.regularizer == Regularizer.EXPFAM_ENTROPY:
        try:
            cov = _gibbs_covariance_jacobian(
                spec, np.asarray(u, dtype=float), rspec.temperature
            )
            cov_disc = float(np.abs(jac - cov).max())
        except EnumerationLimitError:
            pass
    checks = [symmetry] + [v for v in (discrepancy, cov_disc) if v is not None]
    return GradcheckReport(
        symmetry_defect=symmetry,
        max_discrepancy=discrepancy,
        covariance_discrepancy=cov_disc,
        tolerance=tolerance,
        passed=bool(max(checks) <= tolerance),
    )
