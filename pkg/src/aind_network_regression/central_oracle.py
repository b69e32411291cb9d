"""
Centralized reference solver for min f(beta) s.t. ||X beta - y|| <= eps, and
an independent solver for the node subproblem used to cross-check the
distributed implementation on small instances.
"""

import logging
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from aind_network_regression.datasplit import GlobalData
from aind_network_regression.proxlib import Regularizer, prox
from aind_network_regression.regression_node import (
    NodeLocal,
    NodeSolution,
    shrunk_sums,
)
from aind_network_regression.residual_ball import ResidualBallProjector

logger = logging.getLogger(__name__)


class CentralSolution(BaseModel):
    """Reference estimate computed with the full data."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    beta: np.ndarray = Field(description="Estimate of beta, length p.")
    objective: float = Field(description="f at the estimate.")
    residual_norm: float = Field(description="||X beta - y||_2")
    iterations: int = Field(ge=0)
    converged: bool = Field(
        description="Whether the stopping rule fired before max_iter."
    )


def solve_central(
    data: GlobalData,
    f: Regularizer,
    eps: float,
    lam: float = 1.0,
    max_iter: int = 1_000_000,
    tol: float = 1e-12,
    rho: float = 1.0,
) -> CentralSolution:
    """
    Two-operator Douglas-Rachford on f plus the indicator of the residual
    ball. Starting from z = 0, each iteration computes
    x = prox_{lam f}(z), w = P(2x - z) and z <- z + rho (w - x), and stops
    once ||dz|| <= tol * (1 + ||z||). The returned estimate is the last
    projected point w, which is feasible.

    Parameters
    ----------
    data : GlobalData
    f : Regularizer
    eps : float
      Positive residual bound.
    lam : float
      Prox scale. Default is 1.0.
    max_iter : int
      Default is 10**6.
    tol : float
      Default is 1e-12.
    rho : float
      Relaxation in (0, 2). Default is 1.0.

    Returns
    -------
    CentralSolution
      With converged=False if max_iter was reached first.

    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not 0 < rho < 2:
        raise ValueError(f"rho must lie in (0, 2), got {rho}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    projector = ResidualBallProjector(data.X, data.y)
    z = np.zeros(data.p)
    w = z
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        x = prox(f, lam, z)
        w = projector.project(2.0 * x - z, eps).beta
        step = rho * (w - x)
        threshold = tol * (1.0 + np.linalg.norm(z))
        z = z + step
        if np.linalg.norm(step) <= threshold:
            converged = True
            break
    residual_norm = float(np.linalg.norm(projector.residual(w)))
    if converged:
        logger.info(
            f"Central solve converged in {iterations} iterations, "
            f"f={f(w):.6g}, residual={residual_norm:.6g}"
        )
    else:
        logger.warning(
            f"Central solve did not converge within {max_iter} iterations"
        )
    return CentralSolution(
        beta=w,
        objective=f(w),
        residual_norm=residual_norm,
        iterations=iterations,
        converged=converged,
    )


class OracleSolution(NamedTuple):
    """Node subproblem solution from the independent solver."""

    solution: NodeSolution
    converged: bool


def qp_oracle_node_subproblem(
    local: NodeLocal,
    a_in: np.ndarray,
    b_out: np.ndarray,
    b_in: np.ndarray,
    f: Regularizer,
    lam: float,
    max_bisections: int = 400,
) -> OracleSolution:
    """
    Solve the node subproblem in the full variable x = (a_1, .., a_d, beta)
    without the share reduction or the SVD: for a multiplier mu the
    stationary point solves the dense system
    (Q + 2 mu A^T A) x = q + 2 mu A^T y_i with A = [I .. I X_i], and mu is
    found by bisection on the constraint residual. Intended for small
    instances in tests.

    node_subproblem collapses the d shares into one weighted (alpha, beta)
    projection and runs brentq on the diagonal secular function of the SVD
    of X_i. Here the shares stay separate and each trial multiplier costs
    an LU solve of the (d n + p) square system, with the bisection driven
    only by ||A x - y_i||. The two routes share nothing but the problem
    statement, so their agreement checks the share reduction as well as
    the root search.
    """
    X, y = local.summand.X, local.summand.y
    n, p = X.shape
    d = local.degree
    target_a = -a_in
    target_b = shrunk_sums(f, lam, b_out, b_in) - b_out

    size = d * n + p
    Q = 2.0 * np.eye(size)
    Q[d * n :, d * n :] *= d
    q = 2.0 * np.concatenate([target_a.ravel(), target_b.sum(axis=0)])
    A = np.hstack([np.tile(np.eye(n), d), X])

    def stationary(mu: float) -> np.ndarray:
        """Minimizer of the Lagrangian at multiplier mu."""
        lhs = Q + 2.0 * mu * (A.T @ A)
        rhs = q + 2.0 * mu * (A.T @ y)
        return np.linalg.solve(lhs, rhs)

    def residual_norm(x: np.ndarray) -> float:
        """||A x - y_i||"""
        return float(np.linalg.norm(A @ x - y))

    x = stationary(0.0)
    converged = True
    if residual_norm(x) > local.radius:
        low, high = 0.0, 1.0
        while residual_norm(stationary(high)) > local.radius:
            low, high = high, 2.0 * high
            if high > 1e300:
                converged = False
                break
        for _ in range(max_bisections):
            mid = 0.5 * (low + high)
            if mid <= low or mid >= high:
                break
            if residual_norm(stationary(mid)) > local.radius:
                low = mid
            else:
                high = mid
        x = stationary(high)

    a_hat = x[: d * n].reshape(d, n)
    beta = x[d * n :]
    solution = NodeSolution(a_hat, beta, a_hat.sum(axis=0))
    return OracleSolution(solution, converged)
