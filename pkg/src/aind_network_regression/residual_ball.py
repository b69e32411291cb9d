"""
Weighted projection onto a residual ball

    {(beta, alpha) : ||X beta - y + alpha||_2 <= radius}

with an optional alpha block. Stationarity of the Lagrangian with multiplier
mu on the squared constraint gives

    alpha = alpha0 - (mu / w_a) r,   beta = beta0 - (mu / w_b) X^T r,
    (I + mu (I / w_a + X X^T / w_b)) r = r0,

where r0 = X beta0 - y + alpha0 is the residual at the unconstrained point.
With X = U S V^T computed once, ||r(mu)|| only costs O(n) per evaluation and
decreases monotonically in mu, so the active multiplier is a scalar root.
"""

import logging
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import svd
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

_MAX_DOUBLINGS = 200


class InfeasibleConstraintError(ValueError):
    """Raised when no beta satisfies the residual constraint."""


class BallProjection(NamedTuple):
    """Result of a residual-ball projection."""

    beta: np.ndarray
    alpha: Optional[np.ndarray]
    multiplier: float


class ResidualBallProjector:
    """Projects onto the residual ball of a fixed (X, y)."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        """
        Factor X once.

        Parameters
        ----------
        X : np.ndarray
          n x p matrix, possibly rank-deficient or zero.
        y : np.ndarray
          Length-n vector.

        """
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        n = self.X.shape[0]
        self.U, s, self.Vt = svd(self.X, full_matrices=True)
        self.s_sq = np.zeros(n)
        self.s_sq[: len(s)] = s**2
        tiny = np.finfo(float).eps * max(self.X.shape) * max(
            self.s_sq.max(initial=0.0), 1.0
        )
        self.null_space = self.s_sq <= tiny

    def reconstruct(self) -> np.ndarray:
        """U S V^T, for checking the factorization."""
        n, p = self.X.shape
        k = min(n, p)
        return (self.U[:, :k] * np.sqrt(self.s_sq[:k])) @ self.Vt[:k, :]

    def residual(
        self, beta: np.ndarray, alpha: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """X beta - y (+ alpha)."""
        r = self.X @ beta - self.y
        if alpha is not None:
            r = r + alpha
        return r

    def project(
        self,
        beta0: np.ndarray,
        radius: float,
        alpha0: Optional[np.ndarray] = None,
        weight_alpha: float = 1.0,
        weight_beta: float = 1.0,
    ) -> BallProjection:
        """
        Minimize w_b ||beta - beta0||^2 + w_a ||alpha - alpha0||^2 subject to
        ||X beta - y + alpha|| <= radius. Without alpha0 the alpha block is
        absent and the problem is a plain projection of beta0.

        Parameters
        ----------
        beta0 : np.ndarray
          Unconstrained beta, length p.
        radius : float
          Positive ball radius.
        alpha0 : Optional[np.ndarray]
          Unconstrained alpha, length n, or None.
        weight_alpha, weight_beta : float
          Positive weights w_a and w_b.

        Returns
        -------
        BallProjection
          The minimizer and the constraint multiplier (0 when inactive).

        Raises
        ------
        InfeasibleConstraintError
          Without alpha, if the residual ball does not meet the range of X.

        """
        if not radius > 0:
            raise ValueError(f"radius must be positive, got {radius}")
        beta0 = np.asarray(beta0, dtype=float)
        r0 = self.residual(beta0, alpha0)
        norm_r0 = np.linalg.norm(r0)
        if norm_r0 <= radius:
            alpha = None if alpha0 is None else np.array(alpha0, dtype=float)
            return BallProjection(beta0.copy(), alpha, 0.0)

        coeff = self.U.T @ r0
        kappa = 0.0 if alpha0 is None else 1.0 / weight_alpha
        rate = kappa + self.s_sq / weight_beta

        def excess(mu: float) -> float:
            """||r(mu)|| - radius, decreasing in mu."""
            return np.linalg.norm(coeff / (1.0 + mu * rate)) - radius

        if alpha0 is not None:
            # ||r(mu)|| <= ||r0|| / (1 + mu / w_a) in exact arithmetic only
            upper = weight_alpha * max(
                norm_r0 / radius - 1.0, np.finfo(float).eps
            )
        else:
            floor = np.linalg.norm(coeff[self.null_space])
            if floor >= radius:
                raise InfeasibleConstraintError(
                    f"Smallest attainable residual {floor} exceeds radius "
                    f"{radius}"
                )
            upper = 1.0
        # rounding in U^T r0 can leave excess(upper) a few ulps above zero
        for _ in range(_MAX_DOUBLINGS):
            if excess(upper) <= 0:
                break
            upper *= 2.0
        else:  # pragma: no cover
            raise InfeasibleConstraintError(
                f"No multiplier found below {upper}"
            )

        mu = brentq(
            excess,
            0.0,
            upper,
            xtol=1e-15,
            rtol=4 * np.finfo(float).eps,
            maxiter=500,
        )
        r = self.U @ (coeff / (1.0 + mu * rate))
        beta = beta0 - (mu / weight_beta) * (self.X.T @ r)
        alpha = None
        if alpha0 is not None:
            alpha = np.asarray(alpha0, dtype=float) - (mu / weight_alpha) * r
        return BallProjection(beta, alpha, float(mu))
