"""
Proximal operators. prox(f, t, v) is the proximal operator of the scaled
function t*f, i.e. the minimizer of t*f(z) + (1/2)||z - v||^2.
"""

from abc import ABC, abstractmethod
from typing import Dict, Type

import numpy as np


class Regularizer(ABC):
    """A closed proper convex cost f seen through evaluation and prox."""

    name: str = ""

    @abstractmethod
    def __call__(self, beta: np.ndarray) -> float:
        """Evaluate f at beta."""

    @abstractmethod
    def prox(self, t: float, v: np.ndarray) -> np.ndarray:
        """Proximal operator of t*f at v, for t > 0."""

    def __repr__(self) -> str:
        """Registry name."""
        return f"{type(self).__name__}({self.name!r})"


class L1Norm(Regularizer):
    """f(beta) = ||beta||_1"""

    name = "l1"

    def __call__(self, beta: np.ndarray) -> float:
        """Sum of absolute values."""
        return float(np.sum(np.abs(beta)))

    def prox(self, t: float, v: np.ndarray) -> np.ndarray:
        """Soft-thresholding at t."""
        return soft_threshold(v, t)


class SquaredL2Norm(Regularizer):
    """f(beta) = (1/2)||beta||_2^2"""

    name = "sq_l2"

    def __call__(self, beta: np.ndarray) -> float:
        """Half the squared Euclidean norm."""
        return 0.5 * float(np.dot(beta, beta))

    def prox(self, t: float, v: np.ndarray) -> np.ndarray:
        """Shrinkage v / (1 + t)."""
        return np.asarray(v, dtype=float) / (1.0 + t)


class ZeroFunction(Regularizer):
    """f(beta) = 0"""

    name = "zero"

    def __call__(self, beta: np.ndarray) -> float:
        """Always zero."""
        return 0.0

    def prox(self, t: float, v: np.ndarray) -> np.ndarray:
        """Identity."""
        return np.array(v, dtype=float)


REGULARIZERS: Dict[str, Type[Regularizer]] = {
    cls.name: cls for cls in (L1Norm, SquaredL2Norm, ZeroFunction)
}


def get_regularizer(name: str) -> Regularizer:
    """
    Look up a regularizer by its configuration name.

    Parameters
    ----------
    name : str
      One of "l1", "zero", "sq_l2".

    Returns
    -------
    Regularizer

    Raises
    ------
    KeyError
      For an unknown name.

    """
    try:
        return REGULARIZERS[name]()
    except KeyError:
        raise KeyError(
            f"Unknown regularizer {name!r}. "
            f"Expected one of {sorted(REGULARIZERS)}"
        )


def soft_threshold(v: np.ndarray, thresh: float) -> np.ndarray:
    """Elementwise sign(v) * max(|v| - thresh, 0)."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def prox(f: Regularizer, t: float, v: np.ndarray) -> np.ndarray:
    """
    Proximal operator of t*f at v.

    Raises
    ------
    ValueError
      If t is not positive.

    """
    if not t > 0:
        raise ValueError(f"prox scale must be positive, got {t}")
    return f.prox(t, np.asarray(v, dtype=float))


def f_lambda(f: Regularizer, lam: float, v: np.ndarray) -> np.ndarray:
    """
    The composed operator 2 * prox_{(lam/2) f}(v / 2). For the l1 norm this
    is soft-thresholding at lam.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return 2.0 * prox(f, lam / 2.0, np.asarray(v, dtype=float) / 2.0)


def project_l2_ball(
    center: np.ndarray, radius: float, v: np.ndarray
) -> np.ndarray:
    """Euclidean projection of v onto the ball of given center and radius."""
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    center = np.asarray(center, dtype=float)
    v = np.asarray(v, dtype=float)
    offset = v - center
    norm = np.linalg.norm(offset)
    if norm <= radius:
        return v.copy()
    return center + (radius / norm) * offset
