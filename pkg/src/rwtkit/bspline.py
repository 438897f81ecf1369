"""Cubic B-spline basis on a uniform grid.

The basis spans ``[lo, hi]`` with ``grid_size`` equal intervals and carries
``grid_size + 3`` cardinal cubic bumps, the outer ones centred beyond the
ends so every point of the span sees four active functions.  On the span
the functions sum to one exactly (partition of unity) and every basis
function is C^2; outside the span they decay to zero smoothly, so an
edge backed by this basis degenerates to whatever its linear bypass does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParam

__all__ = ["CubicSplineBasis"]


def _bump(t: np.ndarray) -> np.ndarray:
    """The cardinal cubic B-spline on support [0, 4]."""
    return np.select(
        [
            (t >= 0.0) & (t < 1.0),
            (t >= 1.0) & (t < 2.0),
            (t >= 2.0) & (t < 3.0),
            (t >= 3.0) & (t <= 4.0),
        ],
        [
            t**3 / 6.0,
            (-3.0 * t**3 + 12.0 * t**2 - 12.0 * t + 4.0) / 6.0,
            (3.0 * t**3 - 24.0 * t**2 + 60.0 * t - 44.0) / 6.0,
            (4.0 - t) ** 3 / 6.0,
        ],
        default=0.0,
    )


def _bump_derivative(t: np.ndarray) -> np.ndarray:
    return np.select(
        [
            (t >= 0.0) & (t < 1.0),
            (t >= 1.0) & (t < 2.0),
            (t >= 2.0) & (t < 3.0),
            (t >= 3.0) & (t <= 4.0),
        ],
        [
            t**2 / 2.0,
            (-3.0 * t**2 + 8.0 * t - 4.0) / 2.0,
            (3.0 * t**2 - 16.0 * t + 20.0) / 2.0,
            -((4.0 - t) ** 2) / 2.0,
        ],
        default=0.0,
    )


@dataclass(frozen=True)
class CubicSplineBasis:
    """Uniform cubic B-spline basis over ``[lo, hi]``.

    ``grid_size`` counts the intervals; at least 4 are required so the
    interior is wider than one bump's support.
    """

    grid_size: int
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        if self.grid_size < 4:
            raise InvalidParam(f"grid_size must be >= 4, got {self.grid_size}")
        if not self.hi > self.lo:
            raise InvalidParam(f"need hi > lo, got ({self.lo}, {self.hi})")

    @property
    def n_basis(self) -> int:
        return self.grid_size + 3

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.grid_size

    def _shifted(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        s = (u[..., np.newaxis] - self.lo) / self.step
        return s + 3.0 - np.arange(self.n_basis)

    def evaluate(self, u) -> np.ndarray:
        """Basis matrix with shape ``u.shape + (n_basis,)``."""
        t = self._shifted(u)
        values = np.zeros(t.shape)
        active = (t >= 0.0) & (t <= 4.0)
        values[active] = _bump(t[active])
        return values

    def derivative(self, u) -> np.ndarray:
        """Derivative of each basis function, same shape as :meth:`evaluate`."""
        t = self._shifted(u)
        derivs = np.zeros(t.shape)
        active = (t >= 0.0) & (t <= 4.0)
        derivs[active] = _bump_derivative(t[active])
        return derivs / self.step

    def evaluate_with_derivative(self, u) -> tuple[np.ndarray, np.ndarray]:
        """Values and derivatives in one pass.

        Equivalent to (:meth:`evaluate`, :meth:`derivative`) but shares the
        shifted argument and only touches the 4-wide support of each bump,
        which matters when this sits inside a training loop.
        """
        t = self._shifted(u)
        values = np.zeros(t.shape)
        derivs = np.zeros(t.shape)
        active = (t >= 0.0) & (t <= 4.0)
        v = t[active]
        values[active] = _bump(v)
        derivs[active] = _bump_derivative(v)
        return values, derivs / self.step

    def fit(self, u, targets) -> np.ndarray:
        """Least-squares coefficients reproducing ``targets`` at ``u``."""
        b = self.evaluate(np.asarray(u, dtype=float).ravel())
        coefs, *_ = np.linalg.lstsq(b, np.asarray(targets, dtype=float).ravel(), rcond=None)
        return coefs
