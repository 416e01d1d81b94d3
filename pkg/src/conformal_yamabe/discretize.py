"""Uniform radial grids, second-order difference stencils and the tridiagonal solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularSystemError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform nodes on ``[r_min, r_max]``.

    ``left="symmetry"`` imposes an even reflection through the left node via
    a ghost value ``u[-1] = u[1]``. At ``r_min = 0`` this is regularity at
    the pole; at ``r_min > 0`` it is the fixed sphere of an inversion
    isometry (zero radial derivative).
    """

    r_min: float
    r_max: float
    N: int
    left: str = "dirichlet"

    def __post_init__(self):
        if self.N < 5:
            raise ValueError(f"grid needs at least 5 nodes, got N={self.N}")
        if not self.r_max > self.r_min:
            raise ValueError("grid needs r_max > r_min")
        if self.left not in ("dirichlet", "symmetry"):
            raise ValueError(f"unknown left boundary kind {self.left!r}")
        if self.r_min < 0:
            raise ValueError("radial grids start at r >= 0")

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / (self.N - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.N)

    @property
    def symmetric(self) -> bool:
        return self.left == "symmetry"


def _check(values, grid: Grid) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} values, got shape {values.shape}")
    return values


def d1(values, grid: Grid) -> np.ndarray:
    u = _check(values, grid)
    h = grid.h
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    out[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    if grid.symmetric:
        out[0] = 0.0
    else:
        out[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    return out


def d2(values, grid: Grid) -> np.ndarray:
    u = _check(values, grid)
    h2 = grid.h**2
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h2
    out[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h2
    if grid.symmetric:
        out[0] = 2 * (u[1] - u[0]) / h2
    else:
        out[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h2
    return out


@dataclass
class BandedSystem:
    """Tridiagonal system; ``sub[i]`` multiplies ``x[i]`` in row ``i + 1``
    and ``sup[i]`` multiplies ``x[i + 1]`` in row ``i``."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if len(self.sub) != n - 1 or len(self.sup) != n - 1 or len(self.rhs) != n:
            raise ValueError("inconsistent tridiagonal band lengths")

    @property
    def size(self) -> int:
        return len(self.diag)

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[1:] += self.sub * x[:-1]
        y[:-1] += self.sup * x[1:]
        return y

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


def solve_banded(system: BandedSystem) -> np.ndarray:
    """Solve the tridiagonal system with LAPACK (partial pivoting).

    A singular matrix or a non-finite solution raises SingularSystemError.
    """
    ab = np.zeros((3, system.size))
    ab[0, 1:] = system.sup
    ab[1] = system.diag
    ab[2, :-1] = system.sub
    try:
        with np.errstate(all="ignore"):
            x = scipy.linalg.solve_banded((1, 1), ab, np.asarray(system.rhs, dtype=float))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("non-finite solution of the tridiagonal system")
    return x
