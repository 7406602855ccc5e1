"""
Discontinuous Galerkin dG(r) Lagrange basis on the reference interval (0, 1).

The r + 1 support points follow one of four Gauss families. The family does not
change the discrete space, only which degrees of freedom carry the interval
limits and therefore which jump couplings appear in the space-time matrix.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy.special import roots_legendre

from .exceptions import DoFIndexError, NodeComputationError, UnsupportedDegreeError
from .polynomials import barycentric_weights, lagrange_derivatives, lagrange_values, legendre_table


MAX_TEMPORAL_DEGREE = 10
NEWTON_TOLERANCE = 1e-14
NEWTON_MAX_ITERATIONS = 100


class SupportType(Enum):
    lobatto = "lobatto"
    legendre = "legendre"
    radau_left = "radau-left"
    radau_right = "radau-right"

    @classmethod
    def _missing_(cls, value):
        # accept "RadauLeft", "radau_left", "RADAU-LEFT", ...
        if isinstance(value, str):
            key = value.strip().lower().replace("_", "").replace("-", "")
            for member in cls:
                if member.value.replace("-", "") == key:
                    return member
        return None


@dataclass(frozen=True)
class TemporalQuadrature:
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.points.size


def make_gauss_quadrature(n_points: int) -> TemporalQuadrature:
    """
    Gauss-Legendre rule with n_points on (0, 1), exact up to degree 2 * n_points - 1.
    """
    x, w = roots_legendre(n_points)
    return TemporalQuadrature(points=(x + 1.0) / 2.0, weights=w / 2.0)


def _newton(x, update, family, degree):
    for _ in range(NEWTON_MAX_ITERATIONS):
        x_old = x
        x = update(x_old)
        if np.max(np.abs(x - x_old)) < NEWTON_TOLERANCE:
            return x
    raise NodeComputationError(params={"family": family, "degree": degree})


def _lobatto_nodes(n: int) -> np.ndarray:
    # n + 1 nodes on [-1, 1]: the endpoints and the zeros of P_n'
    def update(x):
        P = legendre_table(n, x)
        return x - (x * P[:, n] - P[:, n - 1]) / ((n + 1) * P[:, n])

    return _newton(-np.cos(np.pi * np.arange(n + 1) / n), update, "lobatto", n)


def _legendre_nodes(n_points: int) -> np.ndarray:
    # zeros of P_{n_points}
    n = n_points

    def update(x):
        P = legendre_table(n, x)
        dP = n * (x * P[:, n] - P[:, n - 1]) / (x ** 2 - 1.0)
        return x - P[:, n] / dP

    guess = -np.cos(np.pi * (np.arange(n) + 0.75) / (n + 0.5))
    return _newton(guess, update, "legendre", n - 1)


def _radau_left_nodes(n_points: int) -> np.ndarray:
    # -1 and the zeros of (P_{n-1} + P_n) / (1 + x)
    n1 = n_points
    n = n1 - 1

    def update(x):
        x = x.copy()
        free = x[1:]
        P = legendre_table(n1, free)
        f = ((1.0 - free) / n1) * (P[:, n] + P[:, n1])
        fprime = P[:, n] - P[:, n1]
        x[1:] = free - f / fprime
        return x

    guess = -np.cos(2.0 * np.pi * np.arange(n1) / (2 * n + 1))
    return _newton(guess, update, "radau-left", n)


def make_support_points(r: int, support_type: Union[SupportType, str] = SupportType.lobatto) -> np.ndarray:
    """
    The r + 1 support points of the named family on [0, 1], strictly increasing.
    """
    support_type = SupportType(support_type)
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or not 0 <= r <= MAX_TEMPORAL_DEGREE:
        raise UnsupportedDegreeError(params={"degree": r, "low": 0, "high": MAX_TEMPORAL_DEGREE}, attr="r")

    if r == 0:
        single = {
            SupportType.lobatto: 0.5,
            SupportType.legendre: 0.5,
            SupportType.radau_left: 0.0,
            SupportType.radau_right: 1.0,
        }
        return np.array([single[support_type]])

    if support_type is SupportType.lobatto:
        x = _lobatto_nodes(r)
    elif support_type is SupportType.legendre:
        x = _legendre_nodes(r + 1)
    elif support_type is SupportType.radau_left:
        x = _radau_left_nodes(r + 1)
    else:
        x = -_radau_left_nodes(r + 1)[::-1]

    nodes = np.sort((x + 1.0) / 2.0)
    if support_type in (SupportType.lobatto, SupportType.radau_left):
        nodes[0] = 0.0
    if support_type in (SupportType.lobatto, SupportType.radau_right):
        nodes[-1] = 1.0
    return nodes


class TemporalBasis:
    """
    Lagrange basis of P_r on (0, 1) through the support points of `support_type`.
    Immutable after construction.
    """

    def __init__(self, degree: int = 0, support_type: Union[SupportType, str] = SupportType.lobatto):
        self.support_type = SupportType(support_type)
        self.nodes = make_support_points(degree, self.support_type)
        self.nodes.setflags(write=False)
        self.degree = int(degree)
        self._weights = barycentric_weights(self.nodes)
        self._weights.setflags(write=False)

    def __repr__(self):
        return "TemporalBasis(degree=%d, support_type=%r)" % (self.degree, self.support_type.value)

    @property
    def n_dofs(self) -> int:
        return self.degree + 1

    def _check_index(self, i: int) -> None:
        if not 0 <= i <= self.degree:
            raise DoFIndexError(params={"index": i, "size": self.n_dofs})

    def shape_values(self, t) -> np.ndarray:
        return lagrange_values(self.nodes, self._weights, t)

    def shape_dts(self, t) -> np.ndarray:
        return lagrange_derivatives(self.nodes, self._weights, t)

    def shape_value(self, i: int, t: float) -> float:
        self._check_index(i)
        return float(self.shape_values(t)[0, i])

    def shape_dt(self, i: int, t: float) -> float:
        self._check_index(i)
        return float(self.shape_dts(t)[0, i])

    def limit_left(self) -> np.ndarray:
        return self.shape_values(0.0)[0]

    def limit_right(self) -> np.ndarray:
        return self.shape_values(1.0)[0]


def temporal_mass_matrix(basis: TemporalBasis) -> np.ndarray:
    """
    M_ij = int_0^1 phi_j phi_i dt.
    """
    quadrature = make_gauss_quadrature(basis.degree + 1)
    phi = basis.shape_values(quadrature.points)
    return (phi.T * quadrature.weights) @ phi


def temporal_derivative_matrix(basis: TemporalBasis) -> np.ndarray:
    """
    D_ij = int_0^1 phi_j' phi_i dt (row: test function, column: ansatz function).
    """
    quadrature = make_gauss_quadrature(basis.degree + 1)
    phi = basis.shape_values(quadrature.points)
    dphi = basis.shape_dts(quadrature.points)
    return (phi.T * quadrature.weights) @ dphi
