"""
rnest - Reference Values
------------------------
Deterministic reference values for the built-in problems.

Gaussian-walk problems of depth 2 are integrated level by level with a tensorized
Gauss-Hermite rule. Under y ~ N(mu, 1) the probabilists' nodes x_i and weights w_i
(normalized to sum to one) give

    E[f(y)] ~= sum_i w_i f(mu + x_i)

Nodes beyond the truncation bound carry negligible weight and are dropped.
"""

import math
from typing import Callable, Optional, Tuple

import numpy as np
import structlog
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate, stats
from scipy.special import expit

from rnest.core import NestedProblem
from rnest.errors import DomainError

log = structlog.get_logger(__name__)

ArrayCoupling = Callable[[np.ndarray, np.ndarray], np.ndarray]
ArrayTerminal = Callable[[np.ndarray], np.ndarray]


def normal_rule(nodes: int = 64, bound: float = 8.0) -> Tuple[np.ndarray, np.ndarray]:
    """Standard-normal quadrature nodes and weights truncated to |x| <= bound."""
    x, w = hermegauss(nodes)
    keep = np.abs(x) <= bound
    x, w = x[keep], w[keep]
    return x, w / w.sum()


def gaussian_chain_oracle(
    mu0: float,
    g0: ArrayCoupling,
    g1: ArrayCoupling,
    g2: ArrayTerminal,
    nodes: int = 64,
    bound: float = 8.0,
) -> float:
    """gamma_0 for y(0) ~ N(mu0, 1), y(1) ~ N(y(0), 1), y(2) ~ N(y(1), 1).

    The couplings receive the current stage as an array and must broadcast.
    """
    x, w = normal_rule(nodes, bound)
    y0 = mu0 + x                                  # (n,)
    y1 = y0[:, None] + x[None, :]                 # (n, n)
    y2 = y1[:, :, None] + x[None, None, :]        # (n, n, n)
    gamma2 = g2(y2) @ w                           # (n, n)
    gamma1 = g1(y1, gamma2) @ w                   # (n,)
    return float(g0(y0, gamma1) @ w)


def gaussian_sine_reference(nodes: int = 64) -> float:
    return gaussian_chain_oracle(
        math.pi / 2.0,
        lambda y, z: np.sin(y + z),
        lambda y, z: np.sin(y - z),
        lambda y: y,
        nodes=nodes,
    )


def sigmoid_reference(nodes: int = 64) -> float:
    return gaussian_chain_oracle(
        0.0,
        lambda y, z: expit(y + z),
        lambda y, z: expit(y + z),
        expit,
        nodes=nodes,
    )


def heavy_tail_reference(df: float = 10.0, ncp: float = 0.5) -> float:
    """gamma_0 of the heavy-tail problem.

    With i.i.d. increments of mean m, gamma_2 = y(1) + m, so the middle coupling is the
    constant c = -sin(m) and gamma_0 = E[sin(eps + c)] for a single increment eps.
    """
    if not df > 1.0:
        raise DomainError(f"the increment mean needs df > 1, got {df}")
    m = float(stats.nct.mean(df, ncp))
    c = -math.sin(m)
    value, abserr = integrate.quad(
        lambda e: math.sin(e + c) * stats.nct.pdf(e, df, ncp),
        -np.inf,
        np.inf,
        limit=200,
    )
    log.debug("heavy_tail_reference", df=df, ncp=ncp, value=value, abserr=abserr)
    return float(value)


def reference_value(problem: NestedProblem) -> Optional[float]:
    """Exact value when known, otherwise the oracle for the problem, otherwise None."""
    if problem.ground_truth is not None:
        return problem.ground_truth
    if problem.name == "sigmoid":
        return sigmoid_reference()
    if problem.name == "heavy-tail":
        return heavy_tail_reference(**problem.params)
    return None
