"""Orthant-wise limited-memory quasi-Newton minimisation of smooth(x) + sum_j c_j |x_j|."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import NumericalError
from .models import OwlqnConfig

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]

CURVATURE_EPS = 1e-12


class Termination(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAILURE = "line_search_failure"


@dataclass
class OwlqnReport:
    x: np.ndarray
    objective: float
    iterations: int
    reason: Termination
    trace: list[float] = field(default_factory=list)
    evaluations: int = 0

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "termination": self.reason.value,
            "evaluations": self.evaluations,
            "trace": list(self.trace),
        }


def pseudo_gradient(x: np.ndarray, g: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Minimum-norm subgradient of smooth + L1; at x_j = 0 the one-sided derivative that permits descent, else 0."""
    pg = g + c * np.sign(x)
    at_zero = x == 0
    right = g + c
    left = g - c
    pg[at_zero] = np.where(right[at_zero] < 0, right[at_zero], np.where(left[at_zero] > 0, left[at_zero], 0.0))
    return pg


def minimize(
    objective: Objective,
    l1_weights: np.ndarray,
    x0: np.ndarray,
    cfg: OwlqnConfig | None = None,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> OwlqnReport:
    """Minimise objective(x)[0] + l1_weights . |x| starting from x0.

    `objective` returns the smooth value and its gradient. Coordinates with a
    zero L1 weight follow plain L-BFGS; penalised coordinates never cross zero
    within a step and may end exactly at zero.
    """
    cfg = cfg or OwlqnConfig()
    x = np.array(x0, dtype=np.float64)
    c = np.asarray(l1_weights, dtype=np.float64)
    if c.shape != x.shape:
        raise ValueError(f"l1_weights shape {c.shape} does not match x0 shape {x.shape}")
    if np.any(c < 0) or not np.isfinite(c).all():
        raise ValueError("l1_weights must be finite and nonnegative")
    penalized = c > 0

    f, g = objective(x)
    evaluations = 1
    if not np.isfinite(f) or not np.isfinite(g).all():
        raise NumericalError("objective or gradient is not finite at the starting point")
    F = f + float(c @ np.abs(x))
    trace = [F]
    s_hist: deque[np.ndarray] = deque(maxlen=cfg.memory)
    y_hist: deque[np.ndarray] = deque(maxlen=cfg.memory)

    it = 0
    reason = Termination.MAX_ITERS
    while True:
        pg = pseudo_gradient(x, g, c)
        if np.max(np.abs(pg), initial=0.0) <= cfg.grad_tol * max(1.0, np.max(np.abs(x), initial=0.0)):
            reason = Termination.CONVERGED
            break
        if it >= cfg.max_iters:
            break

        d = -_two_loop(pg, s_hist, y_hist)
        d[penalized & (d * pg >= 0)] = 0.0
        if pg @ d >= 0:
            logger.debug("iteration %d: quasi-Newton direction is not a descent direction; resetting memory", it)
            s_hist.clear()
            y_hist.clear()
            d = -pg

        orthant = np.sign(x)
        orthant[x == 0] = np.sign(-pg[x == 0])
        t = 1.0 if s_hist else 1.0 / max(1.0, float(np.linalg.norm(pg)))

        accepted = False
        for _ in range(cfg.max_line_search_steps):
            x_new = x + t * d
            x_new[penalized & (np.sign(x_new) != orthant)] = 0.0
            f_new, g_new = objective(x_new)
            evaluations += 1
            if np.isfinite(f_new) and np.isfinite(g_new).all():
                F_new = f_new + float(c @ np.abs(x_new))
                decrease = float(pg @ (x_new - x))
                if F_new <= F + cfg.sufficient_decrease * min(decrease, 0.0):
                    accepted = True
                    break
            t *= cfg.shrink

        if not accepted:
            reason = Termination.LINE_SEARCH_FAILURE
            break

        s = x_new - x
        y = g_new - g
        if s @ y > CURVATURE_EPS:
            s_hist.append(s)
            y_hist.append(y)
        x, f, g, F = x_new, f_new, g_new, F_new
        it += 1
        trace.append(F)
        logger.debug("iteration %d: objective %.12g, step %.3g", it, F, t)
        if callback is not None:
            callback(it, x)

    if reason != Termination.CONVERGED:
        logger.warning("optimiser stopped after %d iterations: %s", it, reason.value)
    return OwlqnReport(x=x, objective=F, iterations=it, reason=reason, trace=trace, evaluations=evaluations)


def _two_loop(v: np.ndarray, s_hist: deque, y_hist: deque) -> np.ndarray:
    q = v.copy()
    coeffs = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        coeffs.append((rho, a))
    if s_hist:
        q *= (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(coeffs)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q
