"""Concave smooth surrogates of the l0 indicator and the theta annealing rule."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class SmoothKind(str, enum.Enum):
    LOG = "log"
    EXP = "exp"
    ARCTAN = "arctan"


def _check(x, theta):
    x = np.asarray(x, dtype=float)
    if theta <= 0 or not math.isfinite(theta):
        raise ValueError(f"theta must be positive, got {theta}")
    if np.any(x < 0):
        raise ValueError("smooth surrogate is defined for x >= 0")
    return x


def f_theta(kind: SmoothKind, x, theta: float):
    """Surrogate value; vanishes at 0, concave and increasing in ``x``."""
    kind = SmoothKind(kind)
    x = _check(x, theta)
    if kind is SmoothKind.LOG:
        out = np.log1p(x / theta) / np.log1p(1.0 / theta)
    elif kind is SmoothKind.EXP:
        out = -np.expm1(-x / theta)
    else:
        out = np.arctan(x / theta)
    return out if out.ndim else float(out)


def grad_f_theta(kind: SmoothKind, x, theta: float):
    """Derivative of :func:`f_theta` with respect to ``x``."""
    kind = SmoothKind(kind)
    x = _check(x, theta)
    if kind is SmoothKind.LOG:
        out = 1.0 / (np.log1p(1.0 / theta) * (x + theta))
    elif kind is SmoothKind.EXP:
        # floored so the weight stays strictly positive where exp underflows
        out = np.maximum(np.exp(-x / theta) / theta, np.finfo(float).tiny)
    else:
        out = theta / (theta**2 + x**2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AnnealSchedule:
    theta0: float = 1.0
    beta: float = 0.1
    epsilon: float = 1e-6

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.epsilon <= 0 or self.theta0 <= self.epsilon:
            raise ValueError("need theta0 > epsilon > 0")


def theta_init(block_powers: Sequence[float]) -> float:
    """Starting smoothness: the largest block power of the initial point (1 if all zero)."""
    p = np.asarray(block_powers, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("need at least one block power")
    top = float(p.max())
    return top if top > 0 else 1.0


def theta_next(theta: float, sched: AnnealSchedule) -> Optional[float]:
    """Next smoothness level, or ``None`` once it would drop below epsilon."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    nxt = sched.beta * theta
    return nxt if nxt >= sched.epsilon else None


def theta_levels(theta0: float, sched: AnnealSchedule) -> list[float]:
    levels = [theta0]
    while (nxt := theta_next(levels[-1], sched)) is not None:
        levels.append(nxt)
    return levels
