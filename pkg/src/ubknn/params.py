"""Closed-form choices of k, s and B from the convergence-rate analysis.

Logarithms are natural.  The analysis fixes these quantities only up to
constants, so each formula takes a multiplier (default 1.0).  Real values are
rounded half-up, except the subsample size, which is rounded up, and then
clamped into their admissible ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

UNDERSAMPLING = "undersampling"
UNDERBAGGING = "underbagging"
BAG1NN_HIGH_DIM = "bag1nn-d>2alpha"
BAG1NN_LOW_DIM = "bag1nn-d<=2alpha"


@dataclass(frozen=True)
class SmoothnessSpec:
    d: int
    alpha: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.d < 1:
            raise ValueError(f"d must be at least 1, got {self.d}")

    @property
    def high_dim(self) -> bool:
        return self.d > 2 * self.alpha


@dataclass(frozen=True)
class ParamChoice:
    k: int
    s: int
    B: int
    regime: str


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, v))


def choose_undersampling_k(s_u: int, spec: SmoothnessSpec, k_mult: float = 1.0) -> int:
    """``k = s_u^{2a/(2a+d)} (log s_u)^{d/(2a+d)}`` for a single under-sampled set of size ``s_u``."""
    if s_u < 3:
        raise ValueError(f"need at least 3 accepted samples, got {s_u}")
    a2, d = 2 * spec.alpha, spec.d
    k = k_mult * s_u ** (a2 / (a2 + d)) * math.log(s_u) ** (d / (a2 + d))
    return _clamp(round_half_up(k), 1, s_u)


def _effective_size(n: int, rho: float) -> tuple[float, int]:
    rn = rho * n
    if rn < 3:
        raise ValueError(f"rho * n = {rn:g} is below 3")
    # rho * n == M * n_min, an integer up to float error
    return rn, max(1, round_half_up(rn))


def choose_underbagging(n: int, rho: float, spec: SmoothnessSpec,
                        s_mult: float = 1.0, k_mult: float = 1.0) -> ParamChoice:
    rn, upper = _effective_size(n, rho)
    a2, d = 2 * spec.alpha, spec.d
    log_rn = math.log(rn)
    if spec.high_dim:
        s_real = rn ** (d / (a2 + d)) * log_rn ** (a2 / (a2 + d))
    else:
        s_real = math.sqrt(rn * log_rn)
    s = _clamp(math.ceil(s_mult * s_real), 1, upper)
    B = max(1, round_half_up(rn / s))
    k = _clamp(round_half_up(k_mult * s * (log_rn / rn) ** (d / (a2 + d))), 1, s)
    return ParamChoice(k, s, B, UNDERBAGGING)


def choose_bag1nn(n: int, rho: float, spec: SmoothnessSpec) -> ParamChoice:
    """Subsample size and rounds for under-bagging with a single neighbour."""
    rn, upper = _effective_size(n, rho)
    a2, d = 2 * spec.alpha, spec.d
    log_rn = math.log(rn)
    if spec.high_dim:
        s_real = rn ** (d / (a2 + d)) * log_rn ** ((a2 - d) / (a2 + d))
        B_real = rn ** (a2 / (a2 + d)) * log_rn ** ((d - a2) / (a2 + d))
        regime = BAG1NN_HIGH_DIM
    else:
        s_real = math.sqrt(rn * log_rn)
        B_real = math.sqrt(rn / log_rn)
        regime = BAG1NN_LOW_DIM
    s = _clamp(math.ceil(s_real), 1, upper)
    return ParamChoice(1, s, max(1, round_half_up(B_real)), regime)
