#!/usr/bin/env python3
"""
A Priori Suboptimality Degrees
==============================

alpha_{N,m} for systems whose stage cost decays along some control like
C * sigma^n * min_u l(x0, u). Provides:
- the envelope partial sums gamma_i
- alpha_nm in closed form, evaluated as products of ratios (no overflow)
- curves over m and over N, the best m for a horizon
- the smallest horizon reaching a target alpha
- the (N, m, alpha) table as a DataFrame
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from errors import InputError, NotFoundError

logger = logging.getLogger(__name__)

SCAN_CAP = 1000
DEFAULT_M1_MAX = 60


@dataclass(frozen=True)
class ExpoControllability:
    C: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.C) and self.C >= 1):
            raise InputError(f"C must be at least 1, got {self.C}")
        if not 0 < self.sigma < 1:
            raise InputError(f"sigma must lie in (0, 1), got {self.sigma}")

    @property
    def gamma_limit(self) -> float:
        return self.C / (1.0 - self.sigma)


def gamma(i: int, ec: ExpoControllability) -> float:
    """C (1 - sigma^i) / (1 - sigma); gamma_1 = C."""
    if i < 1:
        raise InputError(f"gamma index must be at least 1, got {i}")
    return ec.C * (1.0 - ec.sigma ** i) / (1.0 - ec.sigma)


def _ratio_product(first: int, last: int, ec: ExpoControllability) -> float:
    """prod_{i=first}^{last} (gamma_i - 1) / gamma_i, summed in log space."""
    i = np.arange(first, last + 1, dtype=float)
    g = ec.C * (1.0 - ec.sigma ** i) / (1.0 - ec.sigma)
    if np.any(g <= 1.0):
        return 0.0
    return float(np.exp(np.sum(np.log1p(-1.0 / g))))


def alpha_nm(N: int, m: int, ec: ExpoControllability) -> float:
    """Suboptimality degree of m-step MPC with horizon N.

    1 - prod(g-1)_{m+1..N} prod(g-1)_{N-m+1..N}
        / ((prod g - prod(g-1))_{m+1..N} (prod g - prod(g-1))_{N-m+1..N})

    Each product pair is divided through by prod g, so only the ratios
    prod (g-1)/g in [0, 1) are formed. A vanishing numerator gives 1.
    """
    if N < 2:
        raise InputError(f"horizon N must be at least 2, got {N}")
    if not 1 <= m <= N - 1:
        raise InputError(f"m must lie in [1, {N - 1}], got {m}")

    r_head = _ratio_product(m + 1, N, ec)
    r_tail = _ratio_product(N - m + 1, N, ec)
    if r_head == 0.0 or r_tail == 0.0:
        return 1.0
    return 1.0 - (r_head * r_tail) / ((1.0 - r_head) * (1.0 - r_tail))


def alpha_curve_over_m(N: int, ec: ExpoControllability) -> List[float]:
    """[alpha_{N,1}, ..., alpha_{N,N-1}]."""
    return [alpha_nm(N, m, ec) for m in range(1, N)]


def alpha_curve_over_N(m: int, N_values: Iterable[int], ec: ExpoControllability) -> Dict[int, float]:
    return {N: alpha_nm(N, m, ec) for N in N_values}


def best_m(N: int, ec: ExpoControllability) -> int:
    """Smallest m maximising alpha_{N,m} (floor(N/2) on every grid checked)."""
    curve = alpha_curve_over_m(N, ec)
    return int(np.argmax(curve)) + 1


def _policy_m(policy: Union[str, int], N: int) -> Optional[int]:
    if policy == "best":
        return max(1, N // 2)
    if isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        return int(policy) if policy <= N - 1 else None
    raise InputError(f"m policy must be 'best' or a positive integer, got {policy!r}")


def min_horizon(alpha_bar: float, m_policy: Union[str, int], ec: ExpoControllability,
                cap: int = SCAN_CAP) -> int:
    """Smallest N >= 2 with alpha_{N, policy(N)} >= alpha_bar.

    `m_policy` is a fixed m or "best" (m = floor(N/2)); horizons with
    N - 1 < m are skipped for a fixed m.
    """
    if not 0 < alpha_bar < 1:
        raise InputError(f"alpha_bar must lie in (0, 1), got {alpha_bar}")
    if not isinstance(m_policy, str) and m_policy < 1:
        raise InputError(f"fixed m must be at least 1, got {m_policy}")

    for N in range(2, cap + 1):
        m = _policy_m(m_policy, N)
        if m is None:
            continue
        if alpha_nm(N, m, ec) >= alpha_bar:
            logger.debug(f"min_horizon: N={N} (m={m}) reaches alpha_bar={alpha_bar}")
            return N
    raise NotFoundError(f"alpha_bar={alpha_bar} not reached for N <= {cap} "
                        f"(C={ec.C}, sigma={ec.sigma}, m policy {m_policy!r})")


def alpha_grid(ec: ExpoControllability, N_max: int, m1_max: Optional[int] = None) -> pd.DataFrame:
    """Every (N, m) for 2 <= N <= N_max, then the m = 1 column up to m1_max."""
    if N_max < 2:
        raise InputError(f"N_max must be at least 2, got {N_max}")
    m1_max = max(N_max, DEFAULT_M1_MAX) if m1_max is None else m1_max

    rows = [(N, m, alpha_nm(N, m, ec)) for N in range(2, N_max + 1) for m in range(1, N)]
    rows += [(N, 1, alpha_nm(N, 1, ec)) for N in range(N_max + 1, m1_max + 1)]
    logger.info(f"📊 alpha table: {len(rows)} rows (C={ec.C}, sigma={ec.sigma}, N_max={N_max}, m=1 up to {m1_max})")
    return pd.DataFrame(rows, columns=["N", "m", "alpha"])
