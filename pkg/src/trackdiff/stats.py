"""Small statistical helpers: Welch's t and the t-distribution tail."""

from __future__ import annotations

import numpy as np
from scipy.special import betainc


def welch_t(a, b):
    """Welch's two-sample t statistic and Welch-Satterthwaite dof.

    Returns (t, dof) for mean(a) - mean(b) under unequal variances.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("welch_t needs at least 2 samples per group")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        return 0.0, float(na + nb - 2)
    t = (a.mean() - b.mean()) / np.sqrt(se2)
    dof = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return float(t), float(dof)


def t_sf(t, dof):
    """Survival function P(T > t) of Student's t via the incomplete beta."""
    if dof <= 0:
        raise ValueError("dof must be positive")
    t = float(t)
    x = dof / (dof + t * t)
    tail = 0.5 * betainc(dof / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def t_two_sided_p(t, dof):
    """Two-sided p-value for an observed t statistic."""
    return min(1.0, 2.0 * t_sf(abs(t), dof))
