"""
kernels/decay.py

Eigenvalue decay profiles and the truncation index m(eps).

A decay profile bounds the Mercer eigenvalues of a kernel:
- exponential: mu_j <= g * exp(-c j)
- polynomial:  mu_j <= g * j^(-c), c > 1
"""

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import zeta


EXPONENTIAL = "exponential"
POLYNOMIAL = "polynomial"
PROFILE_KINDS = (EXPONENTIAL, POLYNOMIAL)

# Direct summation stops once a term drops below this fraction of the running sum.
SUMMATION_RTOL = 1e-15
SUMMATION_CHUNK = 65536
MAX_DIRECT_TERMS = 1 << 20


@dataclass(frozen=True)
class DecayProfile:
    """(g, c) eigendecay profile of a Mercer kernel."""

    kind: str
    g: float
    c: float

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in PROFILE_KINDS:
            raise ValueError(f"unknown decay profile kind: {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not (math.isfinite(self.g) and self.g > 0):
            raise ValueError(f"profile constant g must be finite and > 0, got {self.g}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"profile constant c must be finite and > 0, got {self.c}")
        if kind == POLYNOMIAL and self.c <= 1:
            raise ValueError(f"polynomial decay requires c > 1, got {self.c}")

    def eigenvalue(self, j: Union[int, np.ndarray]) -> Union[float, np.ndarray]:
        """mu_j for 1-based index j."""
        j = np.asarray(j, dtype=float)
        if self.kind == EXPONENTIAL:
            out = self.g * np.exp(-self.c * j)
        else:
            out = self.g * np.power(j, -self.c)
        return float(out) if out.ndim == 0 else out

    def eigenvalues(self, n: int) -> np.ndarray:
        """First n eigenvalues mu_1..mu_n."""
        return np.asarray(self.eigenvalue(np.arange(1, n + 1)), dtype=float)

    def exact_tail(self, m: int) -> float:
        """sum_{j > m} mu_j in closed form (geometric series / Hurwitz zeta)."""
        if m < 0:
            raise ValueError(f"m must be >= 0, got {m}")
        if self.kind == EXPONENTIAL:
            return self.g * math.exp(-self.c * (m + 1)) / (1.0 - math.exp(-self.c))
        return self.g * float(zeta(self.c, m + 1))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "g": self.g, "c": self.c}


def tail_bound(profile: DecayProfile, m: int) -> float:
    """
    Analytic upper bound on sum_{j > m} mu_j.

    Args:
        profile: Decay profile
        m: Truncation index (>= 0)

    Returns:
        float: g e^{-c(m+1)} / (1 - e^{-c}) for exponential decay,
        g m^{1-c} / (c - 1) for polynomial decay (+inf when m = 0)

    Examples:
        >>> round(tail_bound(DecayProfile("exponential", 1.0, 1.0), 0), 5)
        0.58198
        >>> tail_bound(DecayProfile("polynomial", 1.0, 2.0), 10)
        0.1
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    if profile.kind == EXPONENTIAL:
        return profile.g * math.exp(-profile.c * (m + 1)) / (1.0 - math.exp(-profile.c))
    if m == 0:
        return math.inf
    return profile.g * m ** (1.0 - profile.c) / (profile.c - 1.0)


def direct_tail_sum(profile: DecayProfile, m: int) -> float:
    """
    sum_{j > m} mu_j by direct summation.

    Terms are summed in chunks until a term falls below SUMMATION_RTOL times the
    accumulated sum, or MAX_DIRECT_TERMS terms have been added; the analytic
    remainder bound past that point is added, so the result never undershoots.
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    total = 0.0
    start = m + 1
    while start - m - 1 < MAX_DIRECT_TERMS:
        j = np.arange(start, start + SUMMATION_CHUNK, dtype=float)
        terms = profile.eigenvalue(j)
        small = np.nonzero(terms < SUMMATION_RTOL * (total + np.cumsum(terms)))[0]
        if small.size:
            stop = int(small[0])
            total += float(np.sum(terms[:stop]))
            last = start + stop - 1
            return total + tail_bound(profile, max(last, 1))
        total += float(np.sum(terms))
        start += SUMMATION_CHUNK
    return total + tail_bound(profile, start - 1)


def _eigensystem_tail(eigenvalues: Sequence[float], m: int) -> float:
    mu = np.asarray(eigenvalues, dtype=float)
    return float(np.sum(mu[m:]))


def truncation_index(profile_or_eigenvalues, eps: float) -> int:
    """
    m(eps) = min{m >= 0 : sum_{j > m} mu_j <= eps}.

    Args:
        profile_or_eigenvalues: A DecayProfile, or the stored eigenvalues of an
            explicit eigensystem (any sequence of mu_j, in order)
        eps: Tolerance (> 0)

    Returns:
        int: the smallest m whose eigenvalue tail is <= eps

    Examples:
        >>> truncation_index(DecayProfile("exponential", 1.0, 1.0), 0.01)
        5
        >>> truncation_index([0.5, 0.25], 1.0)
        0
    """
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")

    if not isinstance(profile_or_eigenvalues, DecayProfile):
        mu = np.asarray(profile_or_eigenvalues, dtype=float)
        tails = np.concatenate([np.cumsum(mu[::-1])[::-1], [0.0]])
        return int(np.nonzero(tails <= eps)[0][0])

    profile = profile_or_eigenvalues
    if profile.exact_tail(0) <= eps:
        return 0

    # gallop to a passing index, then bisect
    lo, hi = 0, 1
    while profile.exact_tail(hi) > eps:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if profile.exact_tail(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi
