"""Executable checks of the protocol's analytical claims.

Parameter validation for the masked exponentiation, exact enumeration of
its information leakage, and the closed-form communication-round counts
of the matrix-inversion pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .protocols import ExpParams
from .ring import RingParams


@dataclass(frozen=True)
class ExpParamReport:
    """Outcome of the correctness-bound check for exponentiation params.

    The masks and inputs stay representable iff
    (r_max - u_min) * log2(e) <= l_f < (l - 1) / 2.
    ``precision_slack_bits`` is l_f minus the left-hand side;
    ``overflow_slack_bits`` is (l-1)/2 minus l_f. Both must be
    non-negative to accept.
    """

    accepted: bool
    precision_slack_bits: float
    overflow_slack_bits: float
    required_lf: float


def validate_exp_params(params: ExpParams, ring: RingParams) -> ExpParamReport:
    required = (params.r_max - params.u_min) * math.log2(math.e)
    precision_slack = ring.lf - required
    overflow_slack = (ring.l - 1) / 2 - ring.lf
    return ExpParamReport(
        accepted=(precision_slack >= 0 and overflow_slack > 0),
        precision_slack_bits=precision_slack,
        overflow_slack_bits=overflow_slack,
        required_lf=required,
    )


@dataclass(frozen=True)
class LeakageReport:
    """Exact leakage statistics of the masked opening d = u + r.

    ``m_u`` and ``m_r`` are the grid cardinalities of the input and mask
    ranges. The degree of leakage after observing d is 1/|support of u|;
    a run is "secure" when the support is the full input range.
    """

    m_u: int
    m_r: int
    p_secure: Fraction
    expected_leakage: Fraction
    p_exact_exposure: Fraction
    enumerated_p_secure: Fraction
    enumerated_expected_leakage: Fraction
    enumerated_p_exact_exposure: Fraction

    @property
    def matches_closed_form(self) -> bool:
        return (self.p_secure == self.enumerated_p_secure
                and self.expected_leakage == self.enumerated_expected_leakage
                and self.p_exact_exposure == self.enumerated_p_exact_exposure)


def leakage_enumerate(m_u: int, m_r: int) -> LeakageReport:
    """Enumerate uniform (u, r) on aligned integer grids and measure leakage.

    For every observable d = u + r the adversary's posterior support of u
    is {max(0, d - m_r + 1) .. min(m_u - 1, d)}; the degree of leakage is
    the reciprocal support size. Exact rational arithmetic throughout.
    """
    if m_u < 1 or m_r < 1:
        raise ValueError("grid cardinalities must be positive")
    if m_u > m_r:
        raise ValueError("unsupported regime: m_u must not exceed m_r")
    if m_u > 10 ** 4 or m_r > 10 ** 4:
        raise ValueError("grids too large to enumerate")

    total = m_u * m_r
    secure = 0
    leakage = Fraction(0)
    exact = 0
    for d in range(m_u + m_r - 1):
        lo = max(0, d - m_r + 1)
        hi = min(m_u - 1, d)
        support = hi - lo + 1
        count = support  # pairs (u, r) with u + r = d
        if support == m_u:
            secure += count
        if support == 1:
            exact += count
        leakage += Fraction(count, total) * Fraction(1, support)

    closed_secure = Fraction(m_r - m_u + 1, m_r)
    closed_leakage = Fraction(m_u + m_r - 1, m_u * m_r)
    closed_exact = Fraction(2, m_u * m_r) if m_u > 1 else Fraction(1)
    return LeakageReport(
        m_u=m_u, m_r=m_r,
        p_secure=closed_secure,
        expected_leakage=closed_leakage,
        p_exact_exposure=closed_exact,
        enumerated_p_secure=Fraction(secure, total),
        enumerated_expected_leakage=leakage,
        enumerated_p_exact_exposure=Fraction(exact, total),
    )


def expected_rounds(protocol: str, n: int = 0, r_div: int = 17) -> int:
    """Closed-form communication-round counts per protocol.

    Cholesky: R_div + (n-2)(4+R_div) + 2; forward: n-1; backward:
    R_div + 1; the full inversion is their sum (22n - 6 at R_div = 17).
    The masked exponentiation is always a single round.
    """
    name = protocol.lower().replace("-", "").replace("_", "")
    if name in ("ppexp", "exp"):
        return 1
    if n < 2:
        raise ValueError("matrix protocols need n >= 2")
    if name == "cholesky":
        return r_div + (n - 2) * (4 + r_div) + 2
    if name == "forward":
        return n - 1
    if name == "backward":
        return r_div + 1
    if name in ("ppmi", "matinv"):
        return (r_div + (n - 2) * (4 + r_div) + 2) + (n - 1) + (r_div + 1)
    raise ValueError(f"unknown protocol {protocol!r}")
