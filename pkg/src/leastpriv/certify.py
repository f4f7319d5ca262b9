"""Certification of leakage budgets and the executable theorem checks.

All checks run on exact composed joints. Certification compares with an
absolute tolerance of 1e-9 and always reports the achieved value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import round12
from .dist import Channel, JointPmf, Pmf, PosteriorReport, posterior_positivity, push_forward
from .errors import DomainError, LeakageError
from .measures import (
    cmi_arr,
    cond_max_leakage,
    i_inf_arr,
    max_leakage,
    mi_arr,
)

CERT_TOL = 1e-9


@dataclass(frozen=True)
class CertBudget:
    gamma: float

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise LeakageError("gamma must be finite and non-negative")


@dataclass(frozen=True)
class LdpEpsilon:
    epsilon: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.epsilon)

    def __float__(self):
        return self.epsilon


@dataclass(frozen=True)
class AccuracyBoundInput:
    beta: float

    def __post_init__(self):
        if not 0.5 < self.beta < 1.0:
            raise DomainError("beta must lie in the open interval (1/2, 1)")


@dataclass(frozen=True)
class Certificate:
    passed: bool
    achieved: float
    budget: float

    @property
    def residual(self) -> float:
        return self.achieved - self.budget


@dataclass(frozen=True)
class TheoremFlag:
    passed: bool
    residual: float
    applicable: bool = True


@dataclass(frozen=True)
class LeakageReport:
    gamma_lpp: float
    gamma_ulpp: float
    epsilon_ldp: LdpEpsilon
    utility_i1: float
    utility_iinf: float
    posterior: PosteriorReport
    theorem_flags: dict[str, TheoremFlag] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(f.passed for f in self.theorem_flags.values())

    def to_dict(self) -> dict:
        return {
            "gamma_lpp": round12(self.gamma_lpp),
            "gamma_ulpp": round12(self.gamma_ulpp),
            "epsilon_ldp": round12(self.epsilon_ldp.epsilon),
            "utility_i1": round12(self.utility_i1),
            "utility_iinf": round12(self.utility_iinf),
            "posterior": {
                "min_posterior": round12(self.posterior.min_posterior),
                "strictly_positive": self.posterior.strictly_positive,
                "witnesses": [list(w) for w in self.posterior.witnesses],
            },
            "theorem_flags": {
                name: {
                    "passed": flag.passed,
                    "applicable": flag.applicable,
                    "residual": round12(flag.residual),
                }
                for name, flag in self.theorem_flags.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def ldp_epsilon(ch: Channel) -> LdpEpsilon:
    """Smallest epsilon (base 2) with P(z|x) <= 2**eps P(z|x') for all x, x', z."""
    rows = ch.rows
    hi = rows.max(axis=0)
    lo = rows.min(axis=0)
    live = hi > 0
    if np.any(lo[live] == 0):
        return LdpEpsilon(math.inf)
    ratio = float((hi[live] / lo[live]).max())
    return LdpEpsilon(max(math.log2(ratio), 0.0))


def certify_lpp(jxy: JointPmf, ch: Channel, budget: CertBudget, tol: float = CERT_TOL) -> Certificate:
    achieved = float(cond_max_leakage(jxy, ch))
    return Certificate(achieved <= budget.gamma + tol, achieved, budget.gamma)


def certify_ulpp(px: Pmf, ch: Channel, budget: CertBudget, tol: float = CERT_TOL) -> Certificate:
    achieved = float(max_leakage(px, ch))
    return Certificate(achieved <= budget.gamma + tol, achieved, budget.gamma)


def _xyz(jxy: JointPmf, ch: Channel) -> tuple[np.ndarray, int]:
    x = ch.input_axes[0]
    xi = jxy.axis_index(x.name)
    ordered = jxy.transpose(xi, 1 - xi)
    return push_forward(ordered, ch).probs, xi


def theorem_report(jxy: JointPmf, ch: Channel, tol: float = CERT_TOL) -> LeakageReport:
    """Every leakage and utility quantity for (P_XY, channel), plus checks.

    Flags:

    * ``T1_tradeoff`` -- both utilities stay below the conditional
      leakage when the posterior is strictly positive (vacuous otherwise).
    * ``T2_cond_equals_uncond`` -- conditional and unconditional maximal
      leakage agree under strict positivity (vacuous otherwise).
    * ``T3_ldp_implies_lpp`` -- the LDP epsilon dominates both leakages.
    * ``T4_perfect_lpp_markov`` -- zero conditional leakage exactly when
      I(X;Z|Y) is zero.
    """
    pxyz, xi = _xyz(jxy, ch)
    x_axis = jxy.axes[xi]
    px = Pmf(x_axis, pxyz.sum(axis=(1, 2)))
    post = posterior_positivity(jxy, xi, 1 - xi)

    gamma_lpp = float(cond_max_leakage(jxy, ch))
    gamma_ulpp = float(max_leakage(px, ch))
    eps = ldp_epsilon(ch)
    pyz = pxyz.sum(axis=0)
    u1 = max(mi_arr(pyz), 0.0)
    uinf = max(i_inf_arr(pyz), 0.0)
    cmi = max(cmi_arr(np.transpose(pxyz, (0, 2, 1))), 0.0)

    flags = {}
    pos = post.strictly_positive
    r1 = max(u1, uinf) - gamma_lpp
    flags["T1_tradeoff"] = TheoremFlag(not pos or r1 <= tol, r1, pos)
    r2 = abs(gamma_lpp - gamma_ulpp)
    flags["T2_cond_equals_uncond"] = TheoremFlag(not pos or r2 <= tol, r2, pos)
    r3 = max(gamma_lpp, gamma_ulpp) - eps.epsilon
    flags["T3_ldp_implies_lpp"] = TheoremFlag(r3 <= tol, r3)
    zero_leak = gamma_lpp <= tol
    zero_cmi = cmi <= tol
    flags["T4_perfect_lpp_markov"] = TheoremFlag(zero_leak == zero_cmi, abs(gamma_lpp - cmi))
    return LeakageReport(gamma_lpp, gamma_ulpp, eps, u1, uinf, post, flags)


def rows_identical_on_support(px: np.ndarray, rows: np.ndarray, tol: float = 1e-9) -> bool:
    supp = rows[px > 0]
    return bool(np.all(np.abs(supp - supp[0]) <= tol))


# accuracy bound ------------------------------------------------------------

def binary_entropy(p: float) -> float:
    """H2(p) in bits."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binary entropy needs p in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def binary_entropy_inverse(t: float, max_iter: int = 200) -> float:
    """The p in [0, 1/2] with H2(p) = t, by bisection."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"inverse binary entropy needs t in [0, 1], got {t!r}")
    if t == 0.0:
        return 0.0
    if t == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if binary_entropy(mid) < t:
            lo = mid
        else:
            hi = mid
    return hi if abs(binary_entropy(hi) - t) <= abs(binary_entropy(lo) - t) else lo


def calabro_lower_bound(t: float) -> float:
    """t / (2 log2(6/t)), a lower bound on the inverse binary entropy."""
    if not 0.0 < t <= 1.0:
        raise DomainError("the bound is stated for t in (0, 1]")
    return t / (2 * math.log2(6 / t))


def accuracy_bound(beta) -> float:
    """Largest task accuracy compatible with attribute accuracy ``beta``.

    Binary uniform task; ``beta`` caps the accuracy of inferring any
    uniform binary attribute with trivial fundamental leakage.
    """
    if not isinstance(beta, AccuracyBoundInput):
        beta = AccuracyBoundInput(float(beta))
    lb = math.log2(beta.beta)
    return 1 + lb / (2 * math.log2(-6 / lb))
