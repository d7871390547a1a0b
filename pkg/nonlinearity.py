"""
The interaction term f(u) = a1 u + a3 u^3 + a5 u^5, its potential F and the
checks of the growth / dissipativity conditions the estimates rely on.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from errors import DomainError
from spectral import PAD_FACTOR, SpectralField, from_fine, to_fine

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NonlinearitySpec:
    """Odd polynomial f(u) = a1 u + a3 u^3 + a5 u^5 (default: the critical quintic u^5)"""
    a1: float = 0.0
    a3: float = 0.0
    a5: float = 1.0

    def __post_init__(self):
        if not all(np.isfinite(c) for c in (self.a1, self.a3, self.a5)):
            raise DomainError(f"nonlinearity coefficients must be finite: {self}")

    @classmethod
    def zero(cls) -> "NonlinearitySpec":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def linear(cls, slope: float) -> "NonlinearitySpec":
        return cls(slope, 0.0, 0.0)

    @property
    def is_linear(self) -> bool:
        return self.a3 == 0.0 and self.a5 == 0.0

    def f(self, u):
        u2 = u * u
        return u * (self.a1 + u2 * (self.a3 + u2 * self.a5))

    def df(self, u):
        u2 = u * u
        return self.a1 + u2 * (3 * self.a3 + u2 * 5 * self.a5)

    def potential(self, u):
        u2 = u * u
        return u2 * (self.a1 / 2 + u2 * (self.a3 / 4 + u2 * self.a5 / 6))

    @property
    def min_slope(self) -> float:
        """min over u of f'(u); -inf when f' is unbounded below"""
        if self.a5 < 0 or (self.a5 == 0 and self.a3 < 0):
            return -math.inf
        if self.a5 == 0:
            return self.a1
        w = -3 * self.a3 / (10 * self.a5)
        return self.a1 - 9 * self.a3 ** 2 / (20 * self.a5) if w > 0 else self.a1

    @property
    def K(self) -> float:
        """Smallest K >= 0 with f' >= -K"""
        return max(0.0, -self.min_slope)


def f_eval(spec: NonlinearitySpec, u: SpectralField) -> SpectralField:
    """f(u) evaluated on the oversampled grid and truncated back to the dealiased band"""
    return from_fine(u.grid, spec.f(to_fine(u, PAD_FACTOR)), PAD_FACTOR)


def df_eval(spec: NonlinearitySpec, u: SpectralField) -> np.ndarray:
    """f'(u) on the oversampled physical grid"""
    return spec.df(to_fine(u, PAD_FACTOR))


def potential_eval(spec: NonlinearitySpec, u: SpectralField) -> float:
    """(F(u), 1)"""
    return float(np.sum(spec.potential(to_fine(u, PAD_FACTOR))) * u.grid.fine_cell(PAD_FACTOR))


@dataclass
class AssumptionReport:
    """Constants certifying the growth/dissipativity conditions, or the witnesses against them"""
    spec: NonlinearitySpec
    K: float
    kappa: float
    C_dissipative: float
    C_growth: float
    kappa_critical: Optional[float]
    C_critical: Optional[float]
    shift: Optional[float]
    beta: Optional[float]
    beta_scan: Optional[float]
    C_pointwise: float
    standard: bool
    critical: bool
    violations: List[str] = field(default_factory=list)
    witness: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.standard and self.critical

    def to_dict(self) -> dict:
        return {
            "coefficients": [self.spec.a1, self.spec.a3, self.spec.a5],
            "K": self.K, "kappa": self.kappa,
            "C_dissipative": self.C_dissipative, "C_growth": self.C_growth,
            "kappa_critical": self.kappa_critical, "C_critical": self.C_critical,
            "shift": self.shift, "beta": self.beta, "beta_scan": self.beta_scan,
            "C_pointwise": self.C_pointwise,
            "standard": self.standard, "critical": self.critical,
            "violations": self.violations, "witness": self.witness,
        }


def _cubic_min(c1: float, c2: float, c3: float) -> float:
    """min over w >= 0 of c1 w + c2 w^2 + c3 w^3 (c3 >= 0, bounded below)"""
    candidates = [0.0]
    roots = np.roots([3 * c3, 2 * c2, c1]) if c3 else ([-c1 / (2 * c2)] if c2 else [])
    candidates += [float(r.real) for r in np.atleast_1d(roots) if abs(np.imag(r)) < 1e-12 and r.real > 0]
    return min(c1 * w + c2 * w * w + c3 * w ** 3 for w in candidates)


def verify_assumptions(spec: NonlinearitySpec, radius: float = 4.0, samples: int = 401) -> AssumptionReport:
    """Closed-form constants for the growth/dissipativity conditions plus a falsifying scan on [-R, R]^2"""
    violations: List[str] = []
    witness: Dict[str, float] = {}
    u = np.linspace(-radius, radius, 2 * samples + 1)
    slope = spec.df(u)

    K = spec.K
    if math.isinf(K):
        violations.append("f' is unbounded below")
        witness["u"] = float(u[np.argmin(slope)])
    if spec.a5 > 0 or spec.a3 > 0:
        kappa = 1.0
    else:
        kappa = spec.a1 if spec.a1 > 0 else 0.0
    if kappa > 0 and not math.isinf(K):
        C_dis = max(0.0, -_cubic_min(spec.a1 - kappa, spec.a3, spec.a5))
    else:
        C_dis = math.inf
        violations.append("f(u)u >= -C + kappa u^2 fails for every kappa > 0")
        witness.setdefault("u", float(u[np.argmin(spec.f(u) * u)]))
    C_growth = max(abs(spec.a1) + 1.5 * abs(spec.a3), 1.5 * abs(spec.a3) + 5 * abs(spec.a5))
    C_point = abs(spec.a1) + abs(spec.a3) + abs(spec.a5)

    standard = not violations
    if standard:
        tol = 1e-9 * (1 + C_dis + C_growth)
        if np.any(spec.f(u) * u + C_dis - kappa * u ** 2 < -tol):
            bad = u[np.argmin(spec.f(u) * u - kappa * u ** 2)]
            violations.append("scan: f(u)u >= -C + kappa u^2")
            witness["u"] = float(bad)
        if np.any(slope + K < -tol):
            violations.append("scan: f' >= -K")
            witness["u"] = float(u[np.argmin(slope)])
        if np.any(np.abs(slope) > C_growth * (1 + u ** 4) + tol):
            violations.append("scan: |f'| <= C(1 + u^4)")
            witness["u"] = float(u[np.argmax(np.abs(slope) - C_growth * (1 + u ** 4))])
        standard = not violations

    kappa6 = C6 = shift = beta = beta_scan = None
    critical = spec.a5 > 0
    if not critical:
        violations.append("f' >= -C + kappa u^4 needs a positive quintic coefficient")
    else:
        kappa6 = spec.a5
        # f' - kappa6 u^4 = a1 + 3 a3 u^2 + 4 a5 u^4
        lowest = spec.a1 + (min(0.0, -9 * spec.a3 ** 2 / (16 * spec.a5)) if spec.a3 < 0 else 0.0)
        C6 = max(0.0, -lowest)
        shift = C6 + kappa6
        beta = kappa6 / 270.0
        a, b = np.meshgrid(np.linspace(-radius, radius, samples), np.linspace(-radius, radius, samples))
        off = a != b

        def shifted(x):
            return spec.f(x) + shift * x

        lhs = (shifted(a[off]) - shifted(b[off])) * (a[off] - b[off])
        rhs = (1 + np.abs(a[off]) + np.abs(b[off])) ** 4 * (a[off] - b[off]) ** 2
        ratio = lhs / rhs
        beta_scan = float(ratio.min())
        if beta_scan < beta * (1 - 1e-12):
            i = int(np.argmin(ratio))
            violations.append("scan: monotonicity with weight (1+|a|+|b|)^4")
            witness.update(a=float(a[off][i]), b=float(b[off][i]))
            critical = False
        if np.any(slope < -C6 + kappa6 * u ** 4 - 1e-9 * (1 + C6)):
            violations.append("scan: f' >= -C + kappa u^4")
            witness["u"] = float(u[np.argmin(slope + C6 - kappa6 * u ** 4)])
            critical = False
        if np.any(np.abs(spec.f(u)) > C_point * (1 + np.abs(u) ** 5) * (1 + 1e-12)):
            violations.append("scan: |f(a)| <= C(1 + |a|^5)")
            critical = False

    report = AssumptionReport(
        spec=spec, K=K, kappa=kappa, C_dissipative=C_dis, C_growth=C_growth,
        kappa_critical=kappa6, C_critical=C6, shift=shift, beta=beta, beta_scan=beta_scan,
        C_pointwise=C_point, standard=standard, critical=critical,
        violations=violations, witness=witness,
    )
    if violations:
        logger.info(f"nonlinearity {spec} violates: {'; '.join(violations)}")
    return report
