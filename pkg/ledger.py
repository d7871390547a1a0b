"""
Energy functional and the per-sample ledger of its parts and of the two
dissipation integrals.

    E(u, v) = 1/2 ||v||^2 + 1/2 ||grad u||^2 + (F(u), 1) - (g, u)
    dE/dt = - alpha ||v||^2 - gamma ||(-Laplacian)^{theta/2} v||^2
"""
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, List

import numpy as np

from nonlinearity import potential_eval
from spectral import StatePair, frac_norm_sq, grad_norm_sq, inner, l2_norm_sq

if TYPE_CHECKING:
    from dynamics import ModelParams

CSV_COLUMNS = ("time", "E", "kinetic", "gradient", "potential", "forcing",
               "diss_alpha", "diss_gamma", "cum_diss")


@dataclass(frozen=True)
class LedgerRow:
    time: float
    energy: float
    kinetic: float
    gradient: float
    potential: float
    forcing: float
    diss_alpha: float
    diss_gamma: float
    cum_alpha: float = 0.0
    cum_gamma: float = 0.0

    @property
    def cum_diss(self) -> float:
        return self.cum_alpha + self.cum_gamma

    @property
    def dissipation(self) -> float:
        return self.diss_alpha + self.diss_gamma

    def with_cumulative(self, cum_alpha: float, cum_gamma: float) -> "LedgerRow":
        return LedgerRow(**{**asdict(self), "cum_alpha": cum_alpha, "cum_gamma": cum_gamma})

    def csv_values(self) -> List[float]:
        return [self.time, self.energy, self.kinetic, self.gradient, self.potential,
                self.forcing, self.diss_alpha, self.diss_gamma, self.cum_diss]


def dissipation_rates(xi: StatePair, params: "ModelParams"):
    """(alpha ||v||^2, gamma ||(-Laplacian)^{theta/2} v||^2)"""
    return params.alpha * l2_norm_sq(xi.v), params.gamma * frac_norm_sq(xi.v, params.theta)


def energy(xi: StatePair, params: "ModelParams") -> LedgerRow:
    """Energy of xi with its four parts and the instantaneous dissipation rates"""
    kinetic = 0.5 * l2_norm_sq(xi.v)
    gradient = 0.5 * grad_norm_sq(xi.u)
    potential = potential_eval(params.nonlinearity, xi.u)
    forcing = -inner(params.g, xi.u)
    diss_alpha, diss_gamma = dissipation_rates(xi, params)
    return LedgerRow(
        time=xi.time,
        energy=kinetic + gradient + potential + forcing,
        kinetic=kinetic, gradient=gradient, potential=potential, forcing=forcing,
        diss_alpha=diss_alpha, diss_gamma=diss_gamma,
    )


@dataclass
class EnergyLedger:
    """Energy rows aligned with the samples of one trajectory"""
    rows: List[LedgerRow] = field(default_factory=list)

    def append(self, row: LedgerRow):
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows])

    @property
    def times(self) -> np.ndarray:
        return self.column("time")

    @property
    def energies(self) -> np.ndarray:
        return self.column("energy")

    @property
    def cumulative(self) -> np.ndarray:
        return self.column("cum_diss")

    def table(self) -> np.ndarray:
        """Rows in the fixed CSV column order"""
        return np.array([row.csv_values() for row in self.rows]).reshape(-1, len(CSV_COLUMNS))

    def additivity_error(self) -> float:
        """max |E - (kinetic + gradient + potential + forcing)|"""
        if not self.rows:
            return 0.0
        parts = self.column("kinetic") + self.column("gradient") + self.column("potential") + self.column("forcing")
        return float(np.max(np.abs(self.energies - parts)))
