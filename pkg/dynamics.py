"""
Time integration of

    u_tt + gamma (-Laplacian)^theta u_t + alpha u_t - Laplacian u + f(u) = g

Every mode k carries the linear system (u_k, v_k)' = A_k (u_k, v_k) + (0, N_k) with
A_k = [[0, 1], [-|k|^2 - a1, -mu_k]], mu_k = gamma |k|^{2 theta} + alpha and
N = g - a3 u^3 - a5 u^5.  The linear part, a1 u included, is propagated exactly;
N enters through the second-order exponential Runge-Kutta rule (ETD2RK) of the
variation-of-constants formula.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from errors import DivergenceError, DomainError
from ledger import EnergyLedger, dissipation_rates, energy
from nonlinearity import NonlinearitySpec, df_eval, f_eval
from spectral import (GridSpec, SpectralField, StatePair, energy_space_norm,
                      energy_space_norm_sq, frac_laplacian_apply, frac_symbol)

logger = logging.getLogger(__name__)

SCHEME = "etd2rk"
SCHEME_ORDER = 2
DIVERGENCE_NORM = 1e8
STABILITY_C = 0.5


@dataclass(frozen=True)
class ModelParams:
    """gamma, alpha, theta, the nonlinearity and the time-independent forcing g"""
    gamma: float
    alpha: float
    g: SpectralField
    theta: float = 0.5
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"gamma must be a positive number, got {self.gamma}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise DomainError(f"alpha must be non-negative, got {self.alpha}")
        if not 0.0 <= self.theta <= 2.0:
            raise DomainError(f"theta must lie in [0, 2], got {self.theta}")

    @property
    def grid(self) -> GridSpec:
        return self.g.grid

    @property
    def lyapunov_regime(self) -> bool:
        """alpha = 0 on the torus: the mean mode is undamped"""
        return self.grid.is_torus and self.alpha == 0.0

    def damping_symbol(self) -> np.ndarray:
        """mu_k = gamma |k|^{2 theta} + alpha"""
        return self.gamma * frac_symbol(self.grid, self.theta) + self.alpha

    def describe(self) -> dict:
        nl = self.nonlinearity
        return {"gamma": self.gamma, "alpha": self.alpha, "theta": self.theta,
                "nonlinearity": [nl.a1, nl.a3, nl.a5],
                "grid": {"dim": self.grid.dim, "n": self.grid.n, "kind": self.grid.kind,
                         "dealias": self.grid.dealias}}


@dataclass(frozen=True)
class IntegratorMeta:
    dt: float
    stride: int
    steps: int
    scheme: str = SCHEME
    order: int = SCHEME_ORDER
    dealias: float = 2.0 / 3.0


@dataclass
class TrajectoryRecord:
    """Sampled states of one run of S(t) with their energy ledger"""
    params: ModelParams
    initial: StatePair
    times: np.ndarray
    states: List[StatePair]
    ledger: EnergyLedger
    meta: IntegratorMeta

    @property
    def final(self) -> StatePair:
        return self.states[-1]

    def norms(self, level: float = 0.0) -> np.ndarray:
        return np.array([energy_space_norm(xi, level) for xi in self.states])

    def window(self, start: float, length: float = 1.0) -> np.ndarray:
        """Indices of the samples inside [start, start + length]"""
        tol = 1e-9 * max(1.0, length)
        return np.flatnonzero((self.times >= start - tol) & (self.times <= start + length + tol))


# ─── Per-mode linear algebra ──────────────────────────────────

def _cosh_sinh(lam: np.ndarray, mu: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """C = e^{st} cosh(wt), S = e^{st} sinh(wt)/w with s = -mu/2, w^2 = mu^2/4 - lam"""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    s = -0.5 * mu
    disc = 0.25 * mu * mu - lam
    z = disc * t * t
    decay = np.exp(s * t)
    C = np.empty_like(z)
    S = np.empty_like(z)

    small = np.abs(z) < 1e-3
    zs = z[small]
    C[small] = decay[small] * (1 + zs / 2 + zs ** 2 / 24 + zs ** 3 / 720)
    S[small] = decay[small] * t * (1 + zs / 6 + zs ** 2 / 120 + zs ** 3 / 5040)

    osc = ~small & (disc < 0)
    om = np.sqrt(-disc[osc])
    C[osc] = decay[osc] * np.cos(om * t)
    S[osc] = decay[osc] * np.sin(om * t) / om

    real = ~small & (disc > 0)
    w = np.sqrt(disc[real])
    slow = np.exp((s[real] + w) * t)
    fast = np.exp((s[real] - w) * t)
    C[real] = 0.5 * (slow + fast)
    S[real] = np.where(2 * w * t > 50, (slow - fast) / (2 * w), fast * np.expm1(2 * w * t) / (2 * w))
    return C, S


def propagator_entries(lam: np.ndarray, mu: np.ndarray, t: float):
    """Entries (p11, p12, p21, p22) of exp(t A) for A = [[0, 1], [-lam, -mu]]"""
    C, S = _cosh_sinh(lam, mu, t)
    half = 0.5 * np.asarray(mu, dtype=float)
    return C + half * S, S, -np.asarray(lam, dtype=float) * S, C - half * S


def linear_propagator(k: Sequence[int], dt: float, params: ModelParams,
                      with_linear_term: bool = False) -> np.ndarray:
    """exp(dt A_k) as a 2x2 real matrix; with_linear_term adds a1 to |k|^2 as the stepper does"""
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    lam = float(sum(int(ki) ** 2 for ki in k))
    mu = params.gamma * (lam ** params.theta if lam > 0 else 0.0) + params.alpha
    stiff = lam + params.nonlinearity.a1 if with_linear_term else lam
    p11, p12, p21, p22 = propagator_entries(np.array([stiff]), np.array([mu]), dt)
    return np.array([[p11[0], p12[0]], [p21[0], p22[0]]])


def forcing_weights(lam: np.ndarray, mu: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """int_0^t e^{(t-s)A} e2 ds and int_0^t e^{(t-s)A} e2 (s/t) ds, shape (m, 2) each"""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    big = np.zeros((lam.size, 4, 4))
    big[:, 0, 1] = t
    big[:, 1, 0] = -t * lam
    big[:, 1, 1] = -t * mu
    big[:, 1, 2] = t
    big[:, 2, 3] = 1.0
    ex = expm(big)
    return ex[:, :2, 2], ex[:, :2, 3]


@dataclass(frozen=True)
class _Weights:
    p: Tuple[np.ndarray, ...]
    i0: Tuple[np.ndarray, np.ndarray]
    i1: Tuple[np.ndarray, np.ndarray]
    half_p: Tuple[np.ndarray, ...]
    half_i0: Tuple[np.ndarray, np.ndarray]


@lru_cache(maxsize=16)
def _step_weights(grid: GridSpec, gamma: float, alpha: float, theta: float, stiffness: float,
                  dt: float) -> _Weights:
    lam_u, inverse = np.unique(grid.lam.ravel(), return_inverse=True)
    inverse = inverse.ravel()
    mu_u = gamma * np.where(lam_u > 0, np.power(np.where(lam_u > 0, lam_u, 1.0), theta), 0.0) + alpha
    # the linear part a1 u of f is propagated exactly with the Laplacian
    lam_u = lam_u + stiffness

    def spread(values):
        return values[inverse].reshape(grid.shape)

    def weights(h):
        p = tuple(spread(e) for e in propagator_entries(lam_u, mu_u, h))
        i0, i1 = forcing_weights(lam_u, mu_u, h)
        return p, (spread(i0[:, 0]), spread(i0[:, 1])), (spread(i1[:, 0]), spread(i1[:, 1]))

    p, i0, i1 = weights(dt)
    half_p, half_i0, _ = weights(0.5 * dt)
    return _Weights(p, i0, i1, half_p, half_i0)


class ExponentialStepper:
    """ETD2RK stepping for one parameter set and step size"""

    def __init__(self, params: ModelParams, dt: float):
        if not (np.isfinite(dt) and dt > 0):
            raise DomainError(f"time step must be positive, got {dt}")
        self.params = params
        self.dt = dt
        self.grid = params.grid
        nl = params.nonlinearity
        self.explicit = NonlinearitySpec(0.0, nl.a3, nl.a5)
        self.weights = _step_weights(self.grid, params.gamma, params.alpha, params.theta, nl.a1, dt)
        self.g_hat = params.g.project().coeffs

    def forcing(self, u: np.ndarray) -> np.ndarray:
        """Coefficients of g - (f(u) - a1 u)"""
        if self.explicit.is_linear:
            return self.g_hat
        return self.g_hat - f_eval(self.explicit, SpectralField(self.grid, u)).coeffs

    @staticmethod
    def _propagate(p, u, v):
        return p[0] * u + p[1] * v, p[2] * u + p[3] * v

    def advance(self, xi: StatePair, n0: Optional[np.ndarray] = None):
        """One step; returns (new state, forcing at the new state, half-step state)"""
        w = self.weights
        u, v = xi.u.coeffs, xi.v.coeffs
        n0 = self.forcing(u) if n0 is None else n0
        pu, pv = self._propagate(w.p, u, v)
        au, av = pu + w.i0[0] * n0, pv + w.i0[1] * n0
        n1 = self.forcing(au)
        du = n1 - n0
        new_u, new_v = au + w.i1[0] * du, av + w.i1[1] * du
        hu, hv = self._propagate(w.half_p, u, v)
        half = StatePair(SpectralField(self.grid, hu + w.half_i0[0] * n0),
                         SpectralField(self.grid, hv + w.half_i0[1] * n0), xi.time + 0.5 * self.dt)
        new = StatePair(SpectralField(self.grid, new_u), SpectralField(self.grid, new_v), xi.time + self.dt)
        if not new.is_finite():
            raise DivergenceError("non-finite coefficients", new.time)
        return new, self.forcing(new_u), half


def step(xi: StatePair, dt: float, params: ModelParams) -> StatePair:
    """One ETD2RK step of the damped wave system"""
    return ExponentialStepper(params, dt).advance(xi)[0]


def stable_dt(xi: StatePair, params: ModelParams, c: float = STABILITY_C) -> float:
    """Step budget c / (1 + max |f_nl'(u)|) of the explicit part; c / (1 + 5 ||u||_inf^4) for f = u^5"""
    nl = params.nonlinearity
    explicit = NonlinearitySpec(0.0, nl.a3, nl.a5)
    return c / (1.0 + float(np.max(np.abs(df_eval(explicit, xi.u)))))


def _step_count(T: float, dt: float) -> int:
    if not (np.isfinite(T) and T >= 0):
        raise DomainError(f"final time must be non-negative, got {T}")
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * max(T, dt):
        raise DomainError(f"final time {T} is not a multiple of dt = {dt}")
    return steps


def integrate(xi0: StatePair, T: float, dt: float, stride: int, params: ModelParams) -> TrajectoryRecord:
    """Run S(t) on [0, T]; samples every stride steps, ledger with per-step Simpson dissipation"""
    if stride < 1:
        raise DomainError(f"sample stride must be a positive step count, got {stride}")
    if xi0.grid != params.grid:
        raise DomainError("initial state and forcing live on different grids")
    steps = _step_count(T, dt)
    stepper = ExponentialStepper(params, dt)
    meta = IntegratorMeta(dt=dt, stride=stride, steps=steps, dealias=params.grid.dealias)

    xi = xi0.project()
    t0 = xi.time
    row = energy(xi, params)
    cum_a = cum_g = 0.0
    ledger = EnergyLedger([row])
    states, times = [xi], [xi.time]
    warned = False

    def partial():
        return TrajectoryRecord(params, states[0], np.array(times), list(states), ledger, meta)

    n0 = None
    for n in range(1, steps + 1):
        try:
            new, n1, half = stepper.advance(xi, n0)
        except DivergenceError as exc:
            raise DivergenceError("trajectory diverged", exc.time, partial()) from exc
        new = new.at(t0 + n * dt)
        norm_sq = energy_space_norm_sq(new)
        if not norm_sq <= DIVERGENCE_NORM ** 2:
            raise DivergenceError(f"energy norm {math.sqrt(norm_sq):.3e} above {DIVERGENCE_NORM:.0e}",
                                  new.time, partial())
        mid_a, mid_g = dissipation_rates(half, params)
        new_row = energy(new, params)
        cum_a += dt / 6 * (row.diss_alpha + 4 * mid_a + new_row.diss_alpha)
        cum_g += dt / 6 * (row.diss_gamma + 4 * mid_g + new_row.diss_gamma)
        xi, n0, row = new, n1, new_row
        if n % stride == 0 or n == steps:
            ledger.append(row.with_cumulative(cum_a, cum_g))
            states.append(xi)
            times.append(xi.time)
            if not warned and dt > stable_dt(xi, params):
                logger.warning(f"dt={dt:g} exceeds the stability budget {stable_dt(xi, params):.3g} "
                               f"at t={xi.time:.3g}")
                warned = True
    return TrajectoryRecord(params, states[0], np.array(times), states, ledger, meta)


def integrate_ensemble(states: Sequence[StatePair], T: float, dt: float, stride: int,
                       params: ModelParams, workers: Optional[int] = None) -> List[TrajectoryRecord]:
    """Independent trajectories on a thread pool; order of results follows the input"""
    workers = workers or int(os.getenv("DWSIM_WORKERS", "1"))
    if workers <= 1 or len(states) <= 1:
        return [integrate(xi, T, dt, stride, params) for xi in states]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda xi: integrate(xi, T, dt, stride, params), states))


def galerkin_project(xi: StatePair, M: int) -> StatePair:
    """Zero every mode with |k|_inf > M"""
    limit = xi.grid.n // 2 if xi.grid.is_torus else xi.grid.n
    if not 0 <= M <= limit:
        raise DomainError(f"mode cutoff must lie in [0, {limit}], got {M}")
    return xi.project(xi.grid.kinf <= M)


def second_time_derivative(xi: StatePair, params: ModelParams) -> SpectralField:
    """u_tt = Laplacian u - alpha v - gamma (-Laplacian)^theta v - f(u) + g"""
    return (-frac_laplacian_apply(xi.u, 1.0) - xi.v * params.alpha
            - frac_laplacian_apply(xi.v, params.theta) * params.gamma
            - f_eval(params.nonlinearity, xi.u) + params.g.project())


def time_derivative_state(xi: StatePair, params: ModelParams) -> StatePair:
    """xi_{u_t} = (u_t, u_tt)"""
    return StatePair(xi.v, second_time_derivative(xi, params), xi.time)


def observed_order(xi0: StatePair, T: float, dt: float, params: ModelParams,
                   levels: int = 3) -> Tuple[np.ndarray, np.ndarray]:
    """Self-convergence under dt-halving: successive differences and their log2 ratios"""
    finals = []
    for level in range(levels):
        h = dt / 2 ** level
        finals.append(integrate(xi0, T, h, _step_count(T, h), params).final)
    errors = np.array([energy_space_norm(a - b) for a, b in zip(finals, finals[1:])])
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log2(errors[:-1] / errors[1:])
    return errors, orders
