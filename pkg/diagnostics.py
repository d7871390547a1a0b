"""
Property checks over trajectories.

Every check returns a BoundFit: the left-hand series it looked at, the constants
it fitted (decay rates, Q-values, Gronwall exponents, ...), a verdict against
its tolerance and the residual trace behind that verdict.  Constants are
outputs; none of them is configured.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.stats import linregress

from dynamics import ModelParams, TrajectoryRecord, integrate_ensemble, time_derivative_state
from errors import DomainError
from nonlinearity import NonlinearitySpec, f_eval, verify_assumptions
from spectral import (MollifiedFormParams, SpectralField, StatePair, energy_space_norm,
                      energy_space_norm_sq, hs_delta_norm_sq, l2_norm_sq, lp_norm, mollified_form)
from storage import SCHEMA_VERSION, to_jsonable

logger = logging.getLogger(__name__)

ENERGY_TOL_FACTOR = 100.0
SAMPLES_PER_UNIT = 32
INTERPOLATION_EXPONENTS = (0.2, 0.5)
SMOOTHING_LIMIT = 10.0
E1_BALANCE_LIMIT = 1e3


@dataclass
class BoundFit:
    """Outcome of one estimate check"""
    name: str
    lhs: np.ndarray
    constants: Dict[str, float]
    passed: bool
    residual: np.ndarray
    tolerance: float
    notes: List[str] = field(default_factory=list)
    times: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return to_jsonable({
            "schema_version": SCHEMA_VERSION,
            "estimate": self.name,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "constants": self.constants,
            "lhs": self.lhs,
            "residual": self.residual,
            "times": self.times,
            "notes": self.notes,
        })


def _fail_if_nonfinite(fit: BoundFit) -> BoundFit:
    if not (np.all(np.isfinite(fit.lhs)) and all(np.isfinite(v) for v in fit.constants.values()
                                                   if isinstance(v, float))):
        fit.passed = False
        bad = np.flatnonzero(~np.isfinite(np.atleast_1d(fit.lhs)))
        if bad.size:
            fit.notes.append(f"non-finite value at sample {int(bad[0])}")
    if not fit.passed:
        logger.warning(f"{fit.name} failed: {fit.constants}")
    return fit


def _window_integral(times: np.ndarray, series: np.ndarray, start: float, length: float) -> float:
    """Trapezoid integral of sampled series over [start, start + length]"""
    tol = 1e-9 * max(1.0, length)
    mask = (times >= start - tol) & (times <= start + length + tol)
    if mask.sum() < 2:
        raise DomainError(f"window [{start}, {start + length}] holds fewer than two samples")
    return float(trapezoid(series[mask], times[mask]))


def _check_density(record: TrajectoryRecord, start: float, length: float):
    count = record.window(start, length).size
    if count < SAMPLES_PER_UNIT * length:
        logger.warning(f"only {count} samples in [{start}, {start + length}]; "
                       f"estimates expect {SAMPLES_PER_UNIT} per unit time")


# ─── Energy equality ──────────────────────────────────────────

def energy_equality_residual(traj: TrajectoryRecord, tol: Optional[float] = None) -> BoundFit:
    """max_t |E(t) + int_0^t dissipation - E(0)|, normalized by the energy scale"""
    ledger = traj.ledger
    energies, cumulative = ledger.energies, ledger.cumulative
    scale = np.max(ledger.column("kinetic") + ledger.column("gradient")
                   + np.abs(ledger.column("potential")) + np.abs(ledger.column("forcing")))
    raw = np.abs(energies + cumulative - energies[0])
    residual = raw / scale if scale > 0 else raw
    dt = traj.meta.dt
    tol = ENERGY_TOL_FACTOR * dt * dt if tol is None else tol
    worst = float(residual.max()) if residual.size else 0.0
    fit = BoundFit(
        name="energy-equality",
        lhs=energies,
        constants={"max_residual": worst, "dt": dt, "energy_scale": float(scale),
                   "additivity_error": ledger.additivity_error()},
        passed=worst <= tol,
        residual=residual,
        tolerance=tol,
        times=traj.times,
    )
    return _fail_if_nonfinite(fit)


# ─── Dissipative estimates ────────────────────────────────────

def _forward_window(times: np.ndarray, rate: np.ndarray, length: float = 1.0) -> np.ndarray:
    """int_t^{t+length} rate for every sample t with t + length inside the record (NaN otherwise)"""
    cum = cumulative_trapezoid(rate, times, initial=0.0)
    ahead = times + length
    out = np.interp(ahead, times, cum) - cum
    return np.where(ahead <= times[-1] + 1e-9, out, np.nan)


def entry_time(times: np.ndarray, norms: np.ndarray, radius: float) -> float:
    """First sample time after which the norm stays inside radius (inf if it never settles)"""
    outside = np.flatnonzero(norms > radius)
    if not outside.size:
        return float(times[0])
    if outside[-1] + 1 < times.size:
        return float(times[outside[-1] + 1])
    return math.inf


def _decay_fit(name: str, times: Sequence[np.ndarray], series: Sequence[np.ndarray],
               norms: Sequence[np.ndarray], radius_tol: float, radius_atol: float) -> BoundFit:
    """Fit y(t) <= Q_data e^{-beta t} + Q_forcing across an ensemble and compare tail radii"""
    tails = [t >= 0.5 * t[-1] for t in times]
    q_forcing = max(float(np.nanmax(y[m])) for y, m in zip(series, tails))

    slopes = []
    for t, y, m in zip(times, series, tails):
        excess = y - q_forcing
        head = ~m & (excess > 0) & np.isfinite(excess)
        if head.sum() >= 3:
            slopes.append(linregress(t[head], np.log(excess[head])).slope)
    beta = max(0.0, -float(np.min(slopes))) if slopes else 0.0

    q_data, excess_trace = 0.0, []
    for t, y in zip(times, series):
        q_data = max(q_data, float(np.nanmax((y - q_forcing) * np.exp(beta * t))))
    for t, y in zip(times, series):
        excess_trace.append(float(np.nanmax(y - (q_data * np.exp(-beta * t) + q_forcing))))

    radii = np.array([float(np.max(r[m])) for r, m in zip(norms, tails)])
    r_max = float(radii.max())
    spread = float((radii.max() - radii.min()) / max(r_max, radius_atol))
    ball = 1.1 * r_max + radius_atol
    entry = [entry_time(t, r, ball) for t, r in zip(times, norms)]

    notes = []
    passed = all(math.isfinite(e) for e in entry)
    if not passed:
        notes.append("a trajectory never entered the common ball")
    if len(radii) > 1 and spread > radius_tol:
        passed = False
        notes.append(f"tail radii spread {spread:.3f} above {radius_tol}")
    fit = BoundFit(
        name=name,
        lhs=np.concatenate(series),
        constants={"beta": beta, "Q_data": q_data, "Q_forcing": q_forcing, "radius": r_max,
                   "radius_spread": spread, "radii": radii.tolist(), "entry_times": entry},
        passed=passed,
        residual=np.array(excess_trace),
        tolerance=radius_tol,
        notes=notes,
    )
    return _fail_if_nonfinite(fit)


def dissipative_bound_check(trajs: Sequence[TrajectoryRecord], radius_tol: float = 0.2,
                            radius_atol: float = 1e-6) -> BoundFit:
    """||xi(t)||_E^2 + int_t^{t+1} ||u_t||^2_{H^1/2} <= Q_data e^{-beta t} + Q_forcing"""
    times, series, norms = [], [], []
    for traj in trajs:
        sq = np.array([energy_space_norm_sq(xi) for xi in traj.states])
        rate = np.array([hs_delta_norm_sq(xi.v, 0.5) for xi in traj.states])
        window = _forward_window(traj.times, rate) if traj.times[-1] - traj.times[0] >= 1.0 \
            else np.zeros_like(sq)
        times.append(traj.times)
        series.append(sq + np.nan_to_num(window, nan=0.0))
        norms.append(np.sqrt(sq))
    return _decay_fit("dissipative-bound", times, series, norms, radius_tol, radius_atol)


def e1_dissipativity(trajs: Sequence[TrajectoryRecord], radius_tol: float = 0.2,
                     radius_atol: float = 1e-6) -> BoundFit:
    """||xi(t)||_{E1} + ||xi_{u_t}(t)||_E <= Q_data e^{-beta t} + Q_forcing"""
    times, series, norms = [], [], []
    for traj in trajs:
        e1 = traj.norms(1.0)
        dt_norm = np.array([energy_space_norm(time_derivative_state(xi, traj.params)) for xi in traj.states])
        times.append(traj.times)
        series.append(e1 + dt_norm)
        norms.append(e1)
    return _decay_fit("e1-dissipativity", times, series, norms, radius_tol, radius_atol)


# ─── Extra regularity and interpolation ───────────────────────

def extra_regularity_norm(traj: TrajectoryRecord, start: float, length: float = 1.0) -> float:
    """int_start^{start+length} ||u(s)||^2_{H^{3/2}} ds"""
    _check_density(traj, start, length)
    values = np.array([hs_delta_norm_sq(xi.u, 1.5) for xi in traj.states])
    return _window_integral(traj.times, values, start, length)


def regularity_rhs(traj: TrajectoryRecord, start: float, length: float, exponent: float) -> float:
    """(1 + sup ||xi||_E + ||u_t||_{L^2 H^{1/2}} + ||g||_{H^{-1/2}})^exponent over the window"""
    idx = traj.window(start, length)
    sup_e = max(energy_space_norm(traj.states[i]) for i in idx)
    rate = np.array([hs_delta_norm_sq(xi.v, 0.5) for xi in traj.states])
    damp = math.sqrt(max(_window_integral(traj.times, rate, start, length), 0.0))
    g_norm = math.sqrt(hs_delta_norm_sq(traj.params.g, -0.5))
    return (1.0 + sup_e + damp + g_norm) ** exponent


def regularity_window_fit(name: str, lhs: np.ndarray, rhs: np.ndarray, starts: np.ndarray,
                          uniformity_tol: float, exponent: float, members: int = 1) -> BoundFit:
    """Fit lhs <= C rhs with one C; lhs must stay window-uniform along every member

    lhs, rhs and starts are member-major: the windows of member 0, then member 1, ...
    """
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
    C = float(ratio.max()) if ratio.size else 0.0
    spread = 0.0
    if lhs.size:
        rows = lhs.reshape(members, -1)
        tops = rows.max(axis=1)
        spreads = np.where(tops > 0, (tops - rows.min(axis=1)) / np.where(tops > 0, tops, 1.0), 0.0)
        spread = float(spreads.max())
    passed = spread <= uniformity_tol
    notes = ["single constant fitted over the ensemble; a monotone Q of three arguments could be "
             "looser than this fit on adversarial ensembles"]
    # power that best explains lhs against the base of rhs, reported as metadata
    base = rhs ** (1.0 / exponent)
    best = math.nan
    if lhs.size >= 2 and np.all(lhs > 0) and np.ptp(np.log(base)) > 1e-12:
        best = float(linregress(np.log(base), np.log(lhs)).slope)
    if not passed:
        notes.append(f"window spread {spread:.3f} above {uniformity_tol}")
    fit = BoundFit(
        name=name,
        lhs=lhs,
        constants={"C": C, "window_spread": spread, "exponent": exponent, "best_fit_exponent": best},
        passed=passed,
        residual=lhs - C * rhs,
        tolerance=uniformity_tol,
        notes=notes,
        times=starts,
    )
    return _fail_if_nonfinite(fit)


def extra_regularity_check(trajs: Sequence[TrajectoryRecord], starts: Sequence[float],
                           length: float = 1.0, uniformity_tol: float = 0.1,
                           exponent: float = 6.0) -> BoundFit:
    """Window integrals of ||u||^2_{H^{3/2}} against C (1 + ...)^6, uniform in the window start"""
    lhs, rhs, at = [], [], []
    for traj in trajs:
        for start in starts:
            lhs.append(extra_regularity_norm(traj, start, length))
            rhs.append(regularity_rhs(traj, start, length, exponent))
            at.append(start)
    return regularity_window_fit("extra-regularity", np.array(lhs), np.array(rhs), np.array(at),
                                 uniformity_tol, exponent, len(trajs))


def interpolation_norm(traj: TrajectoryRecord, s: float, start: float = 0.0,
                       length: Optional[float] = None) -> float:
    """||u||_{L^{2/s}(window; L^{6/(1-s)})}"""
    if not any(math.isclose(s, e) for e in INTERPOLATION_EXPONENTS):
        raise DomainError(f"interpolation exponent must be one of {INTERPOLATION_EXPONENTS}, got {s}")
    length = traj.times[-1] - start if length is None else length
    idx = traj.window(start, length)
    p = 6.0 / (1.0 - s)
    space = np.array([lp_norm(traj.states[i].u, p) for i in idx])
    return _window_integral(traj.times[idx], space ** (2.0 / s), start, length) ** (s / 2.0)


def interpolation_check(trajs: Sequence[TrajectoryRecord], s: float, starts: Sequence[float],
                        length: float = 1.0, stability_tol: float = 0.5) -> BoundFit:
    """||u||_{L^{2/s} L^{6/(1-s)}} <= C_s ||u||^{1-s}_{L^inf H^1} ||u||^s_{L^2 H^{3/2}} with stable C_s"""
    ratios, lhs = [], []
    for traj in trajs:
        for start in starts:
            value = interpolation_norm(traj, s, start, length)
            idx = traj.window(start, length)
            sup_h1 = max(math.sqrt(hs_delta_norm_sq(traj.states[i].u, 1.0)) for i in idx)
            reg = math.sqrt(extra_regularity_norm(traj, start, length))
            denom = sup_h1 ** (1 - s) * reg ** s
            lhs.append(value)
            ratios.append(value / denom if denom > 0 else 0.0)
    ratios = np.array(ratios)
    top = float(ratios.max()) if ratios.size else 0.0
    spread = float((ratios.max() - ratios.min()) / top) if top > 0 else 0.0
    fit = BoundFit(
        name=f"interpolation-s{s:g}",
        lhs=np.array(lhs),
        constants={"C_s": top, "ratio_spread": spread, "s": s},
        passed=spread <= stability_tol,
        residual=ratios,
        tolerance=stability_tol,
    )
    return _fail_if_nonfinite(fit)


def l4_l12_budget(traj: TrajectoryRecord, start: float = 0.0, length: Optional[float] = None) -> float:
    """int ||u(t)||^4_{L^12} dt, the weight of the uniqueness Gronwall argument"""
    length = traj.times[-1] - start if length is None else length
    values = np.array([lp_norm(xi.u, 12.0) ** 4 for xi in traj.states])
    return _window_integral(traj.times, values, start, length)


# ─── Uniqueness ───────────────────────────────────────────────

def difference_growth(xi1: StatePair, xi2: StatePair, T: float, dt: float, params: ModelParams,
                      stride: int = 1, workers: Optional[int] = None) -> BoundFit:
    """Fit K such that ||xi_1(t) - xi_2(t)||_E^2 <= e^{Kt} ||xi_1(0) - xi_2(0)||_E^2"""
    if xi1.grid != xi2.grid:
        raise DomainError("both states must live on one grid")
    first, second = integrate_ensemble([xi1, xi2], T, dt, stride, params, workers)
    times = first.times
    diff = np.array([energy_space_norm_sq(a - b) for a, b in zip(first.states, second.states)])
    weight = np.array([1.0 + lp_norm(a.u, 12.0) ** 4 + lp_norm(b.u, 12.0) ** 4
                       for a, b in zip(first.states, second.states)])
    constants = {"K_hat": 0.0, "C_differential": 0.0, "C_integral": 0.0,
                 "budget_1": l4_l12_budget(first) if times.size > 1 else 0.0,
                 "budget_2": l4_l12_budget(second) if times.size > 1 else 0.0}
    notes = []
    if diff[0] == 0.0:
        identical = all(np.array_equal(a.u.coeffs, b.u.coeffs) and np.array_equal(a.v.coeffs, b.v.coeffs)
                        for a, b in zip(first.states, second.states))
        notes.append("identical data: trajectories " + ("bit-identical" if identical else "DIFFER"))
        fit = BoundFit("difference-growth", diff, constants, identical, diff, 0.0, notes, times)
        return _fail_if_nonfinite(fit)

    ratio = diff / diff[0]
    later = times > times[0]
    if not later.any():
        raise DomainError("difference growth needs at least one sample after the start")
    elapsed = times[later] - times[0]
    with np.errstate(divide="ignore"):
        log_ratio = np.log(ratio[later])
    # signed: a decaying difference gives a negative rate
    k_hat = float(np.max(log_ratio / elapsed))

    # d/dt log ||xi_v||^2 <= C (1 + ||u1||^4_{L^12} + ||u2||^4_{L^12})
    rates = np.diff(np.log(diff)) / np.diff(times)
    mid_weight = 0.5 * (weight[1:] + weight[:-1])
    c_diff = float(np.max(rates / mid_weight))
    cum_weight = cumulative_trapezoid(weight, times, initial=0.0)[later]
    c_int = float(np.max(log_ratio / cum_weight))
    constants.update(K_hat=k_hat, C_differential=c_diff, C_integral=c_int)
    if k_hat <= 0.0:
        notes.append("the difference never grew: the growth bound holds with K = 0")
    bound = np.exp(k_hat * (times - times[0]))
    fit = BoundFit(
        name="difference-growth",
        lhs=ratio,
        constants=constants,
        passed=bool(np.all(ratio <= bound * (1 + 1e-12))),
        residual=ratio - bound,
        tolerance=0.0,
        notes=notes,
        times=times,
    )
    return _fail_if_nonfinite(fit)


# ─── Smoothing and E1 estimates ───────────────────────────────

def smoothing_data_scale(traj: TrajectoryRecord) -> float:
    """(1 + ||xi(0)||_E^2 + ||g||^2)^3"""
    return (1.0 + energy_space_norm_sq(traj.initial) + l2_norm_sq(traj.params.g)) ** 3


def smoothing_check(traj: TrajectoryRecord, t_max: float = 1.0, limit: float = SMOOTHING_LIMIT) -> BoundFit:
    """sup over t in (0, t_max] of t^2 (||xi_{u_t}(t)||_E^2 + ||xi_u(t)||_{E1}^2)

    The sup passes when it stays below limit times the data scale of smoothing_data_scale.
    """
    t0 = traj.times[0]
    mask = (traj.times > t0) & (traj.times <= t0 + t_max + 1e-12)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise DomainError(f"no samples in (0, {t_max}]")
    weighted = np.array([
        (traj.times[i] - t0) ** 2 * (energy_space_norm_sq(time_derivative_state(traj.states[i], traj.params))
                                     + energy_space_norm_sq(traj.states[i], 1.0))
        for i in idx])
    e1 = np.array([energy_space_norm(traj.states[i], 1.0) for i in idx])
    top = int(np.argmax(weighted))
    scale = smoothing_data_scale(traj)
    scaled = float(weighted[top]) / scale
    notes = [] if scaled <= limit else [f"weighted sup {scaled:.3g} x data scale above {limit:g}"]
    fit = BoundFit(
        name="smoothing",
        lhs=weighted,
        constants={"sup": float(weighted[top]), "argsup": float(traj.times[idx[top]] - t0),
                   "data_scale": scale, "scaled_sup": scaled,
                   "e1_first": float(e1[0]), "e1_last": float(e1[-1])},
        passed=scaled <= limit,
        residual=weighted / scale,
        tolerance=limit,
        notes=notes,
        times=traj.times[idx],
    )
    return _fail_if_nonfinite(fit)


def smoothing_refinement(coarse: BoundFit, fine: BoundFit, tol: float = 0.25) -> BoundFit:
    """Compare smoothing sups at N and 2N"""
    a, b = coarse.constants["sup"], fine.constants["sup"]
    rel = abs(a - b) / max(a, b) if max(a, b) > 0 else 0.0
    return BoundFit("smoothing-refinement", np.array([a, b]), {"relative_gap": rel},
                    rel <= tol, np.array([rel]), tol)


def e1_balance_check(traj: TrajectoryRecord, limit: float = E1_BALANCE_LIMIT) -> BoundFit:
    """Two-way comparison of a = ||xi_u||_{E1}^2 with b = ||xi_{u_t}||_E^2 + ||xi_u||_E^2 + ||g||^2

    Fits a <= C_upper (1 + b)^p and b <= C_lower (1 + a)^p, p the degree of f; both constants
    must stay below limit.
    """
    nl = traj.params.nonlinearity
    degree = 5 if nl.a5 else 3 if nl.a3 else 1
    g_sq = l2_norm_sq(traj.params.g)
    e1 = np.array([energy_space_norm_sq(xi, 1.0) for xi in traj.states])
    other = np.array([energy_space_norm_sq(time_derivative_state(xi, traj.params)) + energy_space_norm_sq(xi) + g_sq
                      for xi in traj.states])
    upper = e1 / (1.0 + other) ** degree
    lower = other / (1.0 + e1) ** degree
    up, down = float(upper.max()), float(lower.max())
    passed = up <= limit and down <= limit
    notes = [] if passed else [f"balance constants {up:.3g}, {down:.3g} above {limit:g}"]
    fit = BoundFit("e1-balance", e1, {"C_upper": up, "C_lower": down, "degree": degree}, passed,
                   np.maximum(upper, lower), limit, notes, traj.times)
    return _fail_if_nonfinite(fit)


# ─── Lyapunov structure ───────────────────────────────────────

def lyapunov_monotonicity(traj: TrajectoryRecord, tol: Optional[float] = None,
                          threshold: Optional[float] = None, drop_tol: float = 1e-3,
                          equilibria: Sequence[SpectralField] = ()) -> BoundFit:
    """E(t) non-increasing on alpha = 0 torus runs, strictly where the gamma-dissipation is active"""
    if not traj.params.lyapunov_regime:
        raise DomainError("the Lyapunov check needs alpha = 0 on the torus")
    ledger = traj.ledger
    energies = ledger.energies
    scale = max(1.0, float(np.max(np.abs(energies))))
    dt = traj.meta.dt
    tol = ENERGY_TOL_FACTOR * dt * dt * scale if tol is None else tol
    increments = np.diff(energies)
    notes = []
    rising = np.flatnonzero(increments > tol)
    if rising.size:
        notes.append(f"E increased by {increments[rising[0]]:.3e} after t={traj.times[rising[0]]:.4g}")

    rate = ledger.column("diss_gamma")
    threshold = 1e3 * tol / max(np.diff(traj.times).min(), dt) if threshold is None else threshold
    active = np.flatnonzero((rate[:-1] > threshold) & (rate[1:] > threshold))
    stalled = active[increments[active] >= 0]
    if stalled.size:
        notes.append(f"{stalled.size} intervals with active dissipation but no decrease")

    drop = float(energies[0] - energies[-1])
    cum = float(ledger.column("cum_gamma")[-1])
    gap = abs(drop - cum) / max(abs(cum), 1e-300) if cum > 0 else abs(drop)
    if gap > drop_tol:
        notes.append(f"energy drop {drop:.6g} vs dissipation {cum:.6g}")
    constants = {"max_increment": float(increments.max()) if increments.size else 0.0,
                 "energy_drop": drop, "gamma_dissipation": cum, "drop_gap": gap}
    if equilibria:
        final = traj.final
        constants["equilibrium_distance"] = min(
            energy_space_norm(StatePair(final.u - u_star, final.v)) for u_star in equilibria)
    fit = BoundFit(
        name="lyapunov",
        lhs=energies,
        constants=constants,
        passed=not rising.size and not stalled.size and gap <= drop_tol,
        residual=increments,
        tolerance=tol,
        notes=notes,
        times=traj.times,
    )
    return _fail_if_nonfinite(fit)


def mean_mode_energy(traj: TrajectoryRecord, params: Optional[ModelParams] = None) -> np.ndarray:
    """1/2 |m'|^2 + F(m) - g_mean m for the spatial mean m(t) of u"""
    params = traj.params if params is None else params
    g_mean = params.g.mean()
    spec = params.nonlinearity
    out = []
    for xi in traj.states:
        m, dm = xi.u.mean(), xi.v.mean()
        out.append(0.5 * dm * dm + float(spec.potential(m)) - g_mean * m)
    return np.array(out)


def mean_mode_conservation(traj: TrajectoryRecord, tol: float = 1e-6) -> BoundFit:
    """Without friction the mean mode is an undamped oscillator: its energy is conserved"""
    params = traj.params
    if not params.lyapunov_regime:
        raise DomainError("mean-mode conservation needs alpha = 0 on the torus")
    notes = []
    g_flat = np.all(params.g.coeffs[params.grid.lam > 0] == 0)
    if not (params.nonlinearity.is_linear or g_flat):
        notes.append("nonlinear f with non-constant g couples the mean to other modes")
    e = mean_mode_energy(traj)
    scale = max(abs(float(e[0])), float(np.max(np.abs(e))), 1e-300)
    drift = np.abs(e - e[0]) / scale
    fit = BoundFit("mean-mode", e, {"max_drift": float(drift.max())}, float(drift.max()) <= tol,
                   drift, tol, notes, traj.times)
    return _fail_if_nonfinite(fit)


# ─── Sign of the mollified nonlinear form ─────────────────────

def mollified_sign_check(u: SpectralField, spec: NonlinearitySpec, s: float, eps: float,
                         points: int = 16, tol: float = 1e-9) -> BoundFit:
    """[f(u), u]_{s,eps} + K [u, u]_{s,eps} >= 0"""
    params = MollifiedFormParams(s=s, eps=eps, points=points)
    K = verify_assumptions(spec).K
    lhs = mollified_form(f_eval(spec, u), u, params)
    uu = mollified_form(u, u, params)
    margin = lhs + K * uu
    scale = max(abs(lhs), abs(K * uu), 1.0)
    fit = BoundFit(
        name="mollified-sign",
        lhs=np.array([lhs]),
        constants={"K": K, "form_uu": uu, "margin": margin},
        passed=margin >= -tol * scale,
        residual=np.array([margin]),
        tolerance=tol,
    )
    return _fail_if_nonfinite(fit)
