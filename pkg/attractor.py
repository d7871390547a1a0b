"""
Equilibria, absorbing balls and sample-based views of the global attractor.

The attractor itself is never computed; it is represented by states harvested
from long runs after a burn-in ("sample-based approximation").
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, gmres
from scipy.spatial.distance import cdist
from scipy.stats import linregress

from diagnostics import BoundFit, entry_time
from dynamics import ModelParams, TrajectoryRecord, integrate, integrate_ensemble
from errors import ConvergenceError, DomainError
from nonlinearity import f_eval
from spectral import (GridSpec, SpectralField, StatePair, energy_space_norm, frac_laplacian_apply,
                      from_fine, l2_norm_sq, to_fine, transform_forward, transform_inverse)

logger = logging.getLogger(__name__)

SAMPLE_LABEL = "sample-based approximation"
NEWTON_TOL = 1e-9
NEWTON_MAX_ITER = 50
MAX_HALVINGS = 12
DUPLICATE_DISTANCE = 1e-6
BOX_STDERR = 0.25
LIPSCHITZ_LIMIT = 1e3
ATTRACTION_TOL = 0.1


# ─── Equilibria ───────────────────────────────────────────────

def equilibrium_residual(u: SpectralField, params: ModelParams) -> SpectralField:
    """-Laplacian u + f(u) - g on the dealiased band"""
    return (frac_laplacian_apply(u, 1.0) + f_eval(params.nonlinearity, u) - params.g).project()


@dataclass
class NewtonReport:
    u: SpectralField
    residuals: List[float]
    halvings: int = 0

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1


class _BandOperators:
    """Linearization and preconditioner acting on physical values of band-limited fields"""

    def __init__(self, u: SpectralField, params: ModelParams):
        self.grid = u.grid
        self.slope = params.nonlinearity.df(to_fine(u))
        self.size = int(np.prod(self.grid.shape))
        shift = params.nonlinearity.K + 1.0
        self.inverse_symbol = 1.0 / (self.grid.lam + shift)

    def field(self, x: np.ndarray) -> SpectralField:
        return transform_forward(self.grid, np.asarray(x).real.reshape(self.grid.shape)).project()

    def values(self, u: SpectralField) -> np.ndarray:
        return transform_inverse(u).ravel()

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        du = self.field(x)
        product = from_fine(self.grid, self.slope * to_fine(du))
        return self.values(frac_laplacian_apply(du, 1.0) + product)

    def precondition(self, x: np.ndarray) -> np.ndarray:
        du = self.field(x)
        return self.values(du.with_coeffs(du.coeffs * self.inverse_symbol))

    def as_linear_operators(self) -> Tuple[LinearOperator, LinearOperator]:
        shape = (self.size, self.size)
        return (LinearOperator(shape, matvec=self.jacobian, dtype=float),
                LinearOperator(shape, matvec=self.precondition, dtype=float))


def solve_equilibrium(guess: SpectralField, params: ModelParams, tol: float = NEWTON_TOL,
                      max_iter: int = NEWTON_MAX_ITER) -> NewtonReport:
    """Damped Newton-Krylov on -Laplacian u + f(u) = g, preconditioned by (-Laplacian + K + 1)^{-1}"""
    u = guess.project()
    res = equilibrium_residual(u, params)
    norm = math.sqrt(l2_norm_sq(res))
    report = NewtonReport(u, [norm])
    while norm > tol:
        if report.iterations >= max_iter:
            raise ConvergenceError("equilibrium Newton iteration stalled", norm, report.iterations)
        ops = _BandOperators(u, params)
        J, M = ops.as_linear_operators()
        rhs = -ops.values(res)
        x, info = gmres(J, rhs, M=M, rtol=1e-12, atol=0.0, restart=60, maxiter=20)
        if info < 0:
            raise ConvergenceError("linearized equilibrium solve broke down", norm, report.iterations)
        step = ops.field(x)

        lam = 1.0
        for _ in range(MAX_HALVINGS):
            trial = u + step * lam
            trial_res = equilibrium_residual(trial, params)
            trial_norm = math.sqrt(l2_norm_sq(trial_res))
            if trial_norm < norm:
                break
            lam *= 0.5
            report.halvings += 1
            logger.warning(f"Newton step halved to {lam:g} (residual {trial_norm:.3e} >= {norm:.3e})")
        else:
            raise ConvergenceError("no descent along the Newton direction", norm, report.iterations)
        u, res, norm = trial, trial_res, trial_norm
        report.u = u
        report.residuals.append(norm)
    logger.info(f"equilibrium found after {report.iterations} Newton steps, residual {norm:.2e}")
    return report


def equilibrium_solve(guess: SpectralField, params: ModelParams, tol: float = NEWTON_TOL,
                      max_iter: int = NEWTON_MAX_ITER) -> SpectralField:
    return solve_equilibrium(guess, params, tol, max_iter).u


def stability_tag(u: SpectralField, params: ModelParams) -> str:
    """Sign of the lowest eigenvalue of -Laplacian + f'(u); the damping never changes it"""
    ops = _BandOperators(u, params)
    ceiling = float(ops.grid.lam.max()) + float(np.abs(ops.slope).max()) + 1.0

    def matvec(x):
        x = np.asarray(x).ravel()
        inside = ops.values(ops.field(x))
        return ops.jacobian(x) + ceiling * (x - inside)

    op = LinearOperator((ops.size, ops.size), matvec=matvec, dtype=float)
    try:
        lowest = float(eigsh(op, k=1, which="SA", return_eigenvectors=False, maxiter=5000)[0])
    except ArpackNoConvergence:
        return "unknown"
    if lowest > 1e-8:
        return "stable"
    return "neutral" if lowest > -1e-8 else "unstable"


@dataclass
class Equilibrium:
    u: SpectralField
    residual: float
    stability: str


@dataclass
class EquilibriumSet:
    """Distinct equilibria found for one parameter set"""
    members: List[Equilibrium] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    def fields(self) -> List[SpectralField]:
        return [m.u for m in self.members]

    def add(self, u: SpectralField, residual: float, stability: str) -> bool:
        if residual > NEWTON_TOL:
            raise DomainError(f"residual {residual:.3e} is not an equilibrium")
        for m in self.members:
            if energy_space_norm(StatePair(u - m.u, u.grid.zeros())) < DUPLICATE_DISTANCE:
                return False
        self.members.append(Equilibrium(u, residual, stability))
        return True

    def to_dict(self) -> dict:
        return {"count": len(self.members),
                "members": [{"residual": m.residual, "stability": m.stability,
                             "energy_norm": energy_space_norm(StatePair(m.u, m.u.grid.zeros()))}
                            for m in self.members]}


def find_equilibria(guesses: Sequence[SpectralField], params: ModelParams) -> EquilibriumSet:
    found = EquilibriumSet()
    for guess in guesses:
        try:
            report = solve_equilibrium(guess, params)
        except ConvergenceError as exc:
            logger.warning(f"skipping guess: {exc}")
            continue
        found.add(report.u, report.residuals[-1], stability_tag(report.u, params))
    return found


# ─── Absorbing balls and attractor samples ────────────────────

@dataclass
class AbsorbingBall:
    radius: float
    entry_times: List[float]
    level: float

    def __float__(self) -> float:
        return self.radius


def absorbing_radius(trajs, tail_fraction: float = 0.5, level: float = 1.0,
                     margin: float = 1.1) -> AbsorbingBall:
    """Largest tail norm over the ensemble and the time each run settles inside margin times it"""
    norms = [traj.norms(level) for traj in trajs]
    if not all(np.all(np.isfinite(n)) for n in norms):
        raise DomainError("unbounded trajectory in the ensemble")
    tails = [n[traj.times >= traj.times[0] + (1 - tail_fraction) * (traj.times[-1] - traj.times[0])]
             for n, traj in zip(norms, trajs)]
    radius = max(float(t.max()) for t in tails)
    entries = [entry_time(traj.times, n, margin * radius) for n, traj in zip(norms, trajs)]
    return AbsorbingBall(radius, entries, level)


@dataclass
class AttractorSample:
    params: ModelParams
    states: List[StatePair]
    burn_in: float
    stride: int
    label: str = SAMPLE_LABEL

    @property
    def grid(self) -> GridSpec:
        return self.params.grid

    def radius(self, level: float = 0.0) -> float:
        return max(energy_space_norm(xi, level) for xi in self.states)


def sample_attractor(initial: Sequence[StatePair], params: ModelParams, burn_in: float,
                     duration: float, dt: float, stride: int,
                     workers: Optional[int] = None) -> AttractorSample:
    """States after burn_in from every initial state, every stride steps"""
    records = integrate_ensemble(initial, burn_in + duration, dt, stride, params, workers)
    states = [xi for rec in records for t, xi in zip(rec.times, rec.states) if t >= burn_in - 1e-9]
    logger.info(f"harvested {len(states)} attractor samples from {len(records)} runs")
    return AttractorSample(params, states, burn_in, stride)


def _embed(states: Sequence[StatePair], level: float) -> np.ndarray:
    """Real vectors whose Euclidean distances are E_level distances"""
    grid = states[0].grid
    wu = np.sqrt(grid.parseval * (1.0 + grid.lam) ** (1.0 + level)).ravel()
    wv = np.sqrt(grid.parseval * (1.0 + grid.lam) ** level).ravel()
    rows = []
    for xi in states:
        parts = np.concatenate([wu * xi.u.coeffs.ravel(), wv * xi.v.coeffs.ravel()])
        rows.append(np.concatenate([parts.real, parts.imag]) if np.iscomplexobj(parts) else parts)
    return np.array(rows)


def hausdorff_semidist(A: Sequence[StatePair], B: Sequence[StatePair], level: float = 0.0) -> float:
    """sup_{a in A} inf_{b in B} ||a - b||_E"""
    if not A or not B:
        raise DomainError("Hausdorff semidistance needs two nonempty sets")
    return float(cdist(_embed(A, level), _embed(B, level)).min(axis=1).max())


def semi_invariance(sample: AttractorSample, dt: float, horizon: float = 1.0) -> float:
    """dist_E(S(horizon) A, A) for the sampled A"""
    moved = [integrate(xi, horizon, dt, int(round(horizon / dt)), sample.params).final
             for xi in sample.states]
    return hausdorff_semidist(moved, sample.states)


def attraction_distance(trajs: Sequence[TrajectoryRecord], sample: AttractorSample,
                        after: Optional[float] = None, tol: float = ATTRACTION_TOL) -> BoundFit:
    """dist_E(S(t) B, A) at the common sample times of an ensemble started from B

    From `after` on (the sample's burn-in by default) the distance may rise by at most tol
    times the sample radius between samples, and it must end below tol times that radius.
    """
    if not trajs:
        raise DomainError("attraction needs at least one trajectory")
    times = trajs[0].times
    if any(t.times.shape != times.shape or not np.allclose(t.times, times) for t in trajs):
        raise DomainError("ensemble members must share their sample times")
    after = sample.burn_in if after is None else after
    distances = np.array([hausdorff_semidist([t.states[i] for t in trajs], sample.states)
                          for i in range(times.size)])
    scale = max(sample.radius(), 1e-12)
    rises = np.diff(distances[times >= after - 1e-9])
    worst_rise = float(rises.max()) if rises.size else 0.0
    final = float(distances[-1])
    notes = [sample.label]
    if worst_rise > tol * scale:
        notes.append(f"distance rose by {worst_rise:.3g} after t={after:g}")
    if final > tol * scale:
        notes.append(f"final distance {final:.3g} above {tol:g} x sample radius {scale:.3g}")
    passed = bool(np.all(np.isfinite(distances))) and worst_rise <= tol * scale and final <= tol * scale
    return BoundFit("attraction", distances,
                    {"final_distance": final, "max_rise": worst_rise, "sample_radius": scale, "after": after},
                    passed, distances / scale, tol, notes, times)


def equilibria_in_sample(equilibria: EquilibriumSet, sample: AttractorSample,
                         tol: float = ATTRACTION_TOL) -> BoundFit:
    """Each equilibrium (u*, 0) within tol times the sample radius of the attractor sample"""
    if not len(equilibria):
        raise DomainError("no equilibria to compare with the sample")
    scale = max(sample.radius(), 1e-12)
    distances = np.array([hausdorff_semidist([StatePair(m.u, m.u.grid.zeros())], sample.states)
                          for m in equilibria.members])
    notes = [sample.label] + [f"{m.stability} equilibrium {i} at distance {d:.3g}"
                              for i, (m, d) in enumerate(zip(equilibria.members, distances)) if d > tol * scale]
    return BoundFit("equilibria-in-sample", distances,
                    {"max_distance": float(distances.max()), "sample_radius": scale,
                     "equilibria": len(equilibria)},
                    bool(np.all(distances <= tol * scale)), distances / scale, tol, notes)


def sample_in_ball(sample: AttractorSample, ball: AbsorbingBall, margin: float = 1.1) -> BoundFit:
    """Every sampled state inside margin times the absorbing radius, measured at the ball's level"""
    norms = np.array([energy_space_norm(xi, ball.level) for xi in sample.states])
    limit = margin * ball.radius
    outside = int(np.sum(norms > limit))
    notes = [sample.label] + ([f"{outside} samples outside radius {limit:.3g}"] if outside else [])
    return BoundFit("sample-in-ball", norms, {"radius": ball.radius, "max_norm": float(norms.max()),
                                              "level": ball.level},
                    outside == 0 and bool(np.all(np.isfinite(norms))), norms - limit, margin, notes)


# ─── Box counting ─────────────────────────────────────────────

def low_mode_coordinates(states: Sequence[StatePair], m: int) -> np.ndarray:
    """Coordinates of u and v along the m lowest real modes (shape (len(states), 2m))"""
    grid = states[0].grid
    order = np.lexsort((np.arange(grid.lam.size), grid.lam.ravel()))
    coords: List[Tuple[int, str]] = []
    seen = set()
    for flat in order:
        if len(coords) >= m:
            break
        if not grid.active.ravel()[flat]:
            continue
        if grid.is_torus:
            k = tuple(int(c[flat]) for c in (w.ravel() for w in grid.wavevectors))
            if tuple(-ki for ki in k) in seen:
                continue
            seen.add(k)
            coords.append((flat, "re"))
            if any(k) and len(coords) < m:
                coords.append((flat, "im"))
        else:
            coords.append((flat, "re"))
    scale = math.sqrt(grid.parseval * (2.0 if grid.is_torus else 1.0))
    out = []
    for xi in states:
        row = []
        for f in (xi.u, xi.v):
            c = f.coeffs.ravel()
            row += [scale * (c[i].real if part == "re" else c[i].imag) for i, part in coords]
        out.append(row)
    return np.array(out)


def line_sample(count: int = 1000) -> np.ndarray:
    """Points on a straight segment in the plane; box-counting dimension 1"""
    t = np.linspace(0.0, 1.0, count)
    return np.stack([t, 0.5 * t], axis=1)


def winding_torus_sample(count: int = 400_000, windings: int = 1000) -> np.ndarray:
    """Irrational winding (t, sqrt(2) t) mod 1; dense on the 2-torus at the resolved scales"""
    t = np.linspace(0.0, float(windings), count, endpoint=False)
    return np.stack([t % 1.0, (math.sqrt(2.0) * t) % 1.0], axis=1)


def box_counts(points: np.ndarray, scales: Sequence[int]) -> np.ndarray:
    """Occupied dyadic boxes of side 2^-j after scaling the points into the unit cube"""
    points = np.asarray(points, dtype=float)
    low = points.min(axis=0)
    extent = float(np.max(points.max(axis=0) - low))
    unit = (points - low) / extent if extent > 0 else np.zeros_like(points)
    counts = []
    for j in scales:
        cells = np.minimum(np.floor(unit * 2 ** j), 2 ** j - 1).astype(np.int64)
        counts.append(np.unique(cells, axis=0).shape[0])
    return np.array(counts)


def box_counting_dimension(samples: Union[AttractorSample, np.ndarray], m: int = 4,
                           scales: Tuple[int, int] = (1, 6), min_samples: int = 1000,
                           expected: Optional[float] = None, tol: float = 0.2,
                           max_stderr: float = BOX_STDERR) -> BoundFit:
    """Least-squares slope of log N_eps against log(1/eps), eps = 2^-j

    The slope must fall in expected +- tol, or in [0, ambient dimension] without an expected
    value, and its standard error must stay below max_stderr.
    """
    j_min, j_max = scales
    if j_max - j_min < 2 or j_min < 0:
        raise DomainError(f"degenerate scale range {scales}")
    notes = []
    if isinstance(samples, AttractorSample):
        if not 1 <= m <= 8:
            raise DomainError(f"projection mode count must lie in [1, 8], got {m}")
        points = low_mode_coordinates(samples.states, m)
        notes.append(f"{SAMPLE_LABEL}: dimension of the projection on {m} lowest modes of u and v")
    else:
        points = np.atleast_2d(np.asarray(samples, dtype=float))
    if points.shape[0] < min_samples:
        raise DomainError(f"box counting needs at least {min_samples} samples, got {points.shape[0]}")
    js = np.arange(j_min, j_max + 1)
    counts = box_counts(points, js)
    x, y = js * math.log(2.0), np.log(counts)
    if np.ptp(y) == 0:
        slope, err = 0.0, 0.0
    else:
        fit = linregress(x, y)
        slope, err = float(fit.slope), float(fit.stderr)
    if expected is None:
        low, high = 0.0, float(points.shape[1])
    else:
        low, high = expected - tol, expected + tol
    passed = low <= slope <= high and err <= max_stderr
    if not low <= slope <= high:
        notes.append(f"slope {slope:.3f} outside [{low:g}, {high:g}]")
    if err > max_stderr:
        notes.append(f"log-log counts are not straight: slope error {err:.3f} above {max_stderr:g}")
    if counts[-1] >= 0.5 * points.shape[0]:
        notes.append("finest scale separates most samples; counts are saturating")
    constants = {"dimension": slope, "stderr": err, "band_low": slope - 2 * err,
                 "band_high": slope + 2 * err, "modes": m, "samples": points.shape[0],
                 "accept_low": low, "accept_high": high}
    if expected is not None:
        constants["expected"] = expected
    result = BoundFit(
        name="box-counting",
        lhs=counts.astype(float),
        constants=constants,
        passed=passed,
        residual=y - (y.mean() + slope * (x - x.mean())),
        tolerance=max_stderr,
        notes=notes,
        times=js.astype(float),
    )
    return result


# ─── Smoothing map ────────────────────────────────────────────

def smoothing_map_lipschitz(xi1: StatePair, xi2: StatePair, params: ModelParams, dt: float,
                            horizon: float = 1.0) -> float:
    """||S(1) xi1 - S(1) xi2||_{E_1/2} / ||xi1 - xi2||_E"""
    gap = energy_space_norm(xi1 - xi2)
    if gap == 0.0:
        raise DomainError("identical states: the Lipschitz ratio is 0/0")
    steps = int(round(horizon / dt))
    a, b = integrate_ensemble([xi1, xi2], horizon, dt, steps, params)
    return energy_space_norm(a.final - b.final, 0.5) / gap


def lipschitz_ensemble(pairs: Sequence[Tuple[StatePair, StatePair]], params: ModelParams,
                       dt: float, horizon: float = 1.0, limit: float = LIPSCHITZ_LIMIT) -> BoundFit:
    """Largest smoothing-map ratio over the pairs; passes below limit"""
    ratios = np.array([smoothing_map_lipschitz(a, b, params, dt, horizon) for a, b in pairs])
    top = float(ratios.max())
    passed = bool(np.all(np.isfinite(ratios))) and top <= limit
    return BoundFit(
        name="smoothing-lipschitz",
        lhs=ratios,
        constants={"L": top, "pairs": len(pairs)},
        passed=passed,
        residual=ratios - limit,
        tolerance=limit,
        notes=[] if passed else [f"Lipschitz ratio {top:.3g} above {limit:g}"],
    )
