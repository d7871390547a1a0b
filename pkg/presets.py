"""
Experiment presets.

A preset is a named config template plus a runner turning a validated RunConfig
into BoundFits, the trajectories behind them and any extra report documents.
Templates are desk-scale; every key can be overridden from the command line.
"""
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from attractor import (ATTRACTION_TOL, BOX_STDERR, LIPSCHITZ_LIMIT, absorbing_radius, attraction_distance,
                       box_counting_dimension, equilibria_in_sample, find_equilibria, line_sample,
                       lipschitz_ensemble, sample_attractor, sample_in_ball, semi_invariance,
                       winding_torus_sample)
from config import RunConfig, parse_config_text, render_config
from diagnostics import (E1_BALANCE_LIMIT, INTERPOLATION_EXPONENTS, SMOOTHING_LIMIT, BoundFit, difference_growth,
                         dissipative_bound_check, e1_balance_check, e1_dissipativity, energy_equality_residual,
                         extra_regularity_check, interpolation_check, lyapunov_monotonicity,
                         mean_mode_conservation, mollified_sign_check, smoothing_check, smoothing_refinement)
from dynamics import TrajectoryRecord, integrate, integrate_ensemble
from errors import ConfigurationError
from extension import (ExtensionSpec, commutator_check, dirichlet_regularity_check, ext_apply,
                       ext_norm_continuity, odd_defect, restrict)
from spectral import (GridSpec, StatePair, c_constant, energy_space_norm, frac_norm_sq, hs_delta_norm_sq,
                      mode_field, mollified_limit, norm_equivalence_check, random_field, singular_seminorm,
                      transfer)

logger = logging.getLogger(__name__)


@dataclass
class PresetResult:
    fits: List[BoundFit] = field(default_factory=list)
    records: Dict[str, TrajectoryRecord] = field(default_factory=dict)
    artifacts: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(fit.passed for fit in self.fits)

    @property
    def failing(self) -> List[str]:
        return [fit.name for fit in self.fits if not fit.passed]


Runner = Callable[[RunConfig, Optional[int]], PresetResult]


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    budget: str
    template: Dict[str, Any]
    runner: Runner

    def config(self, overrides: Sequence[str] = ()) -> RunConfig:
        """The template as a validated RunConfig, overrides applied"""
        text = render_config({"experiment": self.name, **self.template})
        return parse_config_text(text, overrides, source=f"preset:{self.name}")

    def run(self, config: RunConfig, workers: Optional[int] = None) -> PresetResult:
        logger.info(f"running preset {self.name}")
        result = self.runner(config, workers)
        logger.info(f"preset {self.name}: {len(result.fits)} checks, "
                    f"{'all passed' if result.passed else 'failing: ' + ', '.join(result.failing)}")
        return result


PRESETS: Dict[str, Preset] = {}


def preset(name: str, description: str, budget: str, template: Dict[str, Any]):
    def register(runner: Runner) -> Runner:
        PRESETS[name] = Preset(name, description, budget, template, runner)
        return runner
    return register


def get_preset(name: str, line: Optional[int] = None) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}", line) from None


def list_presets() -> List[Preset]:
    return list(PRESETS.values())


def run_config(config: RunConfig, workers: Optional[int] = None) -> PresetResult:
    return get_preset(config.experiment, config.lines.get("experiment")).run(config, workers)


# ─── Shared pieces ────────────────────────────────────────────

TORUS_1D = {"grid.dim": 1, "grid.kind": "torus", "grid.N": 64, "model.gamma": 1.0, "model.alpha": 1.0,
            "model.theta": 0.5, "model.nonlinearity": (0.0, 0.0, 1.0), "integrator.seed": 7}


def _threshold_fit(name: str, values: Sequence[float], tol: float, **constants) -> BoundFit:
    values = np.asarray(values, dtype=float)
    worst = float(values.max()) if values.size else 0.0
    passed = bool(np.all(np.isfinite(values))) and worst <= tol
    return BoundFit(name, values, {"max": worst, **constants}, passed, values, tol)


def _relative_spread(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    top = float(np.max(np.abs(values))) if values.size else 0.0
    return float((values.max() - values.min()) / top) if top > 0 else 0.0


def _run_ensemble(config: RunConfig, workers: Optional[int]) -> List[TrajectoryRecord]:
    params = config.build_params()
    return integrate_ensemble(config.ensemble(params.grid), config["integrator.T"], config["integrator.dt"],
                              config["integrator.stride"], params, workers)


def _members(records: Sequence[TrajectoryRecord]) -> Dict[str, TrajectoryRecord]:
    return {f"member-{i}": rec for i, rec in enumerate(records)}


def _unit_direction(grid: GridSpec, seed: int) -> StatePair:
    xi = StatePair(random_field(grid, seed, -2.0), random_field(grid, seed + 1, -1.0))
    return xi.scaled(1.0 / energy_space_norm(xi))


def singular_constant_closed_form(s: float, d: int) -> float:
    """4^s Gamma(d/2 + s) / (2 pi^{d/2} |Gamma(-s)|)"""
    return 4 ** s * gamma_fn(d / 2 + s) / (2 * math.pi ** (d / 2) * abs(gamma_fn(-s)))


# ─── Fractional norms and forms ───────────────────────────────

@preset("norm-identity", "c [u,u]_s against ||(-Laplacian)^{s/2} u||^2, the constant c and norm equivalence",
        "60 s", {**TORUS_1D, "experiment.s": (0.25, 0.5, 0.75), "experiment.samples": 20,
                 "initial.slope": -1.0})
def _norm_identity(config: RunConfig, workers: Optional[int]) -> PresetResult:
    grid = config.grid()
    seed = config["integrator.seed"]
    fields = [random_field(grid, seed + i, config["initial.slope"]) for i in range(config["experiment.samples"])]
    tol = config.tolerance("norm_identity", 1e-3)
    result = PresetResult()
    constant_errors = []
    for s in config["experiment.s"]:
        c = c_constant(s, grid.dim)
        rel = [abs(c * singular_seminorm(u, s).value - frac_norm_sq(u, s)) / frac_norm_sq(u, s) for u in fields]
        result.fits.append(_threshold_fit(f"norm-identity-s{s:g}", rel, tol, c=c, s=s))
        exact = singular_constant_closed_form(s, grid.dim)
        constant_errors.append(abs(c - exact) / exact)
    result.fits.append(_threshold_fit("singular-constant", constant_errors, config.tolerance("constant", 1e-6),
                                      closed_form_half=singular_constant_closed_form(0.5, grid.dim)))
    equivalent = [norm_equivalence_check(u, s) for u in fields for s in config["experiment.s"]]
    misses = np.array([0.0 if ok else 1.0 for ok in equivalent])
    result.fits.append(_threshold_fit("norm-equivalence", misses, 0.0, checked=len(equivalent)))
    return result


@preset("mollified-forms", "monotone eps -> 0 limit of [u,u]_{s,eps} and the sign of [f(u),u]_{s,eps} + K[u,u]",
        "60 s", {**TORUS_1D, "model.nonlinearity": (-1.0, 0.0, 1.0), "experiment.s": (0.5,),
                 "experiment.samples": 20, "initial.slope": -1.0})
def _mollified_forms(config: RunConfig, workers: Optional[int]) -> PresetResult:
    grid = config.grid()
    seed = config["integrator.seed"]
    spec = config.build_params(grid).nonlinearity
    eps = (1.0, 1 / 2, 1 / 4, 1 / 8, 1 / 16)
    result = PresetResult()
    for s in config["experiment.s"]:
        rises, limits, margins = [], [], []
        for i in range(config["experiment.samples"]):
            u = random_field(grid, seed + i, config["initial.slope"])
            values, limit = mollified_limit(u, s, eps)
            rises.append(float(np.max(values[:-1] - values[1:])) / float(values[-1]))
            exact = frac_norm_sq(u, s) / c_constant(s, grid.dim)
            limits.append(abs(limit - exact) / exact)
            for e in eps:
                margins.append(-mollified_sign_check(u, spec, s, e).constants["margin"])
        result.fits.append(_threshold_fit(f"fatou-monotone-s{s:g}", rises, config.tolerance("monotone", 1e-12)))
        result.fits.append(_threshold_fit(f"mollified-limit-s{s:g}", limits, config.tolerance("limit", 1e-3)))
        result.fits.append(_threshold_fit(f"mollified-sign-s{s:g}", margins, config.tolerance("sign", 1e-9),
                                          K=spec.K))
    return result


# ─── Energy and dissipation ───────────────────────────────────

@preset("energy-equality", "energy balance residual, its dt-halving ratio and the self-convergence order",
        "2 min", {**TORUS_1D, "grid.N": 256, "model.forcing": "single-mode", "initial.amplitude": 1.0,
                  "initial.velocity_amplitude": 0.5, "initial.slope": -2.0,
                  "integrator.dt": 1e-3, "integrator.T": 5.0, "integrator.stride": 10})
def _energy_equality(config: RunConfig, workers: Optional[int]) -> PresetResult:
    params = config.build_params()
    xi0 = config.initial_state(0, grid=params.grid)
    dt, T, stride = config["integrator.dt"], config["integrator.T"], config["integrator.stride"]
    labels = ["dt", "dt-half", "dt-quarter"]
    records = {label: integrate(xi0, T, dt / 2 ** j, stride * 2 ** j, params) for j, label in enumerate(labels)}

    result = PresetResult(records=records)
    fits = [energy_equality_residual(rec, config.tolerance("energy", 1e-4)) for rec in records.values()]
    for fit, label in zip(fits, labels):
        fit.name = f"energy-equality-{label}"
    result.fits.extend(fits)

    worst = [fit.constants["max_residual"] for fit in fits]
    floor = config.tolerance("roundoff", 1e-12)
    ratios = [a / b if b > floor else math.nan for a, b in zip(worst, worst[1:])]
    low, high = config.tolerance("ratio_low", 3.5), config.tolerance("ratio_high", 4.5)
    exact = worst[0] <= floor
    passed = exact or all(low <= r <= high for r in ratios)
    result.fits.append(BoundFit("energy-equality-halving", np.array(worst), {"ratios": ratios, "exact": exact},
                                passed, np.array(ratios), high))

    finals = [rec.final for rec in records.values()]
    errors = np.array([energy_space_norm(a - b) for a, b in zip(finals, finals[1:])])
    order = math.log2(errors[0] / errors[1]) if errors[1] > 0 else math.inf
    min_order = config.tolerance("order", 1.8)
    result.fits.append(BoundFit("self-convergence", errors, {"order": order},
                                bool(errors[0] <= floor or order >= min_order), errors, min_order))
    return result


_DISSIPATIVE = {**TORUS_1D, "model.forcing": "single-mode", "initial.amplitude": 0.1,
                "initial.velocity_amplitude": 1.0, "initial.slope": -1.0, "ensemble.size": 5,
                "ensemble.norms": (1.0, 10.0, 100.0), "integrator.dt": 1e-3, "integrator.stride": 25}


@preset("dissipativity", "dissipative energy bound across an ensemble and its common absorbing ball",
        "5 min", {**_DISSIPATIVE, "integrator.T": 50.0})
def _dissipativity(config: RunConfig, workers: Optional[int]) -> PresetResult:
    trajs = _run_ensemble(config, workers)
    result = PresetResult(records=_members(trajs))
    result.fits.append(dissipative_bound_check(trajs, config.tolerance("radius", 0.2)))
    ball = absorbing_radius(trajs, level=0.0)
    result.artifacts["absorbing-ball"] = dataclasses.asdict(ball)
    return result


@preset("extra-regularity", "window integrals of ||u||^2_{H^3/2} and the interpolation inequalities",
        "2 min", {**_DISSIPATIVE, "integrator.T": 10.0, "experiment.windows": (2.0, 4.0, 6.0, 8.0)})
def _extra_regularity(config: RunConfig, workers: Optional[int]) -> PresetResult:
    trajs = _run_ensemble(config, workers)
    windows = config["experiment.windows"]
    result = PresetResult(records=_members(trajs))
    result.fits.append(extra_regularity_check(trajs, windows, 1.0, config.tolerance("uniformity", 0.1)))
    for s in INTERPOLATION_EXPONENTS:
        result.fits.append(interpolation_check(trajs, s, windows, 1.0, config.tolerance("interpolation", 0.5)))
    return result


@preset("uniqueness", "growth of the difference of two solutions and its zero-perturbation limit",
        "2 min", {**TORUS_1D, "model.forcing": "single-mode", "initial.velocity_amplitude": 0.5,
                  "integrator.dt": 1e-3, "integrator.T": 2.0, "integrator.stride": 10,
                  "experiment.deltas": (1e-4, 1e-5, 1e-6)})
def _uniqueness(config: RunConfig, workers: Optional[int]) -> PresetResult:
    params = config.build_params()
    deltas = config["experiment.deltas"]
    if len(deltas) < 2:
        raise ConfigurationError("the growth-rate comparison needs at least two perturbation sizes",
                                 config.lines.get("experiment.deltas"))
    base = config.initial_state(0, grid=params.grid)
    direction = _unit_direction(params.grid, config["integrator.seed"] + 1000)
    dt, T, stride = config["integrator.dt"], config["integrator.T"], config["integrator.stride"]
    result = PresetResult()
    k_hats, gronwall = [], []
    for delta in deltas:
        fit = difference_growth(base, base + direction.scaled(delta), T, dt, params, stride, workers)
        fit.name = f"difference-growth-{delta:g}"
        k_hats.append(fit.constants["K_hat"])
        gronwall.append(fit.constants["C_differential"])
        result.fits.append(fit)
    tol = config.tolerance("k_hat", 0.2)
    result.fits.append(_stability_fit("growth-rate-stability", k_hats, tol))
    result.fits.append(_stability_fit("gronwall-constant-stability", gronwall, config.tolerance("gronwall", tol)))
    zero = difference_growth(base, base, T, dt, params, stride, workers)
    zero.name = "zero-perturbation"
    result.fits.append(zero)
    return result


def _stability_fit(name: str, values: Sequence[float], tol: float) -> BoundFit:
    """Relative spread of a fitted constant across perturbation sizes; all-zero values fail"""
    values = np.asarray(values, dtype=float)
    spread = _relative_spread(values)
    degenerate = not np.any(np.abs(values) > 0)
    notes = ["every fitted value is zero: nothing was compared"] if degenerate else []
    return BoundFit(name, values, {"spread": spread}, spread <= tol and not degenerate,
                    np.array([spread]), tol, notes)


@preset("smoothing", "t^2-weighted E1 norm of rough data on (0, 1] at N and at a refined N",
        "5 min", {**TORUS_1D, "grid.N": 256, "model.forcing": "single-mode", "initial.slope": -1.6,
                  "initial.velocity_amplitude": 0.0, "integrator.dt": 1e-3, "integrator.T": 1.0,
                  "integrator.stride": 1, "experiment.refine": 2})
def _smoothing(config: RunConfig, workers: Optional[int]) -> PresetResult:
    params = config.build_params()
    coarse = params.grid
    fine = dataclasses.replace(coarse, n=coarse.n * config["experiment.refine"])
    fine_params = dataclasses.replace(params, g=transfer(params.g, fine))
    xi0 = config.initial_state(0, grid=coarse)
    fine_xi0 = StatePair(transfer(xi0.u, fine), transfer(xi0.v, fine))
    dt, T, stride = config["integrator.dt"], config["integrator.T"], config["integrator.stride"]
    records = dict(zip([f"N{coarse.n}", f"N{fine.n}"],
                       _pair_runs([(xi0, params), (fine_xi0, fine_params)], T, dt, stride, workers)))
    fits = []
    for label, rec in records.items():
        fit = smoothing_check(rec, T, config.tolerance("smoothing", SMOOTHING_LIMIT))
        fit.name = f"smoothing-{label}"
        fits.append(fit)
    fits.append(smoothing_refinement(fits[0], fits[1], config.tolerance("refinement", 0.25)))
    return PresetResult(fits=fits, records=records)


def _pair_runs(jobs, T: float, dt: float, stride: int, workers: Optional[int]) -> List[TrajectoryRecord]:
    if not workers or workers <= 1:
        return [integrate(xi, T, dt, stride, p) for xi, p in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: integrate(job[0], T, dt, stride, job[1]), jobs))


@preset("e1-dissipativity", "dissipative bound in E1 together with the time-derivative state",
        "3 min", {**_DISSIPATIVE, "initial.slope": -3.0, "ensemble.size": 3, "ensemble.norms": (1.0, 5.0, 10.0),
                  "integrator.T": 20.0})
def _e1_dissipativity(config: RunConfig, workers: Optional[int]) -> PresetResult:
    trajs = _run_ensemble(config, workers)
    result = PresetResult(records=_members(trajs))
    result.fits.append(e1_dissipativity(trajs, config.tolerance("radius", 0.2)))
    for i, traj in enumerate(trajs):
        fit = e1_balance_check(traj, config.tolerance("e1_balance", E1_BALANCE_LIMIT))
        fit.name = f"e1-balance-member-{i}"
        result.fits.append(fit)
    return result


# ─── Lyapunov structure ───────────────────────────────────────

@preset("lyapunov", "energy as a Lyapunov function without friction (alpha = 0, g = cos x, f = u^5)",
        "2 min", {**TORUS_1D, "model.alpha": 0.0, "model.forcing": "single-mode",
                  "initial.velocity_amplitude": 0.5, "integrator.dt": 1e-3, "integrator.T": 20.0,
                  "integrator.stride": 20})
def _lyapunov(config: RunConfig, workers: Optional[int]) -> PresetResult:
    params = config.build_params()
    xi0 = config.initial_state(0, grid=params.grid)
    traj = integrate(xi0, config["integrator.T"], config["integrator.dt"], config["integrator.stride"], params)
    equilibria = find_equilibria([traj.final.u, params.grid.zeros(), params.g], params)
    fit = lyapunov_monotonicity(traj, drop_tol=config.tolerance("drop", 1e-3), equilibria=equilibria.fields())
    return PresetResult([fit], {"trajectory": traj}, {"equilibria": equilibria.to_dict()})


@preset("mean-mode", "conserved energy of the undamped mean mode (alpha = 0, f(u) = u, g = 1)",
        "1 min", {**TORUS_1D, "model.alpha": 0.0, "model.nonlinearity": (1.0, 0.0, 0.0),
                  "model.forcing": "constant", "initial.velocity_amplitude": 0.5,
                  "integrator.dt": 1e-2, "integrator.T": 100.0, "integrator.stride": 100})
def _mean_mode(config: RunConfig, workers: Optional[int]) -> PresetResult:
    params = config.build_params()
    xi0 = config.initial_state(0, grid=params.grid)
    traj = integrate(xi0, config["integrator.T"], config["integrator.dt"], config["integrator.stride"], params)
    fits = [mean_mode_conservation(traj, config.tolerance("mean_mode", 1e-6)),
            energy_equality_residual(traj, config.tolerance("energy", 1e-4))]
    return PresetResult(fits, {"trajectory": traj})


# ─── Attractor ────────────────────────────────────────────────

_ATTRACTOR = {**TORUS_1D, "grid.N": 32, "model.forcing": "single-mode", "model.forcing.amplitude": 2.0,
              "initial.velocity_amplitude": 1.0, "ensemble.size": 4, "ensemble.norms": (1.0, 5.0),
              "integrator.dt": 1e-3, "integrator.stride": 500, "experiment.samples": 50,
              "experiment.deltas": (1e-3,), "experiment.burn_in": 20.0,
              "experiment.duration": 10.0}


@preset("attractor", "absorbing ball, equilibria, attraction and semi-invariance of the sampled attractor, "
        "smoothing-map Lipschitz ratios", "5 min", {**_ATTRACTOR, "integrator.T": 30.0})
def _attractor(config: RunConfig, workers: Optional[int]) -> PresetResult:
    params = config.build_params()
    dt, stride = config["integrator.dt"], config["integrator.stride"]
    burn_in, duration = config["experiment.burn_in"], config["experiment.duration"]
    initial = config.ensemble(params.grid)
    # a second ensemble, disjoint in seeds, is attracted towards the sample of the first
    size, norms = config["ensemble.size"], config["ensemble.norms"]
    incoming = [config.initial_state(size + i, norms[i % len(norms)] if norms else None, params.grid)
                for i in range(size)]
    records = integrate_ensemble(incoming, config["integrator.T"], dt, stride, params, workers)
    result = PresetResult(records=_members(records))

    ball = absorbing_radius(records, level=0.0)
    result.artifacts["absorbing-ball"] = dataclasses.asdict(ball)
    entries = np.array(ball.entry_times)
    result.fits.append(BoundFit("absorbing-ball", entries, {"radius": ball.radius},
                                bool(np.all(np.isfinite(entries))), entries, math.inf))

    guesses = [params.grid.zeros(), params.g] + [rec.final.u for rec in records]
    equilibria = find_equilibria(guesses, params)
    result.artifacts["equilibria"] = equilibria.to_dict()

    sample = sample_attractor(initial, params, burn_in, duration, dt, stride, workers)
    tol = config.tolerance("attraction", ATTRACTION_TOL)
    result.fits.append(sample_in_ball(sample, ball))
    if len(equilibria):
        result.fits.append(equilibria_in_sample(equilibria, sample, tol))
    result.fits.append(attraction_distance(records, sample, burn_in, tol))

    distance = semi_invariance(sample, dt)
    radius = sample.radius()
    tol = config.tolerance("semi_invariance", 0.1)
    result.fits.append(BoundFit("semi-invariance", np.array([distance]),
                                {"distance": distance, "sample_radius": radius, "samples": len(sample.states)},
                                distance <= tol * max(radius, 1e-12), np.array([distance / max(radius, 1e-12)]),
                                tol, [sample.label]))

    delta = config["experiment.deltas"][0]
    seed = config["integrator.seed"] + 2000
    anchors = [sample.states[i % len(sample.states)] for i in range(config["experiment.samples"])]
    directions = [_unit_direction(params.grid, seed + 2 * i) for i in range(len(anchors))]
    limit = config.tolerance("lipschitz_max", LIPSCHITZ_LIMIT)
    fits = []
    for scale in (delta, delta / 10):
        pairs = [(a.at(0.0), (a + d.scaled(scale)).at(0.0)) for a, d in zip(anchors, directions)]
        fit = lipschitz_ensemble(pairs, params, dt, limit=limit)
        fit.name = f"smoothing-lipschitz-{scale:g}"
        fits.append(fit)
    result.fits.extend(fits)
    coarse_l, fine_l = fits[0].constants["L"], fits[1].constants["L"]
    gap = abs(coarse_l - fine_l) / max(coarse_l, fine_l, 1e-300)
    tol = config.tolerance("lipschitz", 0.1)
    result.fits.append(BoundFit("lipschitz-refinement", np.array([coarse_l, fine_l]), {"relative_gap": gap},
                                gap <= tol, np.array([gap]), tol))
    return result


@preset("dimension", "box-counting slopes of synthetic line and torus samples, then of an attractor sample",
        "3 min", {**_ATTRACTOR, "ensemble.size": 4, "integrator.stride": 100,
                  "experiment.burn_in": 5.0, "experiment.duration": 25.0})
def _dimension(config: RunConfig, workers: Optional[int]) -> PresetResult:
    result = PresetResult()
    for name, points, expected, tol in (("line", line_sample(), 1.0, config.tolerance("line", 0.15)),
                                        ("torus", winding_torus_sample(), 2.0, config.tolerance("torus", 0.2))):
        fit = box_counting_dimension(points, expected=expected, tol=tol)
        fit.name = f"box-counting-{name}"
        result.fits.append(fit)

    params = config.build_params()
    burn_in, duration = config["experiment.burn_in"], config["experiment.duration"]
    sample = sample_attractor(config.ensemble(params.grid), params, burn_in, duration,
                              config["integrator.dt"], config["integrator.stride"], workers)
    exploratory = box_counting_dimension(sample, m=4,
                                         max_stderr=config.tolerance("dimension_stderr", 2 * BOX_STDERR))
    exploratory.name = "box-counting-attractor"
    result.fits.append(exploratory)
    return result


# ─── Dirichlet problem through the odd extension ──────────────

_BOX_1D = {**TORUS_1D, "grid.kind": "box"}


@preset("dirichlet-extension", "odd extension: oddness, restriction, commutation with the Laplacian, "
        "H^s continuity", "30 s", {**_BOX_1D, "experiment.samples": 100, "experiment.s": (-1.0, 0.0, 0.5, 1.0, 2.0),
                                   "initial.slope": -1.0})
def _dirichlet_extension(config: RunConfig, workers: Optional[int]) -> PresetResult:
    grid = config.grid()
    spec = ExtensionSpec.for_grid(grid)
    seed = config["integrator.seed"]
    tol = config.tolerance("extension", 1e-10)
    odd, inverse, commutator = [], [], []
    for i in range(config["experiment.samples"]):
        u = random_field(grid, seed + i, config["initial.slope"])
        ext = ext_apply(u, spec)
        scale = math.sqrt(hs_delta_norm_sq(u, 0.0))
        odd.append(odd_defect(ext) / scale)
        inverse.append(math.sqrt(hs_delta_norm_sq(restrict(ext, spec) - u, 0.0)) / scale)
        commutator.append(commutator_check(u) / scale)
    expected = 2 ** (grid.dim / 2)
    ratio_errors = [abs(ext_norm_continuity(mode_field(grid, (k,) * grid.dim), s) - expected)
                    for k in range(1, min(grid.n, 8) + 1) for s in config["experiment.s"]]
    return PresetResult([
        _threshold_fit("extension-oddness", odd, tol),
        _threshold_fit("extension-restriction", inverse, tol),
        _threshold_fit("extension-commutator", commutator, tol),
        _threshold_fit("extension-norm-ratio", ratio_errors, tol, expected=expected),
    ])


@preset("dirichlet-regularity", "window integrals of ||u||^2_{H^3/2} on the box, the auxiliary field and "
        "the extended seminorm", "3 min",
        {**_BOX_1D, "model.forcing": "single-mode", "initial.amplitude": 0.5, "initial.velocity_amplitude": 0.5,
         "initial.slope": -2.0, "ensemble.size": 2, "integrator.dt": 1e-3, "integrator.T": 10.0,
         "integrator.stride": 25, "experiment.windows": (2.0, 4.0, 6.0, 8.0)})
def _dirichlet_regularity(config: RunConfig, workers: Optional[int]) -> PresetResult:
    trajs = _run_ensemble(config, workers)
    fit = dirichlet_regularity_check(trajs, config["experiment.windows"], 1.0,
                                     config.tolerance("uniformity", 0.1))
    return PresetResult([fit], _members(trajs))
