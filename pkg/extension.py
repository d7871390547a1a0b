"""
Odd extension of Dirichlet fields on the box (0, pi)^d to the torus (-pi, pi)^d.

A sine mode prod sin(k_i x_i) is its own odd periodic extension, so Ext acts on
coefficients: b_k goes to the 2^d Fourier coefficients at (+-k_1, ..., +-k_d)
with weights prod(sign_i) / (2i)^d.  The target torus carries 2(N + 1) points
per axis, which keeps the grid spacing of the box.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from diagnostics import BoundFit, extra_regularity_norm, regularity_rhs, regularity_window_fit
from dynamics import TrajectoryRecord
from errors import DomainError, UnsupportedDomainError
from spectral import (BOX, TORUS, GridSpec, SpectralField, c_constant, frac_laplacian_apply,
                      hs_delta_norm_sq, mollified_limit)

logger = logging.getLogger(__name__)

EXT_S_RANGE = (-1.0, 2.0)


@dataclass(frozen=True)
class ExtensionSpec:
    source: GridSpec
    target: GridSpec
    collar: float = math.pi

    @classmethod
    def for_grid(cls, source: GridSpec) -> "ExtensionSpec":
        if source.kind != BOX:
            raise UnsupportedDomainError("odd extension starts from a Dirichlet box grid")
        return cls(source, GridSpec(source.dim, 2 * (source.n + 1), TORUS, source.dealias))

    def _axis_index(self, sign: int) -> np.ndarray:
        k = np.arange(1, self.source.n + 1)
        return (sign * k) % self.target.n


def ext_apply(u: SpectralField, spec: ExtensionSpec = None) -> SpectralField:
    """Odd periodic extension Ext(u) on the doubled torus"""
    spec = ExtensionSpec.for_grid(u.grid) if spec is None else spec
    if u.grid != spec.source:
        raise DomainError("field does not live on the extension's source grid")
    d = spec.source.dim
    out = np.zeros(spec.target.shape, dtype=complex)
    scale = (2j) ** -d
    for signs in itertools.product((1, -1), repeat=d):
        index = np.ix_(*(spec._axis_index(s) for s in signs))
        out[index] += u.coeffs * (scale * math.prod(signs))
    return SpectralField(spec.target, out)


def restrict(v: SpectralField, spec: ExtensionSpec) -> SpectralField:
    """Sine coefficients of the odd part of a torus field; restrict(Ext u) = u"""
    if v.grid != spec.target:
        raise DomainError("field does not live on the extension's target grid")
    d = spec.source.dim
    acc = np.zeros(spec.source.shape, dtype=complex)
    for signs in itertools.product((1, -1), repeat=d):
        index = np.ix_(*(spec._axis_index(s) for s in signs))
        acc += v.coeffs[index] * math.prod(signs)
    return SpectralField(spec.source, (acc * 1j ** d).real)


def odd_defect(v: SpectralField) -> float:
    """max over axes of |c_k + c_{k with k_i -> -k_i}|; zero iff v is odd in every axis"""
    if v.grid.kind != TORUS:
        raise UnsupportedDomainError("oddness is checked on torus fields")
    c = v.coeffs
    worst = 0.0
    for axis in range(v.grid.dim):
        mirrored = np.roll(np.flip(c, axis=axis), 1, axis=axis)
        worst = max(worst, float(np.max(np.abs(c + mirrored))))
    return worst


def ext_norm_continuity(u: SpectralField, s: float) -> float:
    """||Ext u||_{H^s(torus)} / ||u||_{H^s_Delta(box)}"""
    if not EXT_S_RANGE[0] <= s <= EXT_S_RANGE[1]:
        raise DomainError(f"s must lie in {EXT_S_RANGE}, got {s}")
    base = hs_delta_norm_sq(u, s)
    if base == 0.0:
        raise DomainError("the zero field has no continuity ratio")
    return math.sqrt(hs_delta_norm_sq(ext_apply(u), s) / base)


def commutator_check(u: SpectralField) -> float:
    """||Ext(Laplacian u) - Laplacian(Ext u)||_{H^{-1}(torus)}"""
    spec = ExtensionSpec.for_grid(u.grid)
    lhs = ext_apply(-frac_laplacian_apply(u, 1.0), spec)
    rhs = -frac_laplacian_apply(ext_apply(u, spec), 1.0)
    return math.sqrt(hs_delta_norm_sq(lhs - rhs, -1.0))


def auxiliary_field(xi, params) -> SpectralField:
    """w = gamma (-Laplacian)^{theta-1} u_t + alpha (-Laplacian)^{-1} u_t - (-Laplacian)^{-1} g"""
    return (frac_laplacian_apply(xi.v, params.theta - 1.0) * params.gamma
            + frac_laplacian_apply(xi.v, -1.0) * params.alpha
            - frac_laplacian_apply(params.g, -1.0))


def extended_seminorm(u: SpectralField, s: float = 0.5) -> float:
    """c [grad Ext u, grad Ext u]_{s, eps -> 0} / 2^d, the box-normalized extended seminorm"""
    ext = ext_apply(u)
    grid = ext.grid
    total = 0.0
    for k in grid.wavevectors:
        _, limit = mollified_limit(ext.with_coeffs(1j * k * ext.coeffs), s)
        total += limit
    return c_constant(s, grid.dim) * total / 2 ** grid.dim


def dirichlet_regularity_check(trajs: Sequence[TrajectoryRecord], starts: Sequence[float],
                               length: float = 1.0, uniformity_tol: float = 0.1,
                               extended: bool = True, slack: float = 1e-3) -> BoundFit:
    """Window integrals of ||u||^2_{H^3/2} on the box against the cubed right side, with the auxiliary bound"""
    lhs, rhs, at, aux_lhs, aux_rhs, ext_margin = [], [], [], [], [], []
    for traj in trajs:
        if traj.params.grid.kind != BOX:
            raise UnsupportedDomainError("the Dirichlet regularity check runs on box trajectories")
        w_sq = np.array([hs_delta_norm_sq(auxiliary_field(xi, traj.params), 1.5) for xi in traj.states])
        g_sq = hs_delta_norm_sq(traj.params.g, -0.5)
        for start in starts:
            lhs.append(extra_regularity_norm(traj, start, length))
            rhs.append(regularity_rhs(traj, start, length, 6.0))
            at.append(start)
            idx = traj.window(start, length)
            times = traj.times[idx]
            aux_lhs.append(float(trapezoid(w_sq[idx], times)))
            sup_e = max(hs_delta_norm_sq(traj.states[i].u, 1.0) + hs_delta_norm_sq(traj.states[i].v, 0.0)
                        for i in idx)
            damp = np.array([hs_delta_norm_sq(traj.states[i].v, 0.5) for i in idx])
            aux_rhs.append(sup_e + float(trapezoid(damp, times)) + g_sq)
            if extended:
                u_mid = traj.states[idx[idx.size // 2]].u
                gap = hs_delta_norm_sq(u_mid, 1.5) - hs_delta_norm_sq(u_mid, 1.0)
                ext_margin.append(extended_seminorm(u_mid) - gap + slack * max(abs(gap), 1e-300))

    fit = regularity_window_fit("dirichlet-regularity", np.array(lhs), np.array(rhs), np.array(at),
                                uniformity_tol, 6.0, len(trajs))
    aux_lhs, aux_rhs = np.array(aux_lhs), np.array(aux_rhs)
    aux_ratio = np.where(aux_rhs > 0, aux_lhs / np.where(aux_rhs > 0, aux_rhs, 1.0), 0.0)
    fit.constants["C_auxiliary"] = float(aux_ratio.max()) if aux_ratio.size else 0.0
    if extended:
        margin = np.array(ext_margin)
        fit.constants["extended_margin_min"] = float(margin.min()) if margin.size else 0.0
        if margin.size and margin.min() < 0:
            fit.passed = False
            fit.notes.append("extended seminorm failed to dominate ||u||^2_{H^3/2} - ||u||^2_{H^1}")
    if not np.all(np.isfinite(aux_ratio)):
        fit.passed = False
        fit.notes.append("auxiliary field bound is not finite")
    return fit
