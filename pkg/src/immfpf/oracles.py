"""Desk-scale exact solvers used to cross-check the particle filter.

* :func:`kalman_bucy` integrates the scalar Kalman-Bucy mean/variance
  equations for linear-Gaussian single-mode models.
* :func:`kushner_grid_step` advances the exact joint conditional density of
  (state, mode) on a bounded 1-D grid with an explicit finite-difference
  scheme: upwind advection, centered diffusion, generator coupling and the
  multiplicative observation correction.
* :func:`grid_gain_exact` / :func:`grid_control_exact` solve the gain and
  interaction boundary value problems by cumulative integration, giving the
  exact (grid) counterparts of the bank's constant-gain approximations.

These are test oracles: simple explicit schemes with hard preconditions, not
production PDE machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryResidualLarge,
    MassEscape,
    StabilityViolation,
    ValidationError,
)
from .model import GeneratorMatrix, HybridModel, ObservationPath

_RHO_FLOOR = 1e-300
_MASS_TOL = 1e-8
_RESIDUAL_TOL = 1e-8
_BOUNDARY_MASS_FRACTION = 0.01


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1-D grid of ``n_cells`` nodes spanning [x_min, x_max]."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self) -> None:
        if not self.x_min < self.x_max:
            raise ValidationError("need x_min < x_max")
        if self.n_cells < 16:
            raise ValidationError("need n_cells >= 16")

    @property
    def h_x(self) -> float:
        return (self.x_max - self.x_min) / (self.n_cells - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_cells)


@dataclass(frozen=True)
class GridDensity:
    """M stacked joint densities q_m(x) on a shared grid, total mass 1.

    Mode masses integrate to the mode probabilities; the sum over modes is the
    state marginal; q_m divided by its mass is the mode-conditional density.
    """

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != self.grid.n_cells:
            raise ValidationError(f"values must be M x {self.grid.n_cells}, got {arr.shape}")
        if np.any(arr < 0):
            raise ValidationError("density values must be nonnegative")
        mass = arr.sum() * self.grid.h_x
        if abs(mass - 1.0) > _MASS_TOL:
            raise ValidationError(f"total mass {mass:.10f} deviates from 1 beyond {_MASS_TOL}")
        object.__setattr__(self, "values", arr)

    @property
    def n_modes(self) -> int:
        return self.values.shape[0]

    def mode_masses(self) -> np.ndarray:
        """Per-mode probabilities mu_m = integral of q_m."""
        return self.values.sum(axis=1) * self.grid.h_x

    def conditional(self, m: int) -> np.ndarray:
        """Mode-conditional density q_m / mu_m."""
        return self.values[m] / max(self.mode_masses()[m], _RHO_FLOOR)

    def marginal(self) -> np.ndarray:
        """State marginal: sum of the joint densities over modes."""
        return self.values.sum(axis=0)


def gaussian_grid_density(
    grid: Grid1D,
    mean: float,
    std: float,
    mode_weights: np.ndarray,
) -> GridDensity:
    """Initial density: every mode shares one Gaussian profile, weighted by mode probability."""
    if std <= 0:
        raise ValidationError("std must be > 0")
    x = grid.nodes
    profile = np.exp(-0.5 * ((x - mean) / std) ** 2)
    profile /= profile.sum() * grid.h_x
    w = np.asarray(mode_weights, dtype=float)
    values = w[:, None] * profile[None, :]
    return GridDensity(grid=grid, values=values / (values.sum() * grid.h_x))


def _advection_flux(a_face: np.ndarray, q: np.ndarray) -> np.ndarray:
    """First-order upwind flux at interior faces; boundary faces carry no flux."""
    return np.maximum(a_face, 0.0) * q[:-1] + np.minimum(a_face, 0.0) * q[1:]


def kushner_grid_step(density: GridDensity, model: HybridModel, dz: float, dt: float) -> GridDensity:
    """One explicit Euler step of the joint conditional density recursion.

    Advection is upwind, diffusion centered, both in conservative flux form
    with no-flux boundaries; generator coupling and the observation correction
    act pointwise. Negative values (possible at the edges from the
    multiplicative correction) are clipped and total mass is renormalized.

    Raises :class:`StabilityViolation` when dt exceeds the explicit-scheme
    bounds and :class:`MassEscape` when the boundary nodes end up holding more
    than 1% of total mass (the domain is too small for the run).
    """
    grid = density.grid
    h_x = grid.h_x
    x = grid.nodes
    q = density.values
    m_count = density.n_modes
    if m_count != model.n_modes:
        raise ValidationError("density and model disagree on the number of modes")

    drift_vals = np.stack([model.modes[m].drift(x) for m in range(m_count)])
    sigma_max = max(dyn.diffusion for dyn in model.modes)
    a_max = float(np.max(np.abs(drift_vals)))
    if sigma_max > 0 and dt > 0.4 * h_x**2 / sigma_max**2:
        raise StabilityViolation(
            f"dt={dt:.3g} exceeds diffusion bound {0.4 * h_x**2 / sigma_max**2:.3g}"
        )
    if a_max > 0 and dt * a_max / h_x > 0.9:
        raise StabilityViolation(
            f"advection CFL dt*|a|/h = {dt * a_max / h_x:.3g} exceeds 0.9"
        )

    sw = model.obs_noise_intensity
    h_vals = np.stack([model.modes[m].observation(x) for m in range(m_count)]) / sw
    dz_r = dz / sw
    h_hat = float((h_vals * q).sum() * h_x)

    new = q.copy()
    for m in range(m_count):
        a_face = 0.5 * (drift_vals[m, :-1] + drift_vals[m, 1:])
        flux = _advection_flux(a_face, q[m])
        adv = np.zeros_like(q[m])
        adv[:-1] -= flux / h_x
        adv[1:] += flux / h_x
        sig = model.modes[m].diffusion
        diff = np.zeros_like(q[m])
        if sig > 0:
            g_face = 0.5 * sig**2 * (q[m, 1:] - q[m, :-1]) / h_x
            diff[:-1] += g_face / h_x
            diff[1:] -= g_face / h_x
        new[m] += dt * (adv + diff)
    new += dt * (model.generator.q.T @ q)
    new += (h_vals - h_hat) * (dz_r - h_hat * dt) * q

    np.clip(new, 0.0, None, out=new)
    boundary = float(new[:, 0].sum() + new[:, -1].sum()) * h_x
    total = float(new.sum()) * h_x
    if total <= 0:
        raise MassEscape("all probability mass clipped away; domain or step invalid")
    if boundary / total > _BOUNDARY_MASS_FRACTION:
        raise MassEscape(
            f"boundary nodes hold {100 * boundary / total:.2f}% of mass; enlarge the domain"
        )
    return GridDensity(grid=grid, values=new / total)


def kalman_bucy(
    alpha: float,
    sigma: float,
    obs_path: ObservationPath,
    x0_mean: float,
    x0_var: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Euler integration of the scalar Kalman-Bucy filter.

    Model (unit observation noise): dX = alpha X dt + sigma dB, dZ = X dt + dW.
    Mean: dm = alpha m dt + P (dZ - m dt); variance: dP = (2 alpha P + sigma^2 - P^2) dt.
    Returns mean and variance paths including the initial values.
    """
    if x0_var < 0:
        raise ValidationError("x0_var must be >= 0")
    dz = obs_path.increments
    dt = obs_path.step
    n = len(dz)
    means = np.empty(n + 1)
    variances = np.empty(n + 1)
    m, p = float(x0_mean), float(x0_var)
    means[0], variances[0] = m, p
    for k in range(n):
        m_new = m + alpha * m * dt + p * (dz[k] - m * dt)
        p_new = p + (2.0 * alpha * p + sigma**2 - p**2) * dt
        m, p = m_new, max(p_new, 0.0)
        means[k + 1], variances[k + 1] = m, p
    return means, variances


def _weighted_mean(values: np.ndarray, rho: np.ndarray, h_x: float) -> float:
    mass = rho.sum() * h_x
    return float((values * rho).sum() * h_x / mass)


def grid_gain_exact(
    grid: Grid1D,
    rho: np.ndarray,
    h_values: np.ndarray,
    h_hat: float | None = None,
) -> tuple[np.ndarray, float]:
    """Exact gain on the grid from the gain BVP, by cumulative integration.

    ``(rho K)(x_j) = -sum_{k<=j} (h_k - h_hat) rho_k h_x`` with a zero left
    boundary; dividing by rho (floored) gives K. Returns (K, residual) where
    the residual is the full-domain integral of the right-hand side, which
    vanishes when ``h_hat`` is the rho-mean of h (the default).
    """
    rho = np.asarray(rho, dtype=float)
    h_values = np.asarray(h_values, dtype=float)
    if rho.shape != h_values.shape or rho.shape != (grid.n_cells,):
        raise ValidationError("rho and h_values must match the grid size")
    if h_hat is None:
        h_hat = _weighted_mean(h_values, rho, grid.h_x)
    rhs = (h_values - h_hat) * rho * grid.h_x
    cumulative = np.cumsum(rhs)
    residual = float(cumulative[-1])
    if abs(residual) > _RESIDUAL_TOL:
        raise BoundaryResidualLarge(
            f"right-boundary residual {residual:.3e} exceeds {_RESIDUAL_TOL}"
        )
    gain = -cumulative / np.maximum(rho, _RHO_FLOOR)
    return gain, residual


def grid_control_exact(
    grid: Grid1D,
    rhos: np.ndarray,
    mu: np.ndarray,
    gen: GeneratorMatrix,
    m: int,
) -> tuple[np.ndarray, float]:
    """Exact interaction control on the grid from the transport BVP.

    Solves ``d(rho_m u)/dx = sum_l c_lm (rho_m - rho_l)`` with
    ``c_lm = q_lm mu_l / mu_m`` by cumulative integration from the left
    boundary. Each rho integrates to one, so the right-hand side integrates to
    zero; a large residual signals unnormalized inputs.
    """
    rhos = np.asarray(rhos, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if rhos.ndim != 2 or rhos.shape[1] != grid.n_cells:
        raise ValidationError("rhos must be M x n_cells")
    if mu[m] <= 0:
        raise ValidationError("mu_m must be positive for the control BVP")
    rhs = np.zeros(grid.n_cells)
    for l in range(rhos.shape[0]):
        if l == m:
            continue
        c_lm = gen.q[l, m] * mu[l] / mu[m]
        rhs += c_lm * (rhos[m] - rhos[l])
    cumulative = np.cumsum(rhs * grid.h_x)
    residual = float(cumulative[-1])
    if abs(residual) > _RESIDUAL_TOL:
        raise BoundaryResidualLarge(
            f"right-boundary residual {residual:.3e} exceeds {_RESIDUAL_TOL}"
        )
    control = cumulative / np.maximum(rhos[m], _RHO_FLOOR)
    return control, residual


def grid_moments(density: GridDensity, mode: int | None = None) -> tuple[float, float, float]:
    """Trapezoidal (mass, mean, variance) of one mode's density or of the marginal."""
    x = density.grid.nodes
    vals = density.marginal() if mode is None else density.values[mode]
    mass = float(np.trapezoid(vals, x))
    if mass <= 0:
        raise ValidationError("cannot take moments of a zero-mass density")
    mean = float(np.trapezoid(x * vals, x) / mass)
    var = float(np.trapezoid((x - mean) ** 2 * vals, x) / mass)
    return mass, mean, var
