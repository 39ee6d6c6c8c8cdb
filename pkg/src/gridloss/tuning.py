"""Communication-gain optimization and parameter sweeps.

The DAPI loss is smooth in the communication gain ratio gamma, with an
analytic derivative, so the minimizer is found by sign bracketing plus
bisection on the derivative rather than by sampling norms.  On complete
graphs with uniform susceptance the optimum also has a closed form, kept as
an independent cross-check.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import ControllerParams
from .errors import TuningError, ValidationError
from .h2 import h2_dapi_closed_form
from .network import Spectrum

SWEEPABLE = ("gamma", "k", "tau", "m")

_GAMMA_TOL = 1e-10
_GAMMA_CAP = 1e6


@dataclass(frozen=True)
class TuningResult:
    """Outcome of the gain search.

    ``bracket`` is the initial derivative sign-change interval; a boundary
    optimum (gamma_star = 0) carries the degenerate bracket (0, 0) and zero
    iterations.
    """

    gamma_star: float
    norm_at_star: float
    iterations: int
    bracket: tuple[float, float]

    def __post_init__(self) -> None:
        lo, hi = float(self.bracket[0]), float(self.bracket[1])
        if not (0.0 <= lo <= hi) or not np.isfinite(hi):
            raise ValidationError(f"bracket must satisfy 0 <= lo <= hi, got {self.bracket!r}")
        if not np.isfinite(self.gamma_star) or not (lo <= self.gamma_star <= hi):
            raise ValidationError(f"gamma_star {self.gamma_star!r} outside bracket {self.bracket!r}")
        if not np.isfinite(self.norm_at_star) or self.norm_at_star < 0:
            raise ValidationError(f"norm_at_star must be finite and >= 0, got {self.norm_at_star!r}")
        if int(self.iterations) < 0:
            raise ValidationError(f"iterations must be >= 0, got {self.iterations!r}")
        object.__setattr__(self, "gamma_star", float(self.gamma_star))
        object.__setattr__(self, "norm_at_star", float(self.norm_at_star))
        object.__setattr__(self, "iterations", int(self.iterations))
        object.__setattr__(self, "bracket", (lo, hi))


@dataclass(frozen=True)
class SweepCurve:
    """One-parameter curve: strictly increasing grid with one value per point."""

    parameter_name: str
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 1 or values.shape != grid.shape:
            raise ValidationError(
                f"grid and values must be equal-length vectors, got {grid.shape} and {values.shape}"
            )
        if not np.all(np.isfinite(grid)) or not np.all(np.isfinite(values)):
            raise ValidationError("grid and values must be finite")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("grid must be strictly increasing")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


def norm_gamma_derivative(gamma, eigenvalues_nonzero, alpha: float, m: float, k: float, tau: float):
    """d/d(gamma) of the DAPI squared norm, in closed form.

    Per nonzero eigenvalue lam the summand derivative is
    lam ((gamma tau lam + k)^2 - k^2 m tau lam) / (P + s)^2 with
    s = gamma tau lam + k and P = gamma lam s + k^2 m lam, scaled by
    alpha / (2 m).  Accepts a scalar or a vector of gamma values.
    """
    lam = np.asarray(eigenvalues_nonzero, dtype=float)
    g = np.asarray(gamma, dtype=float)
    scalar = g.ndim == 0
    g = np.atleast_1d(g)[:, None]
    s = g * tau * lam + k
    p = g * lam * s + k * k * m * lam
    summands = lam * (s * s - k * k * m * tau * lam) / (p + s) ** 2
    total = alpha / (2.0 * m) * summands.sum(axis=1)
    return total.item() if scalar else total


def optimal_gamma(spectrum: Spectrum, params: ControllerParams, alpha: float) -> TuningResult:
    """Minimize the DAPI loss over the communication gain ratio.

    The gamma field of ``params`` is ignored.  The derivative sign is
    bracketed by geometric growth from gamma = 1 (capped at 1e6), then
    bisected to an interval of width 1e-10; a nonnegative derivative at
    gamma = 0 means the boundary is already optimal.  A derivative with
    more than one sign change on a dense probe grid (never observed) would
    be reported with a warning and resolved by comparing the minima.

    Raises:
        TuningError: derivative still negative at the gamma cap.
    """
    lams = spectrum.nonzero
    m, k, tau = params.m, params.k, params.tau

    def deriv(g: float) -> float:
        return norm_gamma_derivative(g, lams, alpha, m, k, tau)

    def norm_at(g: float) -> float:
        q = dataclasses.replace(params, gamma=g)
        return h2_dapi_closed_form(alpha, q, spectrum).squared_norm

    if deriv(0.0) >= 0.0:
        return TuningResult(gamma_star=0.0, norm_at_star=norm_at(0.0), iterations=0, bracket=(0.0, 0.0))

    hi = 1.0
    while deriv(hi) <= 0.0:
        hi *= 2.0
        if hi > _GAMMA_CAP:
            raise TuningError(
                f"loss derivative is still negative at gamma = {_GAMMA_CAP:g}; no stationary point bracketed"
            )
    bracket = (0.0, hi)
    gamma_star, iterations = _bisect_derivative(deriv, 0.0, hi)

    crossings = _descending_crossings(deriv, hi)
    if len(crossings) > 1:
        candidates = [_bisect_derivative(deriv, lo_i, hi_i)[0] for lo_i, hi_i in crossings]
        norms = [norm_at(g) for g in candidates]
        best = int(np.argmin(norms))
        warnings.warn(
            f"multiple local minima at gamma = {candidates}; returning the global one",
            RuntimeWarning,
            stacklevel=2,
        )
        gamma_star = candidates[best]
    return TuningResult(
        gamma_star=gamma_star,
        norm_at_star=norm_at(gamma_star),
        iterations=iterations,
        bracket=bracket,
    )


def _bisect_derivative(deriv, lo: float, hi: float) -> tuple[float, int]:
    iterations = 0
    while hi - lo > _GAMMA_TOL and iterations < 200:
        mid = 0.5 * (lo + hi)
        if deriv(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    return 0.5 * (lo + hi), iterations


def _descending_crossings(deriv, hi: float) -> list[tuple[float, float]]:
    # probe for negative-to-nonnegative derivative transitions (local minima)
    grid = np.linspace(0.0, 2.0 * hi, 257)
    signs = np.array([deriv(g) for g in grid]) < 0.0
    out = []
    for i in range(len(grid) - 1):
        if signs[i] and not signs[i + 1]:
            out.append((grid[i], grid[i + 1]))
    return out


def optimal_gamma_complete(n_nodes: int, b: float, k: float, m: float, tau: float) -> float:
    """Closed-form optimal gain for a complete graph with uniform susceptance.

    Equals (k / (N b tau)) (sqrt(N b m tau) - 1) when N b m tau > 1, else 0
    (the boundary optimum); tau = 0 always gives 0.
    """
    if not isinstance(n_nodes, (int, np.integer)) or n_nodes < 2:
        raise ValidationError(f"n_nodes must be an integer >= 2, got {n_nodes!r}")
    checks = {"b": b, "k": k, "m": m}
    for name, value in checks.items():
        if not np.isfinite(value) or value <= 0:
            raise ValidationError(f"{name} must be > 0, got {value!r}")
    if not np.isfinite(tau) or tau < 0:
        raise ValidationError(f"tau must be >= 0, got {tau!r}")
    if tau == 0.0:
        return 0.0
    product = n_nodes * b * m * tau
    if product <= 1.0:
        return 0.0
    return k / (n_nodes * b * tau) * (math.sqrt(product) - 1.0)


def sweep(
    spectrum: Spectrum,
    params: ControllerParams,
    alpha: float,
    parameter_name: str,
    grid,
) -> SweepCurve:
    """DAPI squared norm along one controller parameter.

    ``params`` supplies the held-fixed values; ``parameter_name`` is one of
    gamma, k, tau, m.  Grid points must be strictly increasing and valid for
    the parameter (e.g. k > 0), or a validation error names the point.
    """
    if parameter_name not in SWEEPABLE:
        raise ValidationError(f"parameter_name must be one of {SWEEPABLE}, got {parameter_name!r}")
    grid = np.array(grid, dtype=float)
    values = np.empty_like(grid)
    for i, point in enumerate(grid):
        try:
            q = dataclasses.replace(params, **{parameter_name: float(point)})
        except ValidationError as err:
            raise ValidationError(f"grid point {i} ({parameter_name}={point!r}): {err}") from None
        values[i] = h2_dapi_closed_form(alpha, q, spectrum).squared_norm
    return SweepCurve(parameter_name=parameter_name, grid=grid, values=values)


def gamma_star_vs_k(spectrum: Spectrum, alpha: float, m: float, tau: float, k_grid) -> SweepCurve:
    """Optimal gain at each integral constant k (values are gamma_star)."""
    k_grid = np.array(k_grid, dtype=float)
    values = np.empty_like(k_grid)
    for i, k in enumerate(k_grid):
        try:
            p = ControllerParams(m=m, tau=tau, k=float(k))
        except ValidationError as err:
            raise ValidationError(f"grid point {i} (k={k!r}): {err}") from None
        values[i] = optimal_gamma(spectrum, p, alpha).gamma_star
    return SweepCurve(parameter_name="k", grid=k_grid, values=values)


def loss_reduction_vs_k(spectrum: Spectrum, alpha: float, m: float, tau: float, k_grid) -> SweepCurve:
    """Relative loss reduction of optimally tuned DAPI over droop, per k.

    values[i] = 1 - dapi(gamma_star(k_i)) / droop, in [0, 1); larger means
    the averaging layer pays off more at that integral constant.
    """
    k_grid = np.array(k_grid, dtype=float)
    droop = alpha * (spectrum.n_nodes - 1) / (2.0 * m)
    if droop <= 0:
        raise ValidationError("loss reduction undefined for a single-node network")
    values = np.empty_like(k_grid)
    for i, k in enumerate(k_grid):
        try:
            p = ControllerParams(m=m, tau=tau, k=float(k))
        except ValidationError as err:
            raise ValidationError(f"grid point {i} (k={k!r}): {err}") from None
        values[i] = 1.0 - optimal_gamma(spectrum, p, alpha).norm_at_star / droop
    return SweepCurve(parameter_name="k", grid=k_grid, values=values)
