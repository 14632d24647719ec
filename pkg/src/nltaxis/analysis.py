"""Solution metrics, operator diagnostics, and radius-sweep orchestration."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .grid import ScalarField, interior_mask
from .operators import (
    ADHESION_VELOCITY,
    BALL_AVERAGE,
    KernelF,
    build_operator,
    gradient_values,
)
from .solver import (
    LOCAL,
    NONLOCAL_ADHESION,
    NONLOCAL_BALL,
    Formulation,
    RunResult,
    SolverConfig,
    integrate,
)


def distance_values(a: np.ndarray, b: np.ndarray, h: float, length: float) -> float:
    """Mean absolute difference ``(1/L) integral |a - b| dx`` (midpoint rule)."""
    return float(h / length * np.abs(np.asarray(a) - np.asarray(b)).sum())


def distance(u1: ScalarField, u2: ScalarField) -> float:
    if u1.grid != u2.grid:
        raise GridMismatchError("cannot compare fields on different grids")
    return distance_values(u1.values, u2.values, u1.grid.h, u1.grid.length)


@dataclass(frozen=True)
class DistanceCurve:
    times: np.ndarray
    values: np.ndarray

    def at(self, t: float) -> float:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} was not sampled")
        return float(self.values[idx])


def curve_between(result_a: RunResult, result_b: RunResult, h: float, length: float) -> DistanceCurve:
    """Distance curve of the c-fields over the common prefix of sampled times."""
    n = min(len(result_a.times), len(result_b.times))
    vals = np.array(
        [distance_values(result_a.c[k], result_b.c[k], h, length) for k in range(n)]
    )
    return DistanceCurve(result_a.times[:n].copy(), vals)


# ---------------------------------------------------------------------------
# Fourier symbol of the ball-average variant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolProfile:
    """Scalar symbol of the ball average on the line, sampled in frequency.

    ``values[k]`` approximates
    ``integral_0^1 (1/2) integral_{-1}^1 |y| F_r(r|y|) e^{i r s y xi} dy ds``
    at ``xi = xi_grid[k]``; the odd imaginary part cancels, so the stored
    complex values are real up to round-off. ``modulus_bound`` is the same
    quadrature applied to ``(1/n) avg_{B_1} |y| F_r(r|y|)``, which dominates
    ``|values|`` exactly because all quadrature weights are positive.
    """

    radius: float
    xi: np.ndarray
    values: np.ndarray
    sup_modulus: float
    modulus_bound: float
    quad_points: int


def fourier_symbol(
    kernel: KernelF,
    r: float,
    xi_max: float = 100.0,
    n_xi: int = 501,
    quad_points: int = 256,
) -> SymbolProfile:
    """Gauss-Legendre evaluation of the symbol with ``quad_points`` nodes in y and s."""
    if r <= 0.0:
        raise ConfigurationError("radius must be positive")
    if quad_points < 256:
        raise ConfigurationError("symbol quadrature needs at least 256 points")
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    y = 0.5 * (nodes + 1.0)  # reduced to the positive half axis by symmetry
    wy = 0.5 * weights
    s = 0.5 * (nodes + 1.0)
    ws = 0.5 * weights
    amp = (wy * y * kernel.evaluate(r, r * y))[:, None] * ws[None, :]
    phase = r * y[:, None] * s[None, :]
    xi = np.linspace(0.0, xi_max, n_xi)
    vals = np.empty(n_xi, dtype=complex)
    for k, x in enumerate(xi):
        vals[k] = np.sum(amp * np.cos(phase * x))
    bound = float(amp.sum())
    return SymbolProfile(
        radius=float(r),
        xi=xi,
        values=vals,
        sup_modulus=float(np.max(np.abs(vals))),
        modulus_bound=bound,
        quad_points=int(quad_points),
    )


# ---------------------------------------------------------------------------
# r -> 0 convergence sweeps
# ---------------------------------------------------------------------------

MONOTONE_SLACK = 0.05  # relative slack when judging distance monotonicity


@dataclass
class SweepReport:
    radii: tuple
    reference: RunResult
    results: list
    curves: list
    verdicts: dict

    @property
    def reference_completed(self) -> bool:
        return self.reference.status == "completed"


def convergence_sweep(
    base: SolverConfig,
    nonlocal_kind: str,
    radii: Sequence[float],
    epsilon: float = 0.0,
    quad_points: int = 8,
) -> SweepReport:
    """Run the nonlocal formulation over decreasing radii against the local limit.

    Distances to the local reference are recorded per sample time; the verdict
    at a time is True when the distance is nonincreasing as r decreases, with
    5% relative slack for discretization noise. Individual run failures are
    recorded without aborting the sweep.
    """
    if not radii:
        raise ConfigurationError("need at least one sweep radius")
    radii = tuple(sorted(set(float(r) for r in radii), reverse=True))
    reference = integrate(replace(base, formulation=Formulation(LOCAL)))
    results: list = []
    curves: list = []
    for r in radii:
        cfg = replace(
            base,
            formulation=Formulation(nonlocal_kind, radius=r, epsilon=epsilon, quad_points=quad_points),
        )
        try:
            res = integrate(cfg)
        except Exception as exc:  # record, keep sweeping
            results.append(exc)
            curves.append(None)
            continue
        results.append(res)
        curves.append(curve_between(res, reference, base.grid.h, base.grid.length))
    verdicts: dict = {}
    for k, t in enumerate(reference.times):
        ds = [c.values[k] for c in curves if c is not None and len(c.values) > k]
        if len(ds) < 2:
            verdicts[float(t)] = False
            continue
        verdicts[float(t)] = all(
            ds[i + 1] <= ds[i] * (1.0 + MONOTONE_SLACK) for i in range(len(ds) - 1)
        )
    return SweepReport(radii=radii, reference=reference, results=results, curves=curves, verdicts=verdicts)


# ---------------------------------------------------------------------------
# boundary-layer comparison of the two nonlocal formulations
# ---------------------------------------------------------------------------


@dataclass
class ComparisonReport:
    """Solution- and operator-level differences between the adhesion-velocity
    and gradient-averaging formulations at the same radius."""

    radius: float
    times: np.ndarray
    distance: np.ndarray
    solution_interior_max: np.ndarray
    solution_layer_max: np.ndarray
    operator_interior_max: np.ndarray
    operator_layer_max: np.ndarray
    run_adhesion: RunResult
    run_ball: RunResult

    @property
    def completed(self) -> bool:
        return self.run_adhesion.status == "completed" and self.run_ball.status == "completed"


def boundary_layer_comparison(
    base: SolverConfig, r: float, epsilon: float = 0.0, quad_points: int = 8
) -> ComparisonReport:
    """Run both nonlocal formulations and split their differences at radius r.

    The solution difference is reported over the sensing boundary layer
    ``[0, r] u [L - r, L]`` and over the restricted-sensing cells separately;
    the same split is applied to the pointwise difference of the two operator
    outputs (adhesion velocity of g versus ball average of its gradient)
    evaluated on each run's own sampled states.
    """
    grid = base.grid
    run_a = integrate(
        replace(base, formulation=Formulation(NONLOCAL_ADHESION, radius=r, epsilon=epsilon, quad_points=quad_points))
    )
    run_t = integrate(
        replace(base, formulation=Formulation(NONLOCAL_BALL, radius=r, epsilon=epsilon, quad_points=quad_points))
    )
    mask = interior_mask(grid, r).flags
    layer = ~mask
    kernel = base.coefficients.kernel
    op_a = build_operator(ADHESION_VELOCITY, grid, r, kernel=kernel, quad_points=quad_points)
    op_t = build_operator(BALL_AVERAGE, grid, r, kernel=kernel, quad_points=quad_points)

    n = min(len(run_a.times), len(run_t.times))
    dist = np.empty(n)
    sol_in = np.empty(n)
    sol_layer = np.empty(n)
    op_in = np.empty(n)
    op_layer = np.empty(n)
    for k in range(n):
        diff = np.abs(run_a.c[k] - run_t.c[k])
        dist[k] = distance_values(run_a.c[k], run_t.c[k], grid.h, grid.length)
        sol_in[k] = diff[mask].max() if mask.any() else 0.0
        sol_layer[k] = diff[layer].max() if layer.any() else 0.0
        op_devs = []
        for res in (run_a, run_t):
            g = base.coefficients.g(res.c[k], res.v[k])
            dev = np.abs(op_a.apply_values(g) - op_t.apply_values(gradient_values(g, grid.h)))
            op_devs.append(dev)
        both = np.maximum(op_devs[0], op_devs[1])
        op_in[k] = both[mask].max() if mask.any() else 0.0
        op_layer[k] = both[layer].max() if layer.any() else 0.0
    return ComparisonReport(
        radius=float(r),
        times=run_a.times[:n].copy(),
        distance=dist,
        solution_interior_max=sol_in,
        solution_layer_max=sol_layer,
        operator_interior_max=op_in,
        operator_layer_max=op_layer,
        run_adhesion=run_a,
        run_ball=run_t,
    )


def aggregate_count(values: np.ndarray, threshold: float) -> int:
    """Count strict local maxima above ``threshold * max(values)``.

    Plateaus (runs of equal values) count once; the field is treated as
    falling off outside the domain.
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigurationError("threshold must lie strictly between 0 and 1")
    values = np.asarray(values, dtype=float)
    n = values.size
    peak = values.max() if n else 0.0
    if n == 0 or peak <= 0.0:
        return 0
    level = threshold * peak
    count = 0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        left = values[i - 1] if i > 0 else -np.inf
        right = values[j + 1] if j + 1 < n else -np.inf
        if values[i] > left and values[i] > right and values[i] > level:
            count += 1
        i = j + 1
    return count
