"""Discrete nonlocal taxis operators on uniform 1D grids.

Four operator variants are provided, each reduced to its 1D form acting on
piecewise-constant fields extended by zero outside the domain:

* ``adhesion_velocity``: ``(1/(2 r^2)) * integral_{-r}^{r} u(x+xi) sign(xi) F(|xi|) dxi``
* ``nonlocal_gradient``: ``(u(x+r) - u(x-r)) / (2 r)``
* ``ball_average``: the two-stage (segment-then-ball) average of a gradient-type
  field, which collapses in 1D to convolution with the even kernel
  ``K(xi) = (1/(2 r^2)) * integral_{|xi|}^{r} F(u) du``
* ``window_average``: ``(1/(2 r)) * integral_{x-r}^{x+r} w(z) dz``

Because the grid is uniform and fields vanish outside ``[0, L]``, every
operator is a banded Toeplitz matrix: one weight profile over cell offsets,
rows truncated at the boundary. Weights integrate the reduced kernel with a
composite midpoint rule at ``quad_points`` sub-panels per cell, with
fractional panels where the sensing window ends between faces, so the
operators are exact on piecewise-constant inputs up to the kernel quadrature.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .grid import Grid1D, ScalarField

ADHESION_VELOCITY = "adhesion_velocity"
NONLOCAL_GRADIENT = "nonlocal_gradient"
BALL_AVERAGE = "ball_average"
WINDOW_AVERAGE = "window_average"
OPERATOR_KINDS = (ADHESION_VELOCITY, NONLOCAL_GRADIENT, BALL_AVERAGE, WINDOW_AVERAGE)

#: variants whose 1D kernel is odd (weights antisymmetric in the offset)
ODD_KINDS = (ADHESION_VELOCITY, NONLOCAL_GRADIENT)

#: variants that need an interaction-force kernel
KERNEL_KINDS = (ADHESION_VELOCITY, BALL_AVERAGE)

_DIM = 1  # only the 1D reduction is implemented
_F0_TARGET = _DIM + 1  # required normalisation F_0(0) = n + 1


@dataclass(frozen=True)
class KernelF:
    """Interaction-force kernel family ``(r, rho) -> F_r(rho)``.

    Families: ``constant`` (value pinned to 2 by the normalisation
    ``F_0(0) = n + 1``), ``exponential`` (``2 * exp(-r * rho)``) and
    ``tabulated`` (an r-independent table over ``rho``).
    """

    family: str
    value: float = 2.0
    rho_table: Optional[np.ndarray] = field(default=None, compare=False)
    f_table: Optional[np.ndarray] = field(default=None, compare=False)
    r0: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in ("constant", "exponential", "tabulated"):
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        if self.family == "tabulated":
            rho = np.asarray(self.rho_table, dtype=float)
            val = np.asarray(self.f_table, dtype=float)
            if rho.ndim != 1 or rho.shape != val.shape or rho.size < 2:
                raise ConfigurationError("tabulated kernel needs matching 1D tables")
            if rho[0] != 0.0 or np.any(np.diff(rho) <= 0):
                raise ConfigurationError("kernel table must start at 0 and increase")
            object.__setattr__(self, "rho_table", rho)
            object.__setattr__(self, "f_table", val)
            # cumulative integral used by the ball_average reduction
            cum = np.concatenate(([0.0], np.cumsum(0.5 * (val[1:] + val[:-1]) * np.diff(rho))))
            object.__setattr__(self, "_cumulative", cum)
        f00 = float(self.evaluate(0.0, np.zeros(1))[0])
        if abs(f00 - _F0_TARGET) > 1e-12:
            raise ConfigurationError(
                f"kernel violates normalisation F_0(0) = {_F0_TARGET}: got {f00!r}"
            )
        sample = np.linspace(0.0, self.r0, 33)
        for r in sample:
            if np.any(self.evaluate(r, sample) <= 0.0):
                raise ConfigurationError("kernel must be positive on [0, r0]^2")

    def evaluate(self, r: float, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.family == "constant":
            return np.full_like(rho, self.value)
        if self.family == "exponential":
            return _F0_TARGET * np.exp(-r * rho)
        return np.interp(rho, self.rho_table, self.f_table)

    def integral_to_range(self, r: float, a: np.ndarray) -> np.ndarray:
        """``integral_a^r F_r(u) du`` for ``0 <= a <= r`` (vectorised in ``a``)."""
        a = np.asarray(a, dtype=float)
        if self.family == "constant":
            return self.value * np.clip(r - a, 0.0, None)
        if self.family == "exponential":
            return (_F0_TARGET / r) * (np.exp(-r * a) - np.exp(-r * r))
        cum = getattr(self, "_cumulative")

        def _c(u):
            return np.interp(u, self.rho_table, cum)

        return _c(np.full_like(a, r)) - _c(a)


def constant_kernel(value: float = 2.0, r0: float = 1.0) -> KernelF:
    return KernelF("constant", value=value, r0=r0)


def exponential_kernel(r0: float = 1.0) -> KernelF:
    return KernelF("exponential", r0=r0)


def tabulated_kernel(rho: np.ndarray, values: np.ndarray, r0: float = 1.0) -> KernelF:
    return KernelF("tabulated", rho_table=rho, f_table=values, r0=r0)


def radius_offset(grid: Grid1D, r: float) -> int:
    """Cell offset of the point ``x_i + r`` under the tie-to-left rule."""
    pos = 0.5 + r / grid.h
    k = int(np.floor(pos))
    if k == pos:  # x_i + r lands exactly on a face
        k -= 1
    return max(k, 0)


@dataclass(frozen=True)
class DiscreteNonlocalOperator:
    """Banded stencil for one operator variant at fixed radius on one grid.

    ``profile[k + half_bandwidth]`` is the weight of cell ``i + k`` in row
    ``i``; rows near the boundary simply drop out-of-domain contributions
    (extension by zero).
    """

    kind: str
    grid: Grid1D
    radius: float
    kernel: Optional[KernelF]
    quad_points: int
    profile: np.ndarray = field(compare=False)

    @property
    def half_bandwidth(self) -> int:
        return (len(self.profile) - 1) // 2

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        k = self.half_bandwidth
        return np.convolve(np.pad(values, k), self.profile[::-1], mode="valid")

    def transpose_apply_values(self, values: np.ndarray) -> np.ndarray:
        k = self.half_bandwidth
        return np.convolve(np.pad(values, k), self.profile, mode="valid")

    def row(self, i: int) -> np.ndarray:
        """Row ``i`` of the dense matrix realisation (for diagnostics/tests)."""
        k = self.half_bandwidth
        out = np.zeros(self.grid.n_cells)
        lo = max(i - k, 0)
        hi = min(i + k, self.grid.n_cells - 1)
        out[lo : hi + 1] = self.profile[lo - i + k : hi - i + k + 1]
        return out


def _reduced_kernel(kind: str, kernel: Optional[KernelF], r: float, xi: np.ndarray) -> np.ndarray:
    """The collapsed 1D kernel K(xi) of a convolution-type variant."""
    if kind == ADHESION_VELOCITY:
        return np.sign(xi) * kernel.evaluate(r, np.abs(xi)) / (2.0 * r * r)
    if kind == BALL_AVERAGE:
        return kernel.integral_to_range(r, np.abs(xi)) / (2.0 * r * r)
    if kind == WINDOW_AVERAGE:
        return np.full_like(xi, 1.0 / (2.0 * r))
    raise ConfigurationError(f"{kind!r} has no integrable reduced kernel")


def _panel_weights(kind, kernel, r, h, quad_points, offsets):
    """Composite-midpoint integral of the reduced kernel over each offset cell."""
    m = quad_points
    edges = offsets[:, None] * h - 0.5 * h + np.arange(m + 1)[None, :] * (h / m)
    lo = np.clip(edges[:, :-1], -r, r)
    hi = np.clip(edges[:, 1:], -r, r)
    width = np.clip(hi - lo, 0.0, None)
    mid = 0.5 * (lo + hi)
    contrib = np.where(width > 0.0, width * _reduced_kernel(kind, kernel, r, mid), 0.0)
    return contrib.sum(axis=1)


def build_operator(
    kind: str,
    grid: Grid1D,
    r: float,
    kernel: Optional[KernelF] = None,
    quad_points: int = 8,
) -> DiscreteNonlocalOperator:
    """Precompute the banded weights of one nonlocal operator.

    The offset profile is built for ``k >= 0`` and mirrored with the parity of
    the variant, so odd variants are antisymmetric to the last bit.
    """
    if not np.isfinite(r) or r <= 0.0:
        raise ConfigurationError(f"sensing radius must be positive, got {r}")
    if kind not in OPERATOR_KINDS:
        raise ConfigurationError(f"unknown operator kind {kind!r}")
    if quad_points < 4:
        raise ConfigurationError(f"need at least 4 quadrature sub-points, got {quad_points}")
    if kind in KERNEL_KINDS:
        if kernel is None:
            raise ConfigurationError(f"{kind} requires an interaction kernel")
    else:
        kernel = None
    h = grid.h
    if r < 2.0 * h or r > 0.5 * grid.length:
        warnings.warn(
            f"radius r={r} outside the recommended range [2h, L/2] = "
            f"[{2 * h}, {0.5 * grid.length}]",
            stacklevel=2,
        )

    if kind == NONLOCAL_GRADIENT:
        k_r = radius_offset(grid, r)
        profile = np.zeros(2 * k_r + 1)
        profile[2 * k_r] = 1.0 / (2.0 * r)
        profile[0] = -1.0 / (2.0 * r)
    else:
        k_max = int(np.floor(r / h + 0.5))
        pos = _panel_weights(kind, kernel, r, h, quad_points, np.arange(k_max + 1))
        profile = np.empty(2 * k_max + 1)
        profile[k_max:] = pos
        if kind in ODD_KINDS:
            profile[k_max] = 0.0
            profile[:k_max] = -pos[:0:-1]
        else:
            profile[:k_max] = pos[:0:-1]
    return DiscreteNonlocalOperator(kind, grid, float(r), kernel, int(quad_points), profile)


def apply(op: DiscreteNonlocalOperator, f: ScalarField) -> ScalarField:
    """Apply the precomputed stencil to a field on the same grid."""
    if f.grid != op.grid:
        raise GridMismatchError("field and operator live on different grids")
    return ScalarField(f.grid, op.apply_values(f.values))


def dense_apply(
    kind: str,
    grid: Grid1D,
    r: float,
    kernel: Optional[KernelF],
    f: ScalarField,
    m_fine: int = 64,
) -> ScalarField:
    """Row-by-row quadrature evaluation without precomputed stencils.

    Slow-path oracle for the stencil assembly: the same sub-cell midpoint rule
    is summed independently for every output cell, dropping out-of-domain
    contributions explicitly. Test use only.
    """
    if m_fine < 64:
        raise ConfigurationError(f"dense quadrature needs m_fine >= 64, got {m_fine}")
    if f.grid != grid:
        raise GridMismatchError("field and operator live on different grids")
    n = grid.n_cells
    vals = f.values
    out = np.zeros(n)
    if kind == NONLOCAL_GRADIENT:
        k_r = radius_offset(grid, r)
        for i in range(n):
            up = vals[i + k_r] if i + k_r < n else 0.0
            dn = vals[i - k_r] if i - k_r >= 0 else 0.0
            out[i] = (up - dn) / (2.0 * r)
        return ScalarField(grid, out)
    if kind in KERNEL_KINDS and kernel is None:
        raise ConfigurationError(f"{kind} requires an interaction kernel")
    h = grid.h
    k_max = int(np.floor(r / h + 0.5))
    offsets = np.arange(-k_max, k_max + 1)
    m = m_fine
    edges = offsets[:, None] * h - 0.5 * h + np.arange(m + 1)[None, :] * (h / m)
    lo = np.clip(edges[:, :-1], -r, r)
    hi = np.clip(edges[:, 1:], -r, r)
    width = np.clip(hi - lo, 0.0, None)
    mid = 0.5 * (lo + hi)
    kern = np.where(width > 0.0, width * _reduced_kernel(kind, kernel, r, mid), 0.0)
    for i in range(n):
        cells = i + offsets
        inside = (cells >= 0) & (cells < n)
        cell_vals = np.where(inside, vals[np.clip(cells, 0, n - 1)], 0.0)
        out[i] = float((kern * cell_vals[:, None]).sum())
    return ScalarField(grid, out)


@dataclass(frozen=True)
class Regularizer:
    """Pointwise flux regulariser ``x -> x / (1 + eps |x|)``, 1-Lipschitz."""

    epsilon: float = 0.0

    def __post_init__(self) -> None:
        if self.epsilon < 0.0:
            raise ConfigurationError(f"epsilon must be nonnegative, got {self.epsilon}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.epsilon == 0.0:
            return np.asarray(x, dtype=float)
        return x / (1.0 + self.epsilon * np.abs(x))


def apply_regularizer(g: Regularizer, w: ScalarField) -> ScalarField:
    return ScalarField(w.grid, g(w.values))


def gradient_values(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order cellwise derivative: central inside, one-sided at the ends."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return out


def gradient_field(u: ScalarField) -> ScalarField:
    return ScalarField(u.grid, gradient_values(u.values, u.grid.h))


def operator_norm(
    op: DiscreteNonlocalOperator,
    n_iter: int = 200,
    tol: float = 1e-10,
    seed: int = 0,
) -> float:
    """Largest singular value of the stencil matrix by power iteration on AtA."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.grid.n_cells)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(n_iter):
        w = op.apply_values(v)
        sigma_new = np.linalg.norm(w)
        z = op.transpose_apply_values(w)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        v = z / nz
        if sigma > 0.0 and abs(sigma_new - sigma) <= tol * sigma:
            return float(sigma_new)
        sigma = sigma_new
    return float(sigma)


def norm_bound_c2(kernel: KernelF, r: float, p: float = 2.0, n_quad: int = 256) -> float:
    """Lp operator-norm bound of the ball_average variant in 1D.

    ``C2(r, p) = (integral_0^1 rho^{p*} F_r(r rho)^{p*} drho)^{1/p*}`` for
    ``p > 1`` (conjugate exponent ``p*``), and ``max_rho rho F_r(r rho)`` at
    ``p = 1``.
    """
    if p == 1.0:
        rho = np.linspace(0.0, 1.0, 4097)
        return float(np.max(rho * kernel.evaluate(r, r * rho)))
    if not 1.0 < p < np.inf:
        raise ConfigurationError(f"p must be in [1, inf), got {p}")
    p_star = p / (p - 1.0)
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    rho = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    integrand = rho**p_star * kernel.evaluate(r, r * rho) ** p_star
    return float(np.sum(w * integrand) ** (1.0 / p_star))
