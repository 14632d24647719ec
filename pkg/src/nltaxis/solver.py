"""Conservative finite-volume method-of-lines solver for the 1D taxis systems.

Cell equation (zero total flux through both boundary faces)::

    dc_i/dt = -(F_{i+1/2} - F_{i-1/2}) / h + f_c(c_i, v_i)
    dv_i/dt = D_v * Lap(v)_i + f_v(c_i, v_i)

with ``F = -D_face * dc/dx + u_face * c_face``. The advective face value uses
a third-order upwind-biased (kappa = 1/3) reconstruction limited by a
monotonized-central-type limiter so reconstructed states stay within the
neighbouring cell range (positivity). The face drift ``u`` depends on the
formulation:

* ``nonlocal_adhesion``: cellwise adhesion velocity of ``g(c, v)``, averaged
  to faces, times face-averaged ``chi``;
* ``nonlocal_ball`` / ``nonlocal_window``: the respective averaging operator
  applied to the cellwise gradient of ``g``, likewise interpolated;
* ``local``: the classical limit form. The equation is assembled with the
  effective coefficients, ``F = -D_eff * dc/dx + chi_eff * dv/dx * c``, so a
  sign change of ``D_eff`` manifests as genuine backward diffusion; runs into
  that regime abort with an ill-posed status instead of producing numbers.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, SnapshotError
from .grid import Grid1D
from .models import CoefficientSet, EffectiveLocalCoefficients, effective_coeffs
from .operators import (
    ADHESION_VELOCITY,
    BALL_AVERAGE,
    WINDOW_AVERAGE,
    DiscreteNonlocalOperator,
    Regularizer,
    build_operator,
    gradient_values,
)
from .timestepping import IntegratorCheckpoint, integrate_adaptive

NONLOCAL_ADHESION = "nonlocal_adhesion"
NONLOCAL_BALL = "nonlocal_ball"
NONLOCAL_WINDOW = "nonlocal_window"
LOCAL = "local"
FORMULATION_KINDS = (NONLOCAL_ADHESION, NONLOCAL_BALL, NONLOCAL_WINDOW, LOCAL)

_OPERATOR_OF = {
    NONLOCAL_ADHESION: ADHESION_VELOCITY,
    NONLOCAL_BALL: BALL_AVERAGE,
    NONLOCAL_WINDOW: WINDOW_AVERAGE,
}

#: cellwise positivity tolerance enforced on accepted states
POSITIVITY_FLOOR = -1e-12

SNAPSHOT_FORMAT = "nltaxis-snapshot"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Formulation:
    """Which drift closure the solver runs: one nonlocal variant or the local limit."""

    kind: str
    radius: Optional[float] = None
    epsilon: float = 0.0
    quad_points: int = 8

    def __post_init__(self) -> None:
        if self.kind not in FORMULATION_KINDS:
            raise ConfigurationError(
                f"unknown formulation {self.kind!r}; expected one of {FORMULATION_KINDS}"
            )
        if self.kind == LOCAL:
            if self.radius is not None:
                raise ConfigurationError("the local formulation takes no sensing radius")
        else:
            if self.radius is None or self.radius <= 0.0:
                raise ConfigurationError(f"{self.kind} needs a sensing radius r > 0")
        if self.epsilon < 0.0:
            raise ConfigurationError("epsilon must be nonnegative")


@dataclass
class SolverConfig:
    grid: Grid1D
    coefficients: CoefficientSet
    formulation: Formulation
    t_end: float
    c0: np.ndarray
    v0: np.ndarray
    rtol: float = 1e-6
    atol: float = 1e-6
    max_step: float = np.inf
    sample_times: Sequence[float] = ()

    def __post_init__(self) -> None:
        if self.t_end <= 0.0:
            raise ConfigurationError("t_end must be positive")
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ConfigurationError("tolerances must be positive")
        self.c0 = np.asarray(self.c0, dtype=float)
        self.v0 = np.asarray(self.v0, dtype=float)
        n = self.grid.n_cells
        if self.c0.shape != (n,) or self.v0.shape != (n,):
            raise ConfigurationError("initial fields must have one value per cell")
        if self.c0.min() < 0.0 or self.v0.min() < 0.0:
            raise ConfigurationError("initial fields must be nonnegative")
        if not self.sample_times:
            self.sample_times = (self.t_end,)
        self.sample_times = tuple(float(t) for t in self.sample_times)
        if any(t <= 0.0 or t > self.t_end for t in self.sample_times):
            raise ConfigurationError("sample times must lie in (0, t_end]")


@dataclass
class SimState:
    """Solver state plus the controller continuation needed for exact resume."""

    t: float
    c: np.ndarray
    v: np.ndarray
    n_accepted: int = 0
    n_rejected: int = 0
    last_dt: float = np.nan
    controller_error: float = np.nan


@dataclass
class RunResult:
    status: str
    times: np.ndarray
    c: np.ndarray
    v: np.ndarray
    diagnostics: dict
    t_final: float
    final_state: SimState
    stats: dict
    message: str


def initial_conditions(
    grid: Grid1D, alpha: float, x_c: float, v_const: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian cell seed ``exp(-alpha (x - x_c)^2)`` over a uniform matrix."""
    if alpha <= 0.0:
        raise ConfigurationError("alpha must be positive")
    c0 = np.exp(-alpha * (grid.centers - x_c) ** 2)
    v0 = np.full(grid.n_cells, float(v_const))
    return c0, v0


def _limited_increment(d_up: np.ndarray, d_dn: np.ndarray) -> np.ndarray:
    """Limited face increment of the kappa = 1/3 upwind-biased reconstruction.

    Equals ``d_dn/3 + d_up/6`` where the data are smooth and monotone, and is
    clipped into the TVD region ``[0, min(2 d_up, 2 d_dn)]`` (signed), so the
    reconstructed state never leaves the hull of the neighbouring cells.
    """
    s = np.sign(d_dn)
    unlim = (2.0 * d_dn + d_up) * s / 3.0
    capped = np.minimum(np.minimum(2.0 * d_up * s, unlim), 2.0 * np.abs(d_dn))
    return s * np.maximum(0.0, capped)


def _face_states(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Limited left/right states at the interior faces (ghost cells mirrored)."""
    d = np.diff(c)
    d_up_left = np.concatenate(([0.0], d[:-1]))
    c_left = c[:-1] + 0.5 * _limited_increment(d_up_left, d)
    d_up_right = -np.concatenate((d[1:], [0.0]))
    c_right = c[1:] + 0.5 * _limited_increment(d_up_right, -d)
    return c_left, c_right


def _to_faces(cellwise: np.ndarray) -> np.ndarray:
    return 0.5 * (cellwise[:-1] + cellwise[1:])


@dataclass
class _Problem:
    grid: Grid1D
    coeffs: CoefficientSet
    formulation: Formulation
    operator: Optional[DiscreteNonlocalOperator]
    effective: Optional[EffectiveLocalCoefficients]
    regularizer: Regularizer

    def face_velocity(self, c: np.ndarray, v: np.ndarray) -> np.ndarray:
        h = self.grid.h
        kind = self.formulation.kind
        if kind == LOCAL:
            dvdx = np.diff(v) / h
            dvdx = self.regularizer(dvdx)
            return _to_faces(self.effective.chi_eff(c, v)) * dvdx
        gvals = self.coeffs.g(c, v)
        if kind == NONLOCAL_ADHESION:
            w = self.operator.apply_values(gvals)
        else:
            w = self.operator.apply_values(gradient_values(gvals, h))
        w = self.regularizer(w)
        return _to_faces(self.coeffs.chi(c, v)) * _to_faces(w)

    def rhs_split(self, c: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = self.grid.h
        if self.formulation.kind == LOCAL:
            d_face = _to_faces(self.effective.d_eff(c, v))
        else:
            d_face = _to_faces(self.coeffs.d_c(c, v))
        u_face = self.face_velocity(c, v)
        c_left, c_right = _face_states(c)
        adv = np.maximum(u_face, 0.0) * c_left + np.minimum(u_face, 0.0) * c_right
        flux = adv - d_face * np.diff(c) / h
        dcdt = np.empty_like(c)
        dcdt[0] = -flux[0] / h
        dcdt[1:-1] = -np.diff(flux) / h
        dcdt[-1] = flux[-1] / h
        dcdt += self.coeffs.f_c(c, v)
        dvdt = self.coeffs.f_v(c, v)
        if self.coeffs.d_v > 0.0:
            lap = np.empty_like(v)
            lap[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / (h * h)
            lap[0] = (v[1] - v[0]) / (h * h)
            lap[-1] = (v[-2] - v[-1]) / (h * h)
            dvdt = dvdt + self.coeffs.d_v * lap
        return dcdt, dvdt

    def rhs_flat(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.grid.n_cells
        dcdt, dvdt = self.rhs_split(y[:n], y[n:])
        return np.concatenate((dcdt, dvdt))


def prepare_problem(
    grid: Grid1D, coeffs: CoefficientSet, formulation: Formulation
) -> _Problem:
    """Build the per-run context: the operator stencil and effective coefficients."""
    operator = None
    effective = None
    if formulation.kind == LOCAL:
        effective = effective_coeffs(coeffs)
    else:
        operator = build_operator(
            _OPERATOR_OF[formulation.kind],
            grid,
            formulation.radius,
            kernel=coeffs.kernel,
            quad_points=formulation.quad_points,
        )
    return _Problem(grid, coeffs, formulation, operator, effective, Regularizer(formulation.epsilon))


def drift_velocity(
    grid: Grid1D,
    coeffs: CoefficientSet,
    formulation: Formulation,
    c: np.ndarray,
    v: np.ndarray,
) -> np.ndarray:
    """Advective velocity at the interior faces for the given state."""
    return prepare_problem(grid, coeffs, formulation).face_velocity(
        np.asarray(c, dtype=float), np.asarray(v, dtype=float)
    )


def rhs(state: SimState, config: "SolverConfig") -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of both fields at the given state (non-hot-path wrapper)."""
    problem = prepare_problem(config.grid, config.coefficients, config.formulation)
    return problem.rhs_split(np.asarray(state.c, dtype=float), np.asarray(state.v, dtype=float))


def _positivity_veto(y_new: np.ndarray, y_old: np.ndarray) -> bool:
    m = y_new.min()
    return m < POSITIVITY_FLOOR and m < y_old.min()


def integrate(config: SolverConfig, resume_from: Optional[SimState] = None) -> RunResult:
    """Run one simulation, sampling the state at the configured times.

    Returns a completed result, or a partial one with status
    ``ill-posed-abort`` (nonfinite right-hand side or step-size underflow,
    the expected outcome of the local formulation once its effective
    diffusion turns negative) carrying the last finite state.
    """
    problem = prepare_problem(config.grid, config.coefficients, config.formulation)
    if resume_from is None:
        t0 = 0.0
        y0 = np.concatenate((config.c0, config.v0))
        start = None
    else:
        t0 = resume_from.t
        y0 = np.concatenate((resume_from.c, resume_from.v))
        start = IntegratorCheckpoint(
            t=resume_from.t,
            y=y0,
            next_h=resume_from.last_dt,
            err_prev=resume_from.controller_error,
        )
    sample_times = [t for t in config.sample_times if t > t0]
    res = integrate_adaptive(
        problem.rhs_flat,
        t0,
        y0,
        config.t_end,
        rtol=config.rtol,
        atol=config.atol,
        max_step=config.max_step,
        sample_times=sample_times,
        reject_state=_positivity_veto,
        start=start,
    )
    n = config.grid.n_cells
    c_samples = res.samples[:, :n] if res.samples.size else np.empty((0, n))
    v_samples = res.samples[:, n:] if res.samples.size else np.empty((0, n))
    h = config.grid.h
    diagnostics = {
        "mass_c": h * c_samples.sum(axis=1),
        "min_c": c_samples.min(axis=1) if len(c_samples) else np.empty(0),
        "max_c": c_samples.max(axis=1) if len(c_samples) else np.empty(0),
        "mass_v": h * v_samples.sum(axis=1),
    }
    final_state = SimState(
        t=res.t_final,
        c=res.y_final[:n].copy(),
        v=res.y_final[n:].copy(),
        n_accepted=res.n_accepted,
        n_rejected=res.n_rejected,
        last_dt=res.checkpoint.next_h if res.checkpoint is not None else res.last_dt,
        controller_error=res.checkpoint.err_prev if res.checkpoint is not None else np.nan,
    )
    stats = {
        "n_accepted": res.n_accepted,
        "n_rejected": res.n_rejected,
        "n_rhs": res.n_rhs,
        "last_dt": res.last_dt,
    }
    return RunResult(
        status=res.status,
        times=res.sample_times,
        c=c_samples,
        v=v_samples,
        diagnostics=diagnostics,
        t_final=res.t_final,
        final_state=final_state,
        stats=stats,
        message=res.message,
    )


# ---------------------------------------------------------------------------
# state snapshots
# ---------------------------------------------------------------------------


def _encode_array(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _decode_array(s: str, n: int) -> np.ndarray:
    raw = base64.b64decode(s.encode("ascii"))
    if len(raw) != 8 * n:
        raise SnapshotError("field payload has the wrong length")
    return np.frombuffer(raw, dtype="<f8").astype(float)


def save_state(state: SimState, grid: Grid1D) -> bytes:
    """Serialize a state snapshot; the round trip is bit exact."""
    doc = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "grid": {"length": float(grid.length).hex(), "n_cells": grid.n_cells},
        "time": float(state.t).hex(),
        "c": _encode_array(state.c),
        "v": _encode_array(state.v),
        "n_accepted": state.n_accepted,
        "n_rejected": state.n_rejected,
        "last_dt": float(state.last_dt).hex(),
        "controller_error": float(state.controller_error).hex(),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("ascii")


def restore_state(data: bytes) -> tuple[SimState, Grid1D]:
    try:
        doc = json.loads(data.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"snapshot is not decodable: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError("not a state snapshot")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {doc.get('version')!r}")
    try:
        grid = Grid1D(float.fromhex(doc["grid"]["length"]), int(doc["grid"]["n_cells"]))
        n = grid.n_cells
        state = SimState(
            t=float.fromhex(doc["time"]),
            c=_decode_array(doc["c"], n),
            v=_decode_array(doc["v"], n),
            n_accepted=int(doc["n_accepted"]),
            n_rejected=int(doc["n_rejected"]),
            last_dt=float.fromhex(doc["last_dt"]),
            controller_error=float.fromhex(doc["controller_error"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise SnapshotError(f"snapshot is truncated or corrupt: {exc}") from exc
    return state, grid
