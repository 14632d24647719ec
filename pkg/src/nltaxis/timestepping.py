"""Adaptive Dormand-Prince 5(4) integration with structured failure handling.

The stepper lands exactly on every requested sample time (so checkpointed
runs can be resumed bit-for-bit), uses a PI step-size controller, and carries
the quartic dense-output interpolant of the 5(4) pair. Nonfinite right-hand
sides and vetoed states (e.g. loss of positivity) are handled as step
rejections; if the step size collapses below ``1e-12`` times the horizon the
run is aborted with an ill-posed status and the last finite state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# quartic continuous extension (Shampine); y(t + theta h) = y + h K^T P [theta, .., theta^4]
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0

COMPLETED = "completed"
ILL_POSED = "ill-posed-abort"
TOLERANCE_FAILURE = "tolerance-failure"


@dataclass(frozen=True)
class IntegratorCheckpoint:
    """Continuation state: resuming from it reproduces the step sequence exactly."""

    t: float
    y: np.ndarray
    next_h: float
    err_prev: float


@dataclass
class IntegrationResult:
    status: str
    t_final: float
    y_final: np.ndarray
    sample_times: np.ndarray
    samples: np.ndarray
    n_accepted: int
    n_rejected: int
    n_rhs: int
    last_dt: float
    message: str
    checkpoint: Optional[IntegratorCheckpoint]


def dense_eval(y_old: np.ndarray, h: float, stages: np.ndarray, theta) -> np.ndarray:
    """Evaluate the continuous extension at fraction ``theta`` of the step."""
    theta = np.asarray(theta, dtype=float)
    powers = np.vander(np.atleast_1d(theta), 5, increasing=True)[:, 1:]  # theta..theta^4
    out = y_old[None, :] + h * (powers @ _P.T @ stages)
    return out[0] if np.ndim(theta) == 0 else out


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(fun, t0, y0, f0, t_end, rtol, atol, max_step):
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, abs(t_end - t0))
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0 if np.isfinite(f1).all() else np.inf
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, max_step, abs(t_end - t0))


def integrate_adaptive(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    t_end: float,
    rtol: float = 1e-6,
    atol: float = 1e-6,
    max_step: float = np.inf,
    sample_times: Sequence[float] = (),
    reject_state: Optional[Callable[[np.ndarray, np.ndarray], bool]] = None,
    start: Optional[IntegratorCheckpoint] = None,
    max_rejects: int = 200,
) -> IntegrationResult:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end`` adaptively.

    ``sample_times`` (within ``(t0, t_end]``) become hard step boundaries and
    are reported in the result together with the states reached there.
    ``reject_state(y_new, y_old)`` may veto a step (treated as an error-
    control rejection). Passing ``start`` resumes a checkpointed run.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    span = t_end - t0
    if span <= 0.0:
        raise ValueError("t_end must exceed t0")
    dt_floor = 1e-12 * span
    wanted = np.asarray(sorted(sample_times), dtype=float)
    if wanted.size and (wanted[0] < t0 or wanted[-1] > t_end):
        raise ValueError("sample times must lie within [t0, t_end]")
    boundaries = np.unique(np.concatenate([wanted[wanted > t0], [t_end]]))

    n_rhs = 0

    def call(tt, yy):
        nonlocal n_rhs
        n_rhs += 1
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return np.asarray(fun(tt, yy), dtype=float)

    reached: list[float] = []
    states: list[np.ndarray] = []
    for ts in wanted[wanted <= t0]:
        reached.append(float(ts))
        states.append(y.copy())

    k1 = call(t, y)
    err_prev = 1e-4
    if start is not None:
        h = float(start.next_h)
        err_prev = float(start.err_prev)
    else:
        h = _initial_step(call, t, y, k1, t_end, rtol, atol, max_step)
    h = max(min(h, max_step), dt_floor)

    n_accepted = 0
    n_rejected = 0
    rejects_in_row = 0
    saw_nonfinite = False
    stages = np.empty((7, y.size))
    status = COMPLETED
    message = "reached end time"
    boundary_idx = 0

    def result(checkpoint):
        return IntegrationResult(
            status=status,
            t_final=t,
            y_final=y,
            sample_times=np.array(reached),
            samples=np.array(states) if states else np.empty((0, y.size)),
            n_accepted=n_accepted,
            n_rejected=n_rejected,
            n_rhs=n_rhs,
            last_dt=h,
            message=message,
            checkpoint=checkpoint,
        )

    while t < t_end:
        while boundaries[boundary_idx] <= t:
            boundary_idx += 1
        target = boundaries[boundary_idx]
        h_step = min(h, max_step, target - t)
        hit_boundary = h_step >= target - t
        if hit_boundary:
            h_step = target - t

        stages[0] = k1
        for s in range(1, 7):
            if s < 6:
                y_stage = y + h_step * (stages[:s].T @ _A[s])
                stages[s] = call(t + _C[s] * h_step, y_stage)
            else:
                y_new = y + h_step * (stages[:6].T @ _A[6])
                stages[6] = call(t + h_step, y_new)
        err_vec = h_step * (stages.T @ _E)

        finite = np.isfinite(y_new).all() and np.isfinite(err_vec).all()
        if not finite:
            saw_nonfinite = True
            n_rejected += 1
            rejects_in_row += 1
            h = 0.3 * h_step
            if h < dt_floor:
                status = ILL_POSED
                message = f"nonfinite right-hand side near t = {t + h_step:.6g}"
                return result(None)
            continue

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(err_vec / scale)
        vetoed = err_norm <= 1.0 and reject_state is not None and reject_state(y_new, y)

        if err_norm > 1.0 or vetoed:
            n_rejected += 1
            rejects_in_row += 1
            if vetoed:
                factor = 0.5
            else:
                factor = max(_MIN_FACTOR, _SAFETY * err_norm**-0.2)
            h = factor * h_step
            if h < dt_floor:
                status = ILL_POSED
                message = (
                    "step size underflow from "
                    + ("state veto (positivity)" if vetoed else "error control")
                    + (" after nonfinite values" if saw_nonfinite else "")
                    + f" at t = {t:.6g}"
                )
                return result(None)
            if rejects_in_row > max_rejects:
                status = TOLERANCE_FAILURE
                message = f"exceeded {max_rejects} consecutive rejections at t = {t:.6g}"
                return result(None)
            continue

        # accepted
        n_accepted += 1
        rejects_in_row = 0
        t_new = target if hit_boundary else t + h_step
        while wanted.size and len(reached) < wanted.size and wanted[len(reached)] <= t_new:
            ts = wanted[len(reached)]
            if ts == t_new:
                states.append(y_new.copy())
            else:
                states.append(dense_eval(y, h_step, stages, (ts - t) / h_step))
            reached.append(float(ts))
        t, y = t_new, y_new
        k1 = stages[6].copy()  # FSAL; copy since the buffer is reused by rejected trials

        if err_norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = _SAFETY * err_norm**-_PI_ALPHA * err_prev**_PI_BETA
        factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        err_prev = max(err_norm, 1e-10)
        h = max(h_step * factor, dt_floor)

    checkpoint = IntegratorCheckpoint(t=t, y=y.copy(), next_h=h, err_prev=err_prev)
    return result(checkpoint)
