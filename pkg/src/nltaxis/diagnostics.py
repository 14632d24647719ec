"""Operator property suite backing the ``opcheck`` command.

Every check measures a residual against a closed form or an a-priori bound
and reports it next to its threshold, so a failing table row localises the
defect without rerunning anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import fourier_symbol
from .errors import ConfigurationError
from .grid import interior_mask, make_grid, ScalarField
from .operators import (
    ADHESION_VELOCITY,
    BALL_AVERAGE,
    NONLOCAL_GRADIENT,
    WINDOW_AVERAGE,
    KernelF,
    apply,
    build_operator,
    constant_kernel,
    exponential_kernel,
    gradient_field,
    norm_bound_c2,
    operator_norm,
)

NORM_RADII = (0.4, 0.2, 0.1, 0.05)
SYMBOL_RADII = (1.0, 0.5, 0.1)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: str
    threshold: str
    detail: str = ""


def _masked_max(values: np.ndarray, flags: np.ndarray) -> float:
    return float(np.abs(values[flags]).max())


def check_identity_adhesion(length: float, n_cells: int, r: float = 0.5) -> CheckResult:
    """Adhesion velocity of u versus ball average of its gradient, and its h^2 decay."""
    kernel = constant_kernel()

    def discrepancy(n: int) -> float:
        grid = make_grid(length, n)
        u = ScalarField(grid, np.sin(grid.centers))
        op_a = build_operator(ADHESION_VELOCITY, grid, r, kernel=kernel)
        op_t = build_operator(BALL_AVERAGE, grid, r, kernel=kernel)
        lhs = apply(op_a, u).values
        rhs = op_t.apply_values(gradient_field(u).values)
        return _masked_max(lhs - rhs, interior_mask(grid, r).flags)

    coarse = discrepancy(n_cells)
    fine = discrepancy(2 * n_cells)
    ratio = coarse / fine if fine > 0 else np.inf
    # 1e-4 is the contract at h = 0.01; the residual scales with h^2
    tol = 1e-4 * (length / n_cells / 0.01) ** 2
    passed = coarse <= tol and ratio >= 3.0
    return CheckResult(
        "identity adhesion-velocity vs ball-average(grad)",
        passed,
        f"max {coarse:.3e}, refine x{ratio:.2f}",
        f"<= {tol:.0e}, ratio >= 3",
    )


def check_identity_gradient(length: float, n_cells: int) -> CheckResult:
    """Nonlocal gradient versus window average of the gradient on quadratics."""
    grid = make_grid(length, n_cells)
    r = 50 * grid.h  # integer multiple of h so both reductions coincide
    x = grid.centers
    u = ScalarField(grid, 0.3 * x * x - 1.7 * x + 0.5)
    exact = 0.6 * x - 1.7
    op_g = build_operator(NONLOCAL_GRADIENT, grid, r)
    op_s = build_operator(WINDOW_AVERAGE, grid, r)
    flags = interior_mask(grid, r).flags
    lhs = apply(op_g, u).values
    rhs = op_s.apply_values(gradient_field(u).values)
    dev_pair = _masked_max(lhs - rhs, flags)
    dev_exact = _masked_max(lhs - exact, flags)
    passed = dev_pair <= 1e-10 and dev_exact <= 1e-10
    return CheckResult(
        "identity nonlocal-gradient vs window-average(grad)",
        passed,
        f"pair {dev_pair:.3e}, derivative {dev_exact:.3e}",
        "<= 1e-10 both",
    )


def check_boundary_closed_form() -> CheckResult:
    """Adhesion velocity of the constant field on a short domain: exact layer values.

    On ``[0, 2]`` with unit data, constant force 2 and radius r the output is
    ``(r - x)/r^2`` in the left layer, ``-(2 - r - x)/r^2`` in the right one
    and zero between, with unit L1 norm independent of r.
    """
    grid = make_grid(2.0, 200)
    r = 0.5  # 50 cells: integer multiple of h
    x = grid.centers
    u = ScalarField(grid, np.ones(grid.n_cells))
    op = build_operator(ADHESION_VELOCITY, grid, r, kernel=constant_kernel())
    out = apply(op, u).values
    closed = np.zeros_like(x)
    left = x <= r
    right = x >= 2.0 - r
    closed[left] = (r - x[left]) / r**2
    closed[right] = (2.0 - r - x[right]) / r**2  # negative: pull away from the far wall
    dev = float(np.abs(out - closed).max())
    l1 = float(grid.h * np.abs(out).sum())
    op_t = build_operator(BALL_AVERAGE, grid, r, kernel=constant_kernel())
    flat = float(np.abs(op_t.apply_values(gradient_field(u).values)).max())
    passed = dev <= 1e-8 and abs(l1 - 1.0) <= 1e-8 and flat <= 1e-13
    return CheckResult(
        "boundary layer closed form (constant data)",
        passed,
        f"pointwise {dev:.3e}, |L1-1| {abs(l1 - 1.0):.3e}, ball {flat:.3e}",
        "<= 1e-08, <= 1e-08, <= 1e-13",
    )


def check_adjointness(length: float, n_cells: int, r: float = 0.3, pairs: int = 100) -> CheckResult:
    grid = make_grid(length, n_cells)
    rng = np.random.default_rng(1234)
    worst = 0.0
    for kind, kernel in ((BALL_AVERAGE, constant_kernel()), (WINDOW_AVERAGE, None)):
        op = build_operator(kind, grid, r, kernel=kernel)
        for _ in range(pairs):
            w1 = rng.standard_normal(n_cells)
            w2 = rng.standard_normal(n_cells)
            lhs = float(np.dot(op.apply_values(w1), w2))
            rhs = float(np.dot(w1, op.apply_values(w2)))
            worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(w1) * np.linalg.norm(w2)))
    return CheckResult(
        "self-adjointness of averaging operators",
        worst <= 1e-10,
        f"max residual {worst:.3e}",
        "<= 1e-10",
    )


def check_norms(length: float, n_cells: int) -> CheckResult:
    grid = make_grid(length, n_cells)
    kernel = constant_kernel()
    s_norms = []
    t_norms = []
    ok = True
    details = []
    for r in NORM_RADII:
        ns = operator_norm(build_operator(WINDOW_AVERAGE, grid, r))
        nt = operator_norm(build_operator(BALL_AVERAGE, grid, r, kernel=kernel))
        c2 = norm_bound_c2(kernel, r, p=2.0)
        s_norms.append(ns)
        t_norms.append(nt)
        ok &= ns <= 1.0 + 1e-6 and nt <= c2 + 1e-6
        details.append(f"r={r}: S {ns:.6f}, T {nt:.6f} (C2 {c2:.6f})")
    ok &= abs(s_norms[-1] - 1.0) <= 0.05 and abs(t_norms[-1] - 1.0) <= 0.05
    for seq in (s_norms, t_norms):
        ok &= all(seq[i + 1] >= seq[i] - 1e-3 for i in range(len(seq) - 1))
    return CheckResult(
        "operator norms: bounds and r->0 trend",
        bool(ok),
        "; ".join(details),
        "S <= 1+1e-6, T <= C2+1e-6, within 0.05 of 1 at r=0.05, nondecreasing as r drops",
    )


def check_identity_limit(length: float, n_cells: int) -> CheckResult:
    grid = make_grid(length, n_cells)
    x = grid.centers
    w = np.exp(-((x - 0.5 * length) ** 2) / 8.0) * (1.0 + 0.3 * np.sin(2.0 * x))
    errs = []
    for r in NORM_RADII:
        op = build_operator(BALL_AVERAGE, grid, r, kernel=constant_kernel())
        errs.append(float(grid.h * np.abs(op.apply_values(w) - w).sum()))
    ok = all(errs[i + 1] <= errs[i] * (1.0 + 1e-12) for i in range(len(errs) - 1))
    return CheckResult(
        "ball average approaches the identity as r -> 0",
        ok,
        " >= ".join(f"{e:.3e}" for e in errs),
        "L1 error nonincreasing over r = " + str(NORM_RADII),
    )


def check_symbol() -> CheckResult:
    ok = True
    details = []
    for kernel, label in ((constant_kernel(), "constant"), (exponential_kernel(), "exponential")):
        gaps = []
        for r in SYMBOL_RADII:
            prof = fourier_symbol(kernel, r, xi_max=100.0, n_xi=501)
            ok &= prof.sup_modulus <= prof.modulus_bound + 1e-9
            if label == "constant":
                ok &= abs(prof.values[0].real - 1.0) <= 1e-10
                ok &= prof.sup_modulus <= 1.0 + 1e-9
            gaps.append(abs(prof.sup_modulus - 1.0))
        ok &= all(gaps[i + 1] <= gaps[i] + 1e-12 for i in range(len(gaps) - 1))
        details.append(f"{label}: |sup-1| = " + ", ".join(f"{g:.2e}" for g in gaps))
    return CheckResult(
        "Fourier symbol: normalisation, bound, r->0 trend",
        bool(ok),
        "; ".join(details),
        "sup <= bound+1e-9 (and <= 1+1e-9 for constant force), gap to 1 nonincreasing",
    )


def check_broken_kernel() -> CheckResult:
    """Deliberately violate the kernel normalisation; the failure must surface."""
    try:
        KernelF("constant", value=3.0)
    except ConfigurationError as exc:
        return CheckResult(
            "broken kernel injection (expected construction failure)",
            False,
            "construction rejected",
            "surfaced as a failed check",
            detail=str(exc),
        )
    return CheckResult(
        "broken kernel injection (expected construction failure)",
        False,
        "construction unexpectedly accepted",
        "surfaced as a failed check",
    )


def run_opcheck(length: float = 20.0, n_cells: int = 2000, broken_kernel: bool = False) -> list:
    checks = [
        check_identity_adhesion(length, n_cells),
        check_identity_gradient(length, n_cells),
        check_boundary_closed_form(),
        check_adjointness(length, n_cells),
        check_norms(length, n_cells),
        check_identity_limit(length, n_cells),
        check_symbol(),
    ]
    if broken_kernel:
        checks.append(check_broken_kernel())
    return checks


def format_table(checks: list) -> str:
    lines = []
    width = max(len(c.name) for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status}  {c.name:<{width}}  measured: {c.measured}  [{c.threshold}]")
        if c.detail:
            lines.append(f"      {c.detail}")
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return "\n".join(lines)
