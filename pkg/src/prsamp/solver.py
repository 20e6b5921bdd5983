"""Swept AMP engine with pluggable output channels and input priors.

The sweep updates one coefficient at a time in a fresh random order. For
each coefficient the channel state is reduced to its leave-one-out (cavity)
form, the channel scores are refreshed there, the pseudo-measurement
(r_i, s_i) is formed, the prior denoiser is applied, and the coefficient's
new contribution is added back. This keeps the channel means consistent with
the current estimate at every touch, at O(M) cost per coefficient.

For real nonnegative operators (binary calibration patterns) the
per-coefficient refresh is unstable: the channel couples each coefficient to
its conjugate with a factor that sequential refresh compounds N times within
one sweep. The "sweep" refresh mode freezes the channel state once per sweep
and rebuilds the channel mean with the lagged correction term; combined with
damping < 1 this converges where the fine-grained refresh cannot. Solvers
for such operators also recenter the columns internally (see solve()).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .channels import gaussian_output, pr_output
from .model import (
    BinaryPrior,
    ComplexGaussianPrior,
    DivergenceError,
    PatternSet,
    PriorSpec,
    SolverOptions,
    SolverState,
    TransmissionMatrix,
    seeded_rng,
)
from .priors import binary_denoiser, complex_gaussian_denoiser

__all__ = ["Problem", "SolveResult", "init_state", "sweep", "solve", "residual_of"]

_S_FLOOR = 1e-12  # clamp on the s-message denominator (g' may turn positive)


@dataclass(frozen=True)
class Problem:
    """One inference instance: operator, amplitudes, channel, prior."""

    matrix: np.ndarray
    y: np.ndarray
    channel: str  # "phase_retrieval" | "gaussian"
    prior: PriorSpec

    def __post_init__(self):
        mat = self.matrix
        if isinstance(mat, TransmissionMatrix):
            mat = mat.entries
        elif isinstance(mat, PatternSet):
            mat = mat.bits
        mat = np.asarray(mat)
        mat = mat.astype(np.complex128) if np.iscomplexobj(mat) else mat.astype(np.float64)
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if mat.ndim != 2:
            raise ValueError("Problem.matrix must be 2-D")
        if y.shape[0] != mat.shape[0]:
            raise ValueError(
                f"y length {y.shape[0]} does not match matrix rows {mat.shape[0]}")
        if self.channel not in ("phase_retrieval", "gaussian"):
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.channel == "phase_retrieval" and np.any(y < 0):
            raise ValueError("phase retrieval measurements must be nonnegative")
        if isinstance(self.prior, BinaryPrior):
            rho = np.asarray(self.prior.rho)
            if rho.ndim == 1 and rho.shape[0] != mat.shape[1]:
                raise ValueError("rho vector length must match matrix columns")
        elif isinstance(self.prior, ComplexGaussianPrior):
            v0 = np.asarray(self.prior.v0)
            if v0.ndim == 1 and v0.shape[0] != mat.shape[1]:
                raise ValueError("v0 vector length must match matrix columns")
        else:
            raise ValueError("prior must be ComplexGaussianPrior or BinaryPrior")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class SolveResult:
    x_a: np.ndarray
    x_v: np.ndarray
    sweeps_used: int
    converged: bool
    residual: float


def _channel_fn(problem, options):
    if problem.channel == "phase_retrieval":
        return lambda y, om, v: pr_output(y, om, v, options.sigma2, options.omega_guard)
    return lambda y, om, v: gaussian_output(y, om, v, options.sigma2)


def _prior_params(problem):
    """Broadcast prior parameters to per-coefficient vectors."""
    n = problem.matrix.shape[1]
    if isinstance(problem.prior, BinaryPrior):
        rho = np.broadcast_to(np.asarray(problem.prior.rho, dtype=np.float64), (n,))
        return "binary", rho.copy()
    v0 = np.broadcast_to(np.asarray(problem.prior.v0, dtype=np.float64), (n,))
    return "cg", v0.copy()


def init_state(problem: Problem, options: SolverOptions, stream: int = 0) -> SolverState:
    """Draw the starting point from the prior and seed the forward sums.

    ComplexGaussian prior: x_a ~ CN(0, v0), x_v = v0. Binary prior:
    x_a = rho plus uniform noise of amplitude 0.01, x_v = rho(1-rho) + 0.01.
    omega/v are plain forward sums (no correction term on the first touch).
    """
    m, n = problem.matrix.shape
    rng = seeded_rng(options.seed, stream)
    kind, pv = _prior_params(problem)
    if kind == "cg":
        scale = np.sqrt(pv / 2.0)
        x_a = rng.normal(0.0, 1.0, n) * scale + 1j * rng.normal(0.0, 1.0, n) * scale
        x_v = pv.astype(np.float64, copy=True)
    else:
        x_a = (pv + 0.01 * rng.uniform(-1.0, 1.0, n)).astype(np.complex128)
        x_v = pv * (1.0 - pv) + 0.01
    a2 = np.abs(problem.matrix) ** 2
    omega = problem.matrix @ x_a
    v = a2 @ x_v
    return SolverState(
        x_a=np.asarray(x_a, dtype=np.complex128),
        x_v=np.asarray(x_v, dtype=np.float64),
        omega=np.asarray(omega, dtype=np.complex128),
        v=np.asarray(v, dtype=np.float64),
        s=np.ones(n, dtype=np.float64),
        r=np.asarray(x_a, dtype=np.complex128).copy(),
        g=np.zeros(m, dtype=np.complex128),
        g_prime=np.zeros(m, dtype=np.float64),
        rng=rng,
    )


def _operator_views(state, matrix):
    """Layout variants of the operator (transpose, squared magnitudes).

    Cached on the state keyed by matrix identity, so the couple hundred
    sweeps of a typical solve share one set of copies.
    """
    cache = getattr(state, "_op_cache", None)
    if cache is None or cache[0] is not matrix:
        a_t = np.ascontiguousarray(matrix.T)
        cache = (matrix, a_t, np.abs(a_t) ** 2, np.abs(matrix) ** 2)
        state._op_cache = cache
    return cache[1], cache[2], cache[3]


def _sweep_coefficient(state, problem, options, channel, kind, pv, sweep_index):
    """One full pass of per-coefficient updates with cavity channel refresh."""
    a_t, a_t2, _ = _operator_views(state, problem.matrix)
    y = problem.y
    beta = options.damping
    x_a, x_v, omega, v = state.x_a, state.x_v, state.omega, state.v
    max_change = 0.0
    for i in state.rng.permutation(x_a.shape[0]):
        col = a_t[i]
        col2 = a_t2[i]
        om_c = omega - col * x_a[i]
        v_c = np.maximum(v - col2 * x_v[i], 0.0)
        try:
            g, gp = channel(y, om_c, v_c)
        except ValueError as err:
            raise DivergenceError(
                f"non-finite channel state at sweep {sweep_index}, coefficient {i}",
                sweep=sweep_index, index=int(i), best_partial=x_a.copy()) from err
        d = col2 @ (-gp)
        s_i = 1.0 / (d if d > _S_FLOOR else _S_FLOOR)
        r_i = s_i * np.vdot(col, g)
        if not (np.isfinite(r_i.real) and np.isfinite(r_i.imag)):
            raise DivergenceError(
                f"non-finite message at sweep {sweep_index}, coefficient {i}",
                sweep=sweep_index, index=int(i), best_partial=x_a.copy())
        if kind == "cg":
            na, nv = complex_gaussian_denoiser(r_i, s_i, pv[i])
        else:
            na, nv = binary_denoiser(r_i, s_i, pv[i])
        if beta < 1.0:
            na = beta * na + (1.0 - beta) * x_a[i]
        if not (np.isfinite(nv) and np.isfinite(complex(na).real)
                and np.isfinite(complex(na).imag)):
            raise DivergenceError(
                f"non-finite update at sweep {sweep_index}, coefficient {i}",
                sweep=sweep_index, index=int(i), best_partial=x_a.copy())
        change = abs(na - x_a[i])
        if change > max_change:
            max_change = change
        x_a[i] = na
        x_v[i] = nv
        state.s[i] = s_i
        state.r[i] = r_i
        omega = om_c + col * na
        v = v_c + col2 * nv
        state.g = g
        state.g_prime = gp
    state.omega = omega
    state.v = v
    if not np.all(np.isfinite(omega.view(float))) or not np.all(np.isfinite(v)):
        raise DivergenceError(f"non-finite channel state after sweep {sweep_index}",
                              sweep=sweep_index, best_partial=x_a.copy())
    return float(max_change)


def _sweep_frozen(state, problem, options, channel, kind, pv, sweep_index):
    """One pass with channel state frozen at the sweep start.

    The channel mean is rebuilt from the current estimate with the lagged
    correction omega = A x_a - V g_prev, every coefficient then updates
    against the same frozen scores, and the denoiser output is damped. The
    update visits each coefficient exactly once; the order is immaterial
    because nothing is refreshed in between.
    """
    a = problem.matrix
    _, _, a2 = _operator_views(state, a)
    y = problem.y
    beta = options.damping
    v_new = a2 @ state.x_v
    omega = a @ state.x_a - v_new * state.g
    try:
        g, gp = channel(y, omega, v_new)
    except ValueError as err:
        raise DivergenceError(
            f"non-finite channel state at sweep {sweep_index}",
            sweep=sweep_index, best_partial=state.x_a.copy()) from err
    d = a2.T @ (-gp)
    np.clip(d, _S_FLOOR, None, out=d)
    s = 1.0 / d
    r = state.x_a + s * (np.conj(a).T @ g)
    bad_r = np.flatnonzero(~(np.isfinite(r.real) & np.isfinite(r.imag)))
    if bad_r.size:
        raise DivergenceError(
            f"non-finite message at sweep {sweep_index}, coefficient {bad_r[0]}",
            sweep=sweep_index, index=int(bad_r[0]), best_partial=state.x_a.copy())
    if kind == "cg":
        na, nv = complex_gaussian_denoiser(r, s, pv)
    else:
        na_r, nv = binary_denoiser(r, s, pv)
        na = na_r.astype(np.complex128)
    na = beta * na + (1.0 - beta) * state.x_a
    if not np.all(np.isfinite(na.view(float))) or not np.all(np.isfinite(nv)):
        bad = np.flatnonzero(~np.isfinite(nv))
        idx = int(bad[0]) if bad.size else None
        raise DivergenceError(f"non-finite update at sweep {sweep_index}",
                              sweep=sweep_index, index=idx,
                              best_partial=state.x_a.copy())
    max_change = float(np.max(np.abs(na - state.x_a)))
    state.x_a = na
    state.x_v = np.asarray(nv, dtype=np.float64)
    state.omega = omega
    state.v = v_new
    state.s = s
    state.r = r
    state.g = g
    state.g_prime = gp
    return max_change


def sweep(state: SolverState, problem: Problem, options: SolverOptions,
          sweep_index: int = 0):
    """Advance the state by one sweep; returns (state, max_change of x_a)."""
    channel = _channel_fn(problem, options)
    kind, pv = _prior_params(problem)
    if options.refresh == "coefficient":
        mc = _sweep_coefficient(state, problem, options, channel, kind, pv, sweep_index)
    else:
        mc = _sweep_frozen(state, problem, options, channel, kind, pv, sweep_index)
    return state, mc


def residual_of(problem: Problem, x_a: np.ndarray) -> float:
    """Relative amplitude misfit of an estimate on the problem's own data.

    Phase retrieval compares |A x| to y; the Gaussian channel compares A x.
    A zero measurement vector scores the absolute misfit instead.
    """
    pred = problem.matrix @ x_a
    if problem.channel == "phase_retrieval":
        diff = problem.y - np.abs(pred)
    else:
        diff = problem.y - pred
    ny = float(np.linalg.norm(problem.y))
    nd = float(np.linalg.norm(diff))
    return nd / ny if ny > 0 else nd


def _recenter_problem(problem: Problem):
    """Column-recentered equivalent for real nonnegative operators.

    Appends a constant column and an auxiliary coefficient standing for the
    removed mean's projection mu^T x; its prior variance is v0 ||mu||^2. The
    large common mode of a 0/1 operator otherwise destabilizes the sweep.
    Returns (augmented problem, original column count).
    """
    x_mat = np.real(problem.matrix)
    mu = x_mat.mean(axis=0)
    m, n = x_mat.shape
    a_aug = np.empty((m, n + 1), dtype=np.float64)
    a_aug[:, :n] = x_mat - mu
    a_aug[:, n] = 1.0
    v0 = np.broadcast_to(np.asarray(problem.prior.v0, dtype=np.float64), (n,))
    v_aug = np.empty(n + 1, dtype=np.float64)
    v_aug[:n] = v0
    v_aug[n] = float(v0 @ (mu * mu))  # variance of the mean-mode coefficient
    if v_aug[n] <= 0:
        v_aug[n] = float(np.mean(v0))
    aug = Problem(matrix=a_aug, y=problem.y, channel=problem.channel,
                  prior=ComplexGaussianPrior(v0=v_aug))
    return aug, n


def _wants_recenter(problem: Problem) -> bool:
    if problem.channel != "phase_retrieval":
        return False
    if not isinstance(problem.prior, ComplexGaussianPrior):
        return False
    mat = problem.matrix
    if np.iscomplexobj(mat):
        return False
    if np.any(mat < 0):
        return False
    # A zero-mean-ish real operator gains nothing from recentering.
    col_norm = np.linalg.norm(mat, axis=0)
    col_mean = np.abs(mat.mean(axis=0))
    return bool(np.mean(col_mean * np.sqrt(mat.shape[0]) > 0.1 * np.maximum(col_norm, 1e-300)) > 0.5)


def solve(problem: Problem, options: SolverOptions) -> SolveResult:
    """Run restarts of the swept iteration and keep the best residual.

    Restart k initializes from stream k of the options seed. Convergence is
    max |x_a change| < tol within the sweep budget. Real nonnegative
    operators under the phase retrieval channel with a complex Gaussian
    prior are internally column-recentered (the returned estimate and the
    residual always refer to the problem as given). If every restart
    diverges, the DivergenceError carries the best partial estimate.
    """
    work = problem
    n_orig = problem.matrix.shape[1]
    recentered = _wants_recenter(problem)
    if recentered:
        work, n_orig = _recenter_problem(problem)
    best = None
    last_error = None
    for k in range(options.restarts):
        state = init_state(work, options, stream=k)
        sweeps_used = options.max_sweeps
        converged = False
        try:
            for t in range(options.max_sweeps):
                state, mc = sweep(state, work, options, sweep_index=t)
                if mc < options.tol:
                    sweeps_used = t + 1
                    converged = True
                    break
        except DivergenceError as err:
            last_error = err
            continue
        x_full = state.x_a
        x_a = x_full[:n_orig]
        x_v = state.x_v[:n_orig]
        res = residual_of(problem, x_a)
        if not np.isfinite(res):
            last_error = DivergenceError("non-finite residual", best_partial=x_a)
            continue
        cand = SolveResult(x_a=x_a.copy(), x_v=x_v.copy(), sweeps_used=sweeps_used,
                           converged=converged, residual=res)
        if best is None or cand.residual < best.residual:
            best = cand
        if (options.early_exit_residual is not None
                and best.residual < options.early_exit_residual):
            break
    if best is None:
        raise DivergenceError(
            f"all {options.restarts} restarts diverged",
            best_partial=None if last_error is None else last_error.best_partial,
        )
    return best
