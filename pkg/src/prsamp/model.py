"""Core domain types, numeric conventions, and deterministic seeding.

Everything downstream works in 64-bit floats (complex numbers as pairs of
64-bit floats); the phase retrieval channel involves exponent-sensitive
Bessel ratios, so no reduced precision anywhere. Containers validate their
invariants at construction and are treated as immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

__all__ = [
    "TransmissionMatrix",
    "PatternSet",
    "MeasurementSet",
    "SolverState",
    "SolverOptions",
    "ComplexGaussianPrior",
    "BinaryPrior",
    "PriorSpec",
    "DivergenceError",
    "seeded_rng",
    "derive_seed",
]


class DivergenceError(RuntimeError):
    """Raised when solver messages go non-finite.

    Carries enough context to identify where the blow-up happened and, at
    the solve() level, the best partial state seen across restarts.
    """

    def __init__(self, message, sweep=None, index=None, best_partial=None):
        super().__init__(message)
        self.sweep = sweep
        self.index = index
        self.best_partial = best_partial


def seeded_rng(seed: int, stream: int) -> np.random.Generator:
    """Deterministic random stream keyed by (seed, stream).

    Identical pairs yield identical sequences on every run and under any
    thread count; distinct streams are statistically independent. Built on
    SeedSequence spawn keys so streams never collide even for adjacent
    seeds.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.default_rng(ss)


def derive_seed(seed: int, index: int) -> int:
    """Collision-free 64-bit child seed for internal stage separation."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _as_finite_array(values, dtype, name):
    arr = np.asarray(values, dtype=dtype)
    if np.iscomplexobj(arr):
        ok = np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))
    else:
        ok = np.all(np.isfinite(arr))
    if not ok:
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class TransmissionMatrix:
    """M x N complex amplitude matrix (true medium or its estimate)."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_finite_array(self.entries, np.complex128, "TransmissionMatrix")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"TransmissionMatrix must be 2-D and nonempty, got shape {arr.shape}")
        object.__setattr__(self, "entries", arr)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class PatternSet:
    """P x N binary calibration patterns, one pattern per row.

    Calibration sets never contain an all-zero pattern (such a pattern
    carries no information and produces a zero measurement column).
    """

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"PatternSet must be 2-D and nonempty, got shape {arr.shape}")
        vals = np.unique(arr)
        if not np.all(np.isin(vals, (0.0, 1.0))):
            raise ValueError("PatternSet values must be binary {0,1}")
        if np.any(arr.sum(axis=1) == 0):
            raise ValueError("PatternSet contains an all-zero pattern")
        object.__setattr__(self, "bits", arr)

    @property
    def count(self) -> int:
        return self.bits.shape[0]

    @property
    def dim(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class MeasurementSet:
    """M x P nonnegative amplitudes (square roots of camera intensities)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_finite_array(self.values, np.float64, "MeasurementSet")
        if arr.ndim != 2:
            raise ValueError(f"MeasurementSet must be 2-D, got shape {arr.shape}")
        if np.any(arr < 0):
            raise ValueError("MeasurementSet values must be nonnegative")
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ComplexGaussianPrior:
    """Zero-mean circular complex Gaussian prior with variance v0.

    v0 may be a scalar or a length-N vector of per-coefficient variances.
    """

    v0: Union[float, np.ndarray]

    def __post_init__(self):
        v = np.asarray(self.v0, dtype=np.float64)
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("prior variance v0 must be positive and finite")
        object.__setattr__(self, "v0", v if v.ndim else float(v))


@dataclass(frozen=True)
class BinaryPrior:
    """Bernoulli {0,1} prior; rho is the per-coefficient activation probability.

    A scalar rho applies uniformly (global prior); a length-N vector gives
    per-pixel probabilities (local prior).
    """

    rho: Union[float, np.ndarray]

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=np.float64)
        if np.any(r < 0) or np.any(r > 1) or not np.all(np.isfinite(r)):
            raise ValueError("rho must lie in [0, 1]")
        object.__setattr__(self, "rho", r if r.ndim else float(r))


PriorSpec = Union[ComplexGaussianPrior, BinaryPrior]


@dataclass
class SolverState:
    """Per-problem AMP messages and channel caches.

    x_a/x_v are the posterior mean/variance estimates of the signal; omega/v
    the channel-side means/variances; s/r the pseudo-measurement messages
    feeding the denoiser; g/g_prime cache the most recent channel refresh.
    The state owns its random stream (used for sweep permutations) and is
    owned by exactly one solver run.
    """

    x_a: np.ndarray
    x_v: np.ndarray
    omega: np.ndarray
    v: np.ndarray
    s: np.ndarray
    r: np.ndarray
    g: np.ndarray
    g_prime: np.ndarray
    rng: np.random.Generator

    def __post_init__(self):
        n = self.x_a.shape[0]
        m = self.omega.shape[0]
        if not (self.x_v.shape == (n,) and self.s.shape == (n,) and self.r.shape == (n,)):
            raise ValueError("coefficient-side message lengths disagree")
        if not (self.v.shape == (m,) and self.g.shape == (m,) and self.g_prime.shape == (m,)):
            raise ValueError("measurement-side message lengths disagree")


@dataclass(frozen=True)
class SolverOptions:
    """Tuning knobs for the swept solver.

    sigma2      assumed output-channel noise variance.
    max_sweeps  sweep budget per restart.
    tol         convergence threshold on the max absolute change of x_a
                over one sweep.
    damping     blend factor in (0, 1] for the denoiser output; 1.0 keeps
                the raw update, smaller values mix in the previous x_a.
    restarts    independent runs from distinct init streams; the run with
                the smallest residual wins.
    seed        base seed; restart k draws its init from stream k.
    omega_guard lower bound on |omega| guarding the y/|omega| channel term.
    refresh     channel refresh granularity: "coefficient" refreshes after
                every coefficient touch (the swept scheme); "sweep" freezes
                channel state for one full sweep and rebuilds omega with the
                lagged correction term, which is the stable choice for real
                nonnegative operators (use with damping < 1).
    early_exit_residual
                if set, stop launching restarts once a run's residual falls
                below this value (the completed runs still compete on
                residual); None runs all restarts.
    """

    sigma2: float = 1e-3
    max_sweeps: int = 200
    tol: float = 1e-7
    damping: float = 1.0
    restarts: int = 3
    seed: int = 0
    omega_guard: float = 1e-12
    refresh: str = "coefficient"
    early_exit_residual: Optional[float] = None

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.omega_guard <= 0:
            raise ValueError("omega_guard must be positive")
        if self.refresh not in ("coefficient", "sweep"):
            raise ValueError(f"unknown refresh mode {self.refresh!r}")
