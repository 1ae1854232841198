"""Time grids and simulation of the driving noise.

The forward state is a one-dimensional Markov process stepped by explicit
Euler.  It drives nothing in the BSDE itself; it is the covariate the
backward regressions condition on, and terminal payoffs and obstacles are
functions of it.

Random numbers come from one master seed.  Paths are grouped in fixed-size
blocks and every block owns its own pair of substreams (Brownian, Poisson)
derived from ``(seed, block)``, so path ``p`` is the same whatever the total
path count or the number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptedDataError, InvalidConfigError

BLOCK_SIZE = 1024

__all__ = [
    "TimeGrid",
    "JumpMeasure",
    "ForwardModelSpec",
    "PathBundle",
    "build_time_grid",
    "simulate_paths",
    "compensated_increment",
]


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int
    times: np.ndarray = field(repr=False, compare=False)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def index_of(self, t: float, atol: float = 1e-9) -> int:
        """Grid index of time ``t``; raises if ``t`` is not a grid point."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.steps or abs(k * self.dt - t) > atol * max(1.0, self.horizon):
            raise InvalidConfigError(f"time {t!r} is not on the grid (dt={self.dt})")
        return k


def build_time_grid(horizon: float, steps: int) -> TimeGrid:
    """Uniform grid ``t_i = i * horizon / steps`` for ``i = 0..steps``."""
    if not np.isfinite(horizon) or horizon <= 0:
        raise InvalidConfigError(f"horizon must be positive, got {horizon!r}")
    if int(steps) != steps or steps < 1:
        raise InvalidConfigError(f"steps must be a positive integer, got {steps!r}")
    steps = int(steps)
    times = np.arange(steps + 1) * (horizon / steps)
    times[-1] = horizon
    times.setflags(write=False)
    return TimeGrid(float(horizon), steps, times)


@dataclass(frozen=True)
class JumpMeasure:
    """Finite Levy measure ``m(dz) = sum_j intensities[j] * delta_{marks[j]}``."""

    marks: tuple = ()
    intensities: tuple = ()

    def __post_init__(self):
        marks = tuple(float(z) for z in self.marks)
        lam = tuple(float(x) for x in self.intensities)
        if len(marks) != len(lam):
            raise InvalidConfigError("JumpMeasure: marks and intensities differ in length")
        if any(z == 0.0 for z in marks):
            raise InvalidConfigError("JumpMeasure: the mark 0 is excluded from the mark space")
        if any(not np.isfinite(x) or x < 0 for x in lam):
            raise InvalidConfigError("JumpMeasure: intensities must be finite and nonnegative")
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "intensities", lam)

    @property
    def m(self) -> int:
        return len(self.marks)

    @property
    def total_mass(self) -> float:
        return float(sum(self.intensities))

    @property
    def rates(self) -> np.ndarray:
        return np.asarray(self.intensities, dtype=float)


@dataclass(frozen=True)
class ForwardModelSpec:
    """Parameters of the forward state.

    ``dynamics="geometric"`` steps ``S += S * (mu dt + vol dW + sum_j L_j dN~_j)``;
    ``dynamics="arithmetic"`` drops the leading ``S`` factor.  ``dN~_j`` is the
    compensated count of mark ``j``, so ``drift=0`` gives a martingale.
    """

    initial: float
    drift: float = 0.0
    volatility: float = 0.0
    jump_loading: tuple = ()
    dynamics: str = "geometric"

    def __post_init__(self):
        object.__setattr__(self, "jump_loading", tuple(float(x) for x in self.jump_loading))
        if self.dynamics not in ("geometric", "arithmetic"):
            raise InvalidConfigError(f"unknown dynamics {self.dynamics!r}")
        if not np.isfinite(self.initial) or (self.dynamics == "geometric" and self.initial <= 0):
            raise InvalidConfigError("ForwardModelSpec: initial state must be positive")
        if not np.isfinite(self.volatility) or self.volatility < 0:
            raise InvalidConfigError("ForwardModelSpec: volatility must be nonnegative")
        if self.dynamics == "geometric" and any(x <= -1.0 for x in self.jump_loading):
            raise InvalidConfigError("ForwardModelSpec: jump loadings must exceed -1")


@dataclass(frozen=True)
class PathBundle:
    grid: TimeGrid
    jump_measure: JumpMeasure
    dW: np.ndarray = field(repr=False)
    jumps: np.ndarray = field(repr=False)
    state: np.ndarray = field(repr=False)
    seed: int = 0

    @property
    def n_paths(self) -> int:
        return self.dW.shape[0]

    def compensated(self) -> np.ndarray:
        """Compensated counts ``N - lambda dt`` for every path, interval and mark."""
        return compensated_increment(self.jumps, self.jump_measure, self.grid.dt)


def compensated_increment(counts, jm: JumpMeasure, dt: float) -> np.ndarray:
    """Return ``counts[..., j] - intensities[j] * dt``.

    ``counts`` may carry any leading shape; its last axis runs over marks.
    """
    counts = np.asarray(counts)
    if counts.shape[-1:] != (jm.m,):
        raise CorruptedDataError(f"expected {jm.m} marks on the last axis, got shape {counts.shape}")
    if counts.size and (np.any(counts < 0) or np.any(counts != np.floor(counts))):
        raise CorruptedDataError("jump counts must be nonnegative integers")
    return counts - jm.rates * dt


def _block_noise(seed, block, size, grid, jm):
    steps = grid.steps
    normal = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block, 0))))
    poisson = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block, 1))))
    dW = normal.standard_normal((size, steps)) * np.sqrt(grid.dt)
    jumps = poisson.poisson(jm.rates * grid.dt, size=(size, steps, jm.m)) if jm.m else np.zeros((size, steps, 0))
    return dW, jumps


def simulate_paths(model: ForwardModelSpec, grid: TimeGrid, jm: JumpMeasure, n_paths: int,
                   seed: int = 0, workers: int = 1) -> PathBundle:
    """Simulate Brownian increments, Poisson counts and the forward state."""
    if int(n_paths) != n_paths or n_paths < 1:
        raise InvalidConfigError(f"n_paths must be a positive integer, got {n_paths!r}")
    if not 0 <= int(seed) < 2**64:
        raise InvalidConfigError("seed must be a 64-bit unsigned integer")
    if len(model.jump_loading) not in (0, jm.m):
        raise InvalidConfigError("jump_loading must have one entry per mark")
    n_paths, seed = int(n_paths), int(seed)

    starts = list(range(0, n_paths, BLOCK_SIZE))
    sizes = [min(BLOCK_SIZE, n_paths - s) for s in starts]
    tasks = [(seed, b, size, grid, jm) for b, size in enumerate(sizes)]
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _block_noise(*a), tasks))
    else:
        parts = [_block_noise(*a) for a in tasks]
    dW = np.concatenate([p[0] for p in parts])
    jumps = np.concatenate([p[1] for p in parts]).astype(np.int64)

    loading = np.asarray(model.jump_loading or (0.0,) * jm.m, dtype=float)
    shock = model.drift * grid.dt + model.volatility * dW
    if jm.m:
        shock = shock + compensated_increment(jumps, jm, grid.dt) @ loading
    state = np.empty((n_paths, grid.steps + 1))
    state[:, 0] = model.initial
    for i in range(grid.steps):
        if model.dynamics == "geometric":
            state[:, i + 1] = state[:, i] * (1.0 + shock[:, i])
        else:
            state[:, i + 1] = state[:, i] + shock[:, i]

    for a in (dW, jumps, state):
        a.setflags(write=False)
    return PathBundle(grid, jm, dW, jumps, state, seed)
