"""Transient solvers for the state probability vector p(t) = p(0) e^(Qt).

Four methods:

* ``UNIFORMIZATION`` (default): randomization of Q at rate L = max |Q_ii|,
  summing Poisson-weighted powers of the stochastic matrix I + Q/L.  The
  weights come from a numerically stable recurrence anchored at the mode
  of the Poisson distribution, and the series is truncated once the
  remaining tail is below the configured ``eps``.  Keeps probabilities
  nonnegative by construction.
* ``MATRIX_EXP``: dense Pade scaling-and-squaring via SciPy, used as an
  in-package cross-check of the uniformization path.
* ``EULER``: explicit first-order stepping p_{k+1} = p_k (I + Q dt),
  guarded by the stability condition dt * max |Q_ii| < 1.
* ``PAPER_LITERAL``: replays, verbatim and without conservation
  correction, a published set of per-hour update equations for the
  bundled seven-state feed-water control model.  Those equations drop
  some inflow terms and couple the repair rate to the detection
  coverage, so total probability leaks; the leak per step is returned as
  a :class:`MassDefectReport` instead of being patched over.  The mode
  is defined only for models with exactly that seven-state shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.linalg

from .model import (
    DepmarkError,
    GeneratorMatrix,
    MarkovModel,
    SIX_MONTHS_HOURS,
    StateClass,
    build_generator,
)

__all__ = [
    "Method",
    "SolverConfig",
    "Trajectory",
    "MassDefectReport",
    "NumericFailureError",
    "StepTooLargeError",
    "ShapeMismatchError",
    "solve_at",
    "solve_grid",
    "solve_euler",
    "solve_paper_literal",
]


class NumericFailureError(DepmarkError):
    """A solver could not reach the requested accuracy."""


class StepTooLargeError(DepmarkError):
    """Explicit Euler step violates the stability guard dt * max|Q_ii| < 1."""


class ShapeMismatchError(DepmarkError):
    """The literal update mode was asked to run on a foreign model shape."""


class Method(Enum):
    UNIFORMIZATION = "uniformization"
    MATRIX_EXP = "expm"
    EULER = "euler"
    PAPER_LITERAL = "paper-literal"

    @classmethod
    def from_name(cls, name: str) -> "Method":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(f"unknown solver method {name!r}")


@dataclass(frozen=True, slots=True)
class SolverConfig:
    """Solver selection and tuning knobs.

    ``eps`` bounds the truncation error of the uniformization series;
    ``dt`` is the step of the Euler and literal modes; ``horizon`` is the
    default end time for the literal mode (falling back to the model's
    ``option horizon`` and then to six months).
    """

    method: Method = Method.UNIFORMIZATION
    eps: float = 1e-12
    dt: float = 1.0
    horizon: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must be in (0, 1), got {self.eps!r}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.horizon is not None and self.horizon < 0.0:
            raise ValueError(f"horizon must be >= 0, got {self.horizon!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Distributions sampled on an ascending time grid (rows sum to ~1
    for the conservation-corrected solvers; the literal mode leaks)."""

    times: np.ndarray
    probs: np.ndarray
    ids: tuple[int, ...]

    def __post_init__(self) -> None:
        self.times.setflags(write=False)
        self.probs.setflags(write=False)

    def __len__(self) -> int:
        return len(self.times)

    def row(self, index: int) -> np.ndarray:
        return self.probs[index]


@dataclass(frozen=True, eq=False)
class MassDefectReport:
    """Per-step probability leak of the literal mode: 1 - sum_i P_i
    after each step."""

    step_times: np.ndarray
    defects: np.ndarray

    @property
    def max_abs_defect(self) -> float:
        return float(np.max(np.abs(self.defects))) if len(self.defects) else 0.0


# --------------------------------------------------------------------------
# uniformization

#: Hard cap on the number of matrix-vector terms in one uniformization
#: series; beyond this the solve is refused rather than left to crawl.
UNIFORMIZATION_TERM_CAP = 10_000_000

_BAND = 1e-9  # tolerated numeric undershoot before clamping


def _finalize(vec: np.ndarray) -> np.ndarray:
    if float(vec.min(initial=0.0)) < -_BAND or float(vec.max(initial=0.0)) > 1.0 + _BAND:
        raise NumericFailureError(f"probability vector left [0, 1] beyond tolerance: {vec!r}")
    return np.clip(vec, 0.0, 1.0)


def _poisson_window(q: float, eps: float) -> tuple[int, list[float]]:
    """Poisson(q) weights covering all but < eps of the mass.

    Returns (lo, weights) with weights[k - lo] = e^-q q^k / k!.  Anchored
    at the mode and extended by the two-sided recurrence; the geometric
    tail bounds keep the neglected mass under eps/2 per side.
    """
    mode = int(math.floor(q))
    log_wm = mode * math.log(q) - q - math.lgamma(mode + 1)
    w_mode = math.exp(log_wm)

    below: list[float] = []
    w = w_mode
    k = mode
    while k > 0:
        ratio = k / q
        if ratio < 1.0 and w * ratio / (1.0 - ratio) < eps / 4.0:
            break
        w = w * ratio
        below.append(w)
        k -= 1
    lo = k

    above: list[float] = []
    w = w_mode
    k = mode
    while True:
        w_next = w * q / (k + 1)
        s = q / (k + 2)
        if s < 1.0 and w_next / (1.0 - s) < eps / 4.0:
            break
        k += 1
        if k - mode > UNIFORMIZATION_TERM_CAP:
            raise NumericFailureError(
                f"uniformization series for L*t = {q:g} does not truncate within "
                f"{UNIFORMIZATION_TERM_CAP} terms at eps = {eps:g}"
            )
        w = w_next
        above.append(w)

    below.reverse()
    return lo, below + [w_mode] + above


def _solve_uniformization(
    gen: GeneratorMatrix, p0: np.ndarray, times: Sequence[float], eps: float
) -> list[np.ndarray]:
    q = gen.entries
    rate = float(np.max(np.abs(np.diag(q))))
    if rate == 0.0:
        return [p0.copy() for _ in times]

    # rough a-priori cap check so absurd horizons fail fast
    q_max = rate * max(times, default=0.0)
    if q_max + 12.0 * math.sqrt(q_max + 1.0) + 20.0 > UNIFORMIZATION_TERM_CAP:
        raise NumericFailureError(
            f"uniformization would need ~{q_max:.3g} terms for L*t = {q_max:.3g}, "
            f"beyond the cap of {UNIFORMIZATION_TERM_CAP}"
        )

    stoch = np.eye(gen.n) + q / rate
    powers = [p0.astype(float)]  # powers[k] = p0 (I + Q/L)^k

    out: list[np.ndarray] = []
    for t in times:
        qt = rate * t
        if qt == 0.0:
            out.append(p0.copy())
            continue
        lo, weights = _poisson_window(qt, eps)
        hi = lo + len(weights) - 1
        while len(powers) <= hi:
            powers.append(powers[-1] @ stoch)
        acc = np.zeros(gen.n)
        for offset, w in enumerate(weights):
            acc += w * powers[lo + offset]
        out.append(_finalize(acc))
    return out


# --------------------------------------------------------------------------
# matrix exponential and Euler


def _solve_matrix_exp(gen: GeneratorMatrix, p0: np.ndarray, t: float) -> np.ndarray:
    return _finalize(p0 @ scipy.linalg.expm(gen.entries * t))


def _euler_guard(gen: GeneratorMatrix, dt: float) -> None:
    rate = float(np.max(np.abs(np.diag(gen.entries))))
    if dt * rate >= 1.0:
        raise StepTooLargeError(
            f"Euler step dt = {dt:g} violates dt * max|Q_ii| < 1 (max exit rate {rate:g}); "
            f"use dt < {1.0 / rate if rate else math.inf:g}"
        )


def _split_steps(t: float, dt: float) -> tuple[int, float]:
    """Number of full dt steps to reach t, plus a remainder step."""
    whole = round(t / dt)
    if abs(whole * dt - t) <= 1e-9 * max(t, dt):
        return whole, 0.0
    whole = int(math.floor(t / dt))
    return whole, t - whole * dt


def _solve_euler(gen: GeneratorMatrix, p0: np.ndarray, t: float, dt: float) -> np.ndarray:
    _euler_guard(gen, dt)
    steps, rem = _split_steps(t, dt)
    step_matrix = np.eye(gen.n) + gen.entries * dt
    p = p0.astype(float)
    for _ in range(steps):
        p = p @ step_matrix
    if rem > 0.0:
        p = p @ (np.eye(gen.n) + gen.entries * rem)
    return _finalize(p)


# --------------------------------------------------------------------------
# literal replay of the published seven-state update equations

# shape of the bundled feed-water model: (source, target) pairs and the
# per-state service classes the equations assume
_DFWCS_EDGES = frozenset(
    {(1, 2), (1, 7), (2, 1), (2, 3), (2, 7), (3, 2), (3, 6), (3, 7),
     (4, 5), (4, 7), (5, 4), (5, 6), (5, 7)}
)
_DFWCS_CLASSES = {
    1: StateClass.OPERATIONAL,
    2: StateClass.FAIL_OPERATIONAL,
    3: StateClass.FAIL_OPERATIONAL,
    4: StateClass.OPERATIONAL,
    5: StateClass.FAIL_OPERATIONAL,
    6: StateClass.FAIL_SAFE,
    7: StateClass.FAIL_UNSAFE,
}
_SHAPE_RTOL = 1e-9


@dataclass(frozen=True, slots=True)
class _LiteralRates:
    lam1: float
    lam2: float
    lam3: float
    lam4: float
    c: float
    mu: float


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_SHAPE_RTOL, abs_tol=1e-15)


def _extract_literal_rates(model: MarkovModel) -> _LiteralRates:
    """Recover (lam1..lam4, C, mu) from a structurally matching model.

    Works off evaluated generator entries, so parameter overrides are
    honoured no matter how the rate expressions are spelled.
    """
    if model.ids != (1, 2, 3, 4, 5, 6, 7):
        raise ShapeMismatchError(
            f"literal mode needs states 1..7, got ids {model.ids}"
        )
    for sid, cls in _DFWCS_CLASSES.items():
        actual = model.state(sid).state_class
        if actual is not cls:
            raise ShapeMismatchError(
                f"literal mode expects state {sid} to be {cls.keyword}, got {actual.keyword}"
            )
    edges = {(tr.source, tr.target) for tr in model.transitions}
    if edges != _DFWCS_EDGES:
        extra = sorted(edges - _DFWCS_EDGES)
        missing = sorted(_DFWCS_EDGES - edges)
        raise ShapeMismatchError(
            f"transition structure differs from the seven-state feed-water shape "
            f"(missing {missing}, extra {extra})"
        )

    q = build_generator(model).entries

    def rate(i: int, j: int) -> float:
        return float(q[i - 1, j - 1])

    lam1 = rate(1, 2) + rate(1, 7)
    lam2 = rate(2, 3) + rate(2, 7)
    lam2_b = rate(3, 6) + rate(3, 7)
    lam3 = (rate(4, 5) + rate(4, 7)) / 2.0
    lam4 = (rate(5, 6) + rate(5, 7)) / 2.0
    mu = rate(2, 1)

    if not _close(rate(3, 2), 2.0 * mu) or not _close(rate(5, 4), mu):
        raise ShapeMismatchError(
            "repair rates are not in the 1x / 2x / 1x pattern the literal equations assume"
        )
    if not _close(lam2, lam2_b):
        raise ShapeMismatchError(
            f"rows 2 and 3 imply different backup failure rates ({lam2:g} vs {lam2_b:g})"
        )

    groups = [
        (rate(1, 2), lam1),
        (rate(2, 3), lam2),
        (rate(3, 6), lam2_b),
        (rate(4, 5), 2.0 * lam3),
        (rate(5, 6), 2.0 * lam4),
    ]
    c: float | None = None
    for detected, total in groups:
        if total > 0.0:
            c = detected / total
            break
    if c is None:
        c = 1.0  # all failure rates zero: coverage is irrelevant
    for detected, total in groups:
        if total > 0.0 and not _close(detected, total * c):
            raise ShapeMismatchError(
                "failure transitions do not share a single detection coverage"
            )
    return _LiteralRates(lam1, lam2, lam3, lam4, c, mu)


def _literal_step(
    p: tuple[float, float, float, float, float, float, float],
    r: _LiteralRates,
    dt: float,
) -> tuple[float, float, float, float, float, float, float]:
    # the seven published update equations, term for term; note the
    # missing 1 -> 2 inflow in the second line and the coverage factor
    # on the repair rates in lines two and three
    p1, p2, p3, p4, p5, p6, p7 = p
    return (
        (1 - r.lam1 * r.c * dt) * p1 + r.mu * dt * p2,
        (1 - (r.lam2 + r.mu) * r.c * dt) * p2 + 2 * r.mu * dt * p3,
        (r.lam2 * r.c * dt) * p2 + (1 - (r.lam2 + 2 * r.mu) * r.c * dt) * p3,
        (1 - 2 * r.lam3 * r.c * dt) * p4 + r.mu * dt * p5,
        2 * r.lam3 * r.c * dt * p4 + (1 - (2 * r.lam4 + r.mu) * r.c * dt) * p5,
        r.lam2 * r.c * dt * p3 + 2 * r.lam4 * r.c * dt * p5 + p6,
        r.lam1 * (1 - r.c) * dt * p1
        + r.lam2 * (1 - r.c) * dt * p2
        + r.lam2 * (1 - r.c) * dt * p3
        + 2 * r.lam3 * (1 - r.c) * dt * p4
        + 2 * r.lam4 * (1 - r.c) * dt * p5
        + p7,
    )


def _as_step_index(t: float, dt: float, what: str) -> int:
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * max(abs(t), dt):
        raise ValueError(f"{what} {t!r} is not a multiple of dt = {dt!r}; the literal mode steps verbatim")
    return k


def solve_paper_literal(
    model: MarkovModel,
    config: SolverConfig,
    grid: Sequence[float] | None = None,
) -> tuple[Trajectory, MassDefectReport]:
    """Replay the published update equations with step ``config.dt``.

    Runs from 0 to ``grid[-1]`` (or the configured/model/six-month
    horizon when ``grid`` is None) and returns the sampled trajectory
    plus the per-step mass defect 1 - sum_i P_i.  Every requested time
    must be an integer multiple of ``dt``.  Models that are not
    structurally the bundled seven-state feed-water system are rejected
    with :class:`ShapeMismatchError`.
    """
    rates = _extract_literal_rates(model)
    dt = config.dt
    if grid is None:
        horizon = config.horizon
        if horizon is None:
            horizon = model.horizon if model.horizon is not None else SIX_MONTHS_HOURS
        last = _as_step_index(horizon, dt, "horizon")
        wanted = {k: k for k in range(last + 1)}
        times = [k * dt for k in range(last + 1)]
    else:
        _check_grid(grid)
        steps = [_as_step_index(t, dt, "grid time") for t in grid]
        last = max(steps, default=0)
        wanted = {}
        for row, k in enumerate(steps):
            wanted[k] = row
        times = list(grid)

    n_rows = len(times)
    probs = np.zeros((n_rows, 7))
    defects = np.zeros(last)
    p = tuple(model.initial_vector())
    if 0 in wanted:
        probs[wanted[0]] = p
    for k in range(1, last + 1):
        p = _literal_step(p, rates, dt)
        defects[k - 1] = 1.0 - (p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6])
        if k in wanted:
            probs[wanted[k]] = p

    trajectory = Trajectory(times=np.asarray(times, dtype=float), probs=probs, ids=model.ids)
    report = MassDefectReport(
        step_times=dt * np.arange(1, last + 1, dtype=float), defects=defects
    )
    return trajectory, report


# --------------------------------------------------------------------------
# public entry points


def _check_time(t: float) -> None:
    if not (math.isfinite(t) and t >= 0.0):
        raise ValueError(f"time must be finite and >= 0, got {t!r}")


def _check_grid(grid: Sequence[float]) -> None:
    previous = None
    for t in grid:
        _check_time(t)
        if previous is not None and t <= previous:
            raise ValueError("time grid must be strictly ascending")
        previous = t


def solve_at(model: MarkovModel, config: SolverConfig, t: float) -> np.ndarray:
    """Distribution at a single time, by the configured method."""
    _check_time(t)
    if config.method is Method.PAPER_LITERAL:
        trajectory, _ = solve_paper_literal(
            model, SolverConfig(Method.PAPER_LITERAL, config.eps, config.dt, horizon=t)
        )
        return trajectory.probs[-1].copy()
    gen = build_generator(model)
    p0 = model.initial_vector()
    if config.method is Method.UNIFORMIZATION:
        return _solve_uniformization(gen, p0, [t], config.eps)[0]
    if config.method is Method.MATRIX_EXP:
        return _solve_matrix_exp(gen, p0, t)
    if config.method is Method.EULER:
        return _solve_euler(gen, p0, t, config.dt)
    raise ValueError(f"unhandled method {config.method!r}")


def solve_grid(model: MarkovModel, config: SolverConfig, grid: Sequence[float]) -> Trajectory:
    """Distributions on an ascending grid; row k equals
    ``solve_at(model, config, grid[k])``."""
    grid = list(grid)
    _check_grid(grid)
    if config.method is Method.PAPER_LITERAL:
        trajectory, _ = solve_paper_literal(model, config, grid)
        return trajectory
    gen = build_generator(model)
    p0 = model.initial_vector()
    if config.method is Method.UNIFORMIZATION:
        rows = _solve_uniformization(gen, p0, grid, config.eps)
    elif config.method is Method.MATRIX_EXP:
        rows = [_solve_matrix_exp(gen, p0, t) for t in grid]
    elif config.method is Method.EULER:
        rows = [_solve_euler(gen, p0, t, config.dt) for t in grid]
    else:
        raise ValueError(f"unhandled method {config.method!r}")
    probs = np.vstack(rows) if rows else np.zeros((0, model.n))
    return Trajectory(times=np.asarray(grid, dtype=float), probs=probs, ids=model.ids)


def solve_euler(model: MarkovModel, config: SolverConfig) -> Trajectory:
    """Forward-Euler trajectory marched from t = 0 to the horizon.

    Applies p_{k+1} = p_k (I + Q dt) and returns one row per step time
    0, dt, 2 dt, ...; when the horizon (``config.horizon``, else the
    model's, else six months) is not a step multiple, one shortened
    final step lands the last row exactly on it.  The step matrix has
    unit row sums, so mass is conserved exactly, and under the
    stability guard its entries are nonnegative, so every iterate stays
    a proper distribution.
    """
    gen = build_generator(model)
    _euler_guard(gen, config.dt)
    horizon = config.horizon
    if horizon is None:
        horizon = model.horizon if model.horizon is not None else SIX_MONTHS_HOURS
    steps, rem = _split_steps(horizon, config.dt)
    step_matrix = np.eye(gen.n) + gen.entries * config.dt
    times = [0.0]
    rows = [model.initial_vector().astype(float)]
    p = rows[0]
    for k in range(1, steps + 1):
        p = p @ step_matrix
        times.append(k * config.dt)
        rows.append(p)
    if rem > 0.0:
        p = p @ (np.eye(gen.n) + gen.entries * rem)
        times.append(horizon)
        rows.append(p)
    probs = np.vstack([_finalize(row) for row in rows])
    return Trajectory(times=np.asarray(times, dtype=float), probs=probs, ids=model.ids)
