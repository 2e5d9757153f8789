"""Designing the degree of social influence.

Closed-form worst-case cost bounds for a uniform crowd, grid/golden-section
minimization of the bound, Monte Carlo search over constant weights and
distance profiles under common random numbers, a greedy dynamic schedule on
the bound recursion, and the gain-vs-noise phase diagram.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import Constant, CrowdConfig, DistanceProfile, Off, simulate_mean_mse

GRID_STEP = 1e-3
REFINE_TOL = 1e-4
BETA_MAX = 1.0 - 1e-6


@dataclass(frozen=True)
class RobustProblem:
    """Inputs of the worst-case design: uniform gain, noise ratio, horizon.

    ``noise_ratio`` is the evaluation-noise variance relative to the
    crowd's initial mean squared error.
    """

    gain: float
    noise_ratio: float
    horizon: int

    def __post_init__(self):
        if not 0.0 < self.gain < 1.0:
            raise ValueError("gain must lie in (0, 1)")
        if self.noise_ratio < 0:
            raise ValueError("noise_ratio must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")


@dataclass
class InfluenceDesign:
    """An influence policy recommendation plus its predicted performance."""

    kind: str                      # constant | distance_profile | dynamic
    predicted_cost: float
    delta_mse: float
    method: str                    # robust_bound | monte_carlo
    beta: float | None = None
    c: float | None = None
    schedule: list[float] | None = None
    replicates: int | None = None
    seed: int | None = None
    stderr: float | None = None
    evaluations: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "predicted_cost": self.predicted_cost,
               "delta_mse": self.delta_mse, "method": self.method,
               "replicates": self.replicates, "seed": self.seed}
        if self.beta is not None:
            out["beta"] = self.beta
        if self.c is not None:
            out["c"] = self.c
        if self.schedule is not None:
            out["schedule"] = list(self.schedule)
        if self.stderr is not None:
            out["stderr"] = self.stderr
        return out


# ---------------------------------------------------------------------------
# worst-case bound
# ---------------------------------------------------------------------------

def contraction_factor(gain: float, beta: float) -> float:
    """Worst-case per-step shrink factor m = (1-beta)*gain + beta."""
    if not 0.0 < gain < 1.0:
        raise ValueError("gain must lie in (0, 1)")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    return (1.0 - beta) * gain + beta


def mse_bound_step(mse: float, gain: float, beta: float, sigma: float) -> float:
    """One step of the worst-case MSE recursion: m^2*mse + (1-beta)^2*sigma^2."""
    if mse < 0:
        raise ValueError("mse must be nonnegative")
    m = contraction_factor(gain, beta)
    return m * m * mse + (1.0 - beta) ** 2 * sigma * sigma


def robust_cost_bound(problem: RobustProblem, beta: float) -> float:
    """Worst-case cumulative expected MSE over the horizon, normalized by MSE(0).

    Closed form of the summed per-step bound: with m the contraction
    factor and S = (1 - m^(2T)) / (1 - m^2),

        bound = S + (T - S) * (1-beta)^2 / (1-m^2) * noise_ratio
    """
    m = contraction_factor(problem.gain, beta)
    if m >= 1.0:
        raise ValueError("not a contraction")
    m2 = m * m
    T = problem.horizon
    S = (1.0 - m2 ** T) / (1.0 - m2)
    return S + (T - S) * ((1.0 - beta) ** 2 / (1.0 - m2)) * problem.noise_ratio


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def optimize_beta_robust(problem: RobustProblem) -> InfluenceDesign:
    """Minimize the worst-case cost bound over constant beta in [0, 1).

    Dense grid search followed by golden-section refinement; the bound is
    cheap, so a global scan is safer than local descent.
    """
    betas = np.arange(0.0, BETA_MAX + GRID_STEP / 2, GRID_STEP)
    betas[-1] = min(betas[-1], BETA_MAX)
    vals = np.array([robust_cost_bound(problem, b) for b in betas])
    i = int(np.argmin(vals))
    lo = betas[max(i - 1, 0)]
    hi = betas[min(i + 1, len(betas) - 1)]
    best = _golden_section(lambda b: robust_cost_bound(problem, b), lo, hi,
                           REFINE_TOL)
    if robust_cost_bound(problem, betas[i]) < robust_cost_bound(problem, best):
        best = float(betas[i])
    cost = robust_cost_bound(problem, best)
    base = robust_cost_bound(problem, 0.0)
    return InfluenceDesign(kind="constant", beta=float(best), predicted_cost=cost,
                           delta_mse=delta_mse(base, cost), method="robust_bound")


def robust_dynamic_schedule(problem: RobustProblem) -> InfluenceDesign:
    """Greedy time-varying weights on the worst-case MSE recursion.

    Tracks the normalized bound state M (M(0)=1) and at every step picks
    the beta minimizing the next bound value; this pointwise choice
    dominates any constant weight on the same recursion.
    """
    betas = np.arange(0.0, BETA_MAX + GRID_STEP / 2, GRID_STEP)
    betas[-1] = min(betas[-1], BETA_MAX)
    m2 = ((1.0 - betas) * problem.gain + betas) ** 2
    noise = (1.0 - betas) ** 2 * problem.noise_ratio
    M = 1.0
    cost = 0.0
    schedule = []
    for _ in range(problem.horizon):
        cost += M
        nxt = m2 * M + noise
        j = int(np.argmin(nxt))
        schedule.append(float(betas[j]))
        M = float(nxt[j])
    base = robust_cost_bound(problem, 0.0)
    return InfluenceDesign(kind="dynamic", schedule=schedule, predicted_cost=cost,
                           delta_mse=delta_mse(base, cost), method="robust_bound")


# ---------------------------------------------------------------------------
# Monte Carlo search (common random numbers across candidates)
# ---------------------------------------------------------------------------

DEFAULT_REPLICATES = 5000
DEFAULT_BETA_GRID = np.round(np.arange(0.0, 0.901, 0.025), 6)
DEFAULT_C_GRID = np.geomspace(0.005, 0.1, 21)


def _mc_cost(config: CrowdConfig, policy, horizon: int, replicates: int,
             seed: int) -> tuple[float, float]:
    _, costs = simulate_mean_mse(config, policy, horizon, replicates, seed)
    return float(costs.mean()), float(costs.std(ddof=1) / np.sqrt(len(costs)))


def optimize_beta_mc(config: CrowdConfig, horizon: int,
                     replicates: int = DEFAULT_REPLICATES,
                     beta_grid: Sequence[float] | None = None,
                     seed: int = 0) -> InfluenceDesign:
    """Pick the constant weight minimizing the simulated expected cost.

    Every candidate is evaluated on the same seeded noise and initial
    draws (common random numbers), so the comparison is deterministic and
    low variance; the improvement is measured against beta = 0 under the
    same seeds.
    """
    grid = DEFAULT_BETA_GRID if beta_grid is None else np.asarray(beta_grid, float)
    if grid.size == 0:
        raise ValueError("empty beta grid")
    if np.any((grid < 0) | (grid >= 1)):
        raise ValueError("invalid influence weight")
    base_cost, _ = _mc_cost(config, Off(), horizon, replicates, seed)
    evals = []
    for b in grid:
        policy = Off() if b == 0.0 else Constant(float(b))
        cost, se = _mc_cost(config, policy, horizon, replicates, seed)
        evals.append((float(b), cost, se))
    i = int(np.argmin([c for _, c, _ in evals]))
    beta, cost, se = evals[i]
    return InfluenceDesign(kind="constant", beta=beta, predicted_cost=cost,
                           delta_mse=delta_mse(base_cost, cost),
                           method="monte_carlo", replicates=replicates, seed=seed,
                           stderr=se, evaluations=[(b, c) for b, c, _ in evals])


def optimize_profile_mc(config: CrowdConfig, horizon: int,
                        replicates: int = DEFAULT_REPLICATES,
                        c_grid: Sequence[float] | None = None,
                        seed: int = 0) -> InfluenceDesign:
    """Pick the distance-profile rate c minimizing the simulated cost."""
    grid = DEFAULT_C_GRID if c_grid is None else np.asarray(c_grid, float)
    if grid.size == 0:
        raise ValueError("empty c grid")
    if np.any(grid <= 0):
        raise ValueError("nonpositive c in grid")
    base_cost, _ = _mc_cost(config, Off(), horizon, replicates, seed)
    evals = []
    for c in grid:
        cost, se = _mc_cost(config, DistanceProfile(float(c)), horizon,
                            replicates, seed)
        evals.append((float(c), cost, se))
    i = int(np.argmin([c for _, c, _ in evals]))
    c_best, cost, se = evals[i]
    return InfluenceDesign(kind="distance_profile", c=c_best, predicted_cost=cost,
                           delta_mse=delta_mse(base_cost, cost),
                           method="monte_carlo", replicates=replicates, seed=seed,
                           stderr=se, evaluations=[(c, v) for c, v, _ in evals])


# ---------------------------------------------------------------------------
# phase diagram and report helpers
# ---------------------------------------------------------------------------

def phase_diagram(gain_grid: Sequence[float], ratio_grid: Sequence[float],
                  horizon: int) -> np.ndarray:
    """Optimal robust beta per (gain, noise ratio) cell; rows follow gains."""
    gains = np.asarray(gain_grid, dtype=float)
    ratios = np.asarray(ratio_grid, dtype=float)
    if gains.size == 0 or ratios.size == 0:
        raise ValueError("phase diagram grids must be nonempty")
    out = np.zeros((gains.size, ratios.size))
    for i, g in enumerate(gains):
        for j, r in enumerate(ratios):
            out[i, j] = optimize_beta_robust(RobustProblem(g, r, horizon)).beta
    return out


def write_phase_diagram_csv(path, gain_grid, ratio_grid, matrix) -> Path:
    """First row is the ratio grid, first column the gain grid, cells beta."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [f"{r:.4f}" for r in ratio_grid])
        for g, row in zip(gain_grid, matrix):
            writer.writerow([f"{g:.4f}"] + [f"{b:.4f}" for b in row])
    return path


def delta_mse(cost_open: float, cost_soft: float) -> float:
    """Fractional cost reduction relative to fully independent learning."""
    if cost_open <= 0:
        raise ValueError("nonpositive open-loop cost")
    return 1.0 - cost_soft / cost_open


def write_design_json(design: InfluenceDesign, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(design.to_json(), indent=2))
    return path
