"""Crowd learning dynamics with soft population feedback.

A crowd of n agents repeatedly revises a scalar decision. The state of
agent i is its decision error x_i(t) (decision minus the unknown optimum).
Left alone, each agent contracts toward zero with a learning gain g_i and
picks up zero-mean evaluation noise. With soft feedback enabled, every
agent may additionally pull its update toward the population-average
error u(t), weighted by a per-agent influence weight beta in [0, 1).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Influence weights must stay strictly below 1 to preserve contraction.
BETA_CAP = 1.0 - 1e-6

DEFAULT_STATE_BOUND = 500.0
DEFAULT_BIAS_FRACTION = 0.9


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MseInit:
    """Draw x(0) so the realized mean squared error equals ``mse0`` exactly.

    The draw is a shared offset (common bias) plus an iid uniform scatter,
    globally rescaled to hit ``mse0``. ``bias_fraction`` sets how much of
    the initial MSE sits in the common offset; crowds of human guessers
    start mostly co-biased (everyone anchors on the same default), so the
    default is high. ``bias_fraction=0`` reduces to a pure iid uniform
    draw on [-sqrt(3*mse0), sqrt(3*mse0)].
    """

    mse0: float
    bias_fraction: float = DEFAULT_BIAS_FRACTION

    def __post_init__(self):
        if self.mse0 <= 0:
            raise ValueError("initial MSE must be positive")
        if not 0.0 <= self.bias_fraction <= 1.0:
            raise ValueError("bias_fraction must be in [0, 1]")


@dataclass(frozen=True)
class ExplicitInit:
    """Use a caller-supplied x(0) vector verbatim (clamped to the state bound)."""

    x0: tuple[float, ...]

    def __init__(self, x0: Iterable[float]):
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))


@dataclass(frozen=True)
class CrowdConfig:
    """Static description of a crowd: size, gains, noise, bounds, initial errors.

    ``gains`` may be a single scalar (uniform learning gain) or one value
    per agent; every gain must satisfy |g| < 1 so that independent
    learning is a contraction. ``noise_dist`` selects Gaussian or uniform
    evaluation noise, both zero mean with standard deviation
    ``noise_sigma``.
    """

    n: int
    gains: float | Sequence[float]
    noise_sigma: float
    init: MseInit | ExplicitInit
    state_bound: float = DEFAULT_STATE_BOUND
    noise_dist: str = "gaussian"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("crowd must have at least one agent")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.state_bound <= 0:
            raise ValueError("state_bound must be positive")
        if self.noise_dist not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise_dist {self.noise_dist!r}")
        g = np.atleast_1d(np.asarray(self.gains, dtype=float))
        if g.size == 1:
            g = np.full(self.n, g[0])
        if g.size != self.n:
            raise ValueError("gains must be a scalar or one value per agent")
        if np.any(np.abs(g) >= 1.0):
            raise ValueError("every learning gain must satisfy |g| < 1")
        object.__setattr__(self, "gains", tuple(float(v) for v in g))
        if isinstance(self.init, ExplicitInit) and len(self.init.x0) != self.n:
            raise ValueError("explicit x(0) must have one entry per agent")

    @property
    def gain_vector(self) -> np.ndarray:
        return np.asarray(self.gains, dtype=float)

    def to_json(self) -> dict:
        init: dict
        if isinstance(self.init, MseInit):
            init = {"kind": "mse", "mse0": self.init.mse0,
                    "bias_fraction": self.init.bias_fraction}
        else:
            init = {"kind": "explicit", "x0": list(self.init.x0)}
        return {
            "n": self.n,
            "gains": list(self.gains),
            "noise_sigma": self.noise_sigma,
            "state_bound": self.state_bound,
            "noise_dist": self.noise_dist,
            "init": init,
        }


# ---------------------------------------------------------------------------
# influence policies
# ---------------------------------------------------------------------------

class InfluencePolicy:
    """How agents weight the population feedback against their own update."""

    def weights(self, x: np.ndarray, gains: np.ndarray, u: np.ndarray,
                t: int) -> np.ndarray | float:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Off(InfluencePolicy):
    """Fully independent learning (every weight is zero)."""

    def weights(self, x, gains, u, t):
        return 0.0

    def to_json(self):
        return {"variant": "off"}


@dataclass(frozen=True)
class Constant(InfluencePolicy):
    """The same influence weight for every agent at every step."""

    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("invalid influence weight: beta must be in [0, 1)")

    def weights(self, x, gains, u, t):
        return self.beta

    def to_json(self):
        return {"variant": "constant", "beta": self.beta}


@dataclass(frozen=True)
class DistanceProfile(InfluencePolicy):
    """Influence decays with the gap between an agent's own update and the feedback.

    beta_i = exp(-c * d_i) with d_i = |g_i * x_i - u|, capped just below 1
    at d = 0.
    """

    c: float

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("distance profile rate c must be positive")

    def weights(self, x, gains, u, t):
        d = np.abs(gains * x - u)
        return np.minimum(np.exp(-self.c * d), BETA_CAP)

    def to_json(self):
        return {"variant": "distance_profile", "c": self.c}


@dataclass(frozen=True)
class Schedule(InfluencePolicy):
    """A preset influence weight per time step, shared by all agents."""

    betas: tuple[float, ...]

    def __init__(self, betas: Iterable[float]):
        object.__setattr__(self, "betas", tuple(float(b) for b in betas))
        if any(not 0.0 <= b < 1.0 for b in self.betas):
            raise ValueError("invalid influence weight: every beta must be in [0, 1)")

    def weights(self, x, gains, u, t):
        if t >= len(self.betas):
            raise ValueError(f"schedule has no weight for step {t}")
        return self.betas[t]

    def to_json(self):
        return {"variant": "schedule", "betas": list(self.betas)}


def policy_from_json(data: dict) -> InfluencePolicy:
    variant = data.get("variant")
    if variant == "off":
        return Off()
    if variant == "constant":
        return Constant(float(data["beta"]))
    if variant == "distance_profile":
        return DistanceProfile(float(data["c"]))
    if variant == "schedule":
        return Schedule(data["betas"])
    raise ValueError(f"unknown policy variant {variant!r}")


# ---------------------------------------------------------------------------
# states and trajectories
# ---------------------------------------------------------------------------

@dataclass
class CrowdState:
    """Decision errors of the whole crowd at one time step."""

    t: int
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)


@dataclass
class Trajectory:
    """A simulated or observed run: per-agent errors on a discrete horizon.

    ``xs`` has shape (T, n). ``active`` marks which agents have a defined
    state at each step (all True for simulated runs; observed runs may
    start agents late or drop missing cells). ``mse[t]`` averages x^2 over
    the active agents; steps with no active agent carry NaN and are
    skipped by ``cost``.
    """

    xs: np.ndarray
    seed: int | None = None
    config_digest: str = ""
    active: np.ndarray | None = None
    dropped_agents: int = 0
    mse: np.ndarray = field(init=False)
    cost: float = field(init=False)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        if self.xs.ndim != 2:
            raise ValueError("trajectory states must be a (T, n) array")
        if self.active is not None:
            self.active = np.asarray(self.active, dtype=bool)
            if self.active.shape != self.xs.shape:
                raise ValueError("active mask must match the state array shape")
        self.mse = trajectory_mse(self.xs, self.active)
        self.cost = float(np.nansum(self.mse))

    @property
    def horizon(self) -> int:
        return self.xs.shape[0]

    @property
    def n(self) -> int:
        return self.xs.shape[1]

    @property
    def states(self) -> list[CrowdState]:
        return [CrowdState(t, row) for t, row in enumerate(self.xs)]

    def feedback_series(self) -> np.ndarray:
        """Population-average error at each step (NaN where nobody is active)."""
        if self.active is None:
            return self.xs.mean(axis=1)
        counts = self.active.sum(axis=1)
        sums = np.where(self.active, self.xs, 0.0).sum(axis=1)
        with np.errstate(invalid="ignore"):
            return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def trajectory_mse(xs: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
    if active is None:
        return np.mean(xs * xs, axis=1)
    counts = active.sum(axis=1)
    sums = np.where(active, xs * xs, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def config_digest(config: CrowdConfig, policy: InfluencePolicy) -> str:
    payload = json.dumps({"config": config.to_json(), "policy": policy.to_json()},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# core transition maps
# ---------------------------------------------------------------------------

def population_feedback(state: CrowdState) -> float:
    """Average decision error of the crowd, the signal broadcast to agents."""
    x = np.asarray(state.x, dtype=float)
    if x.size == 0:
        raise ValueError("empty population")
    return float(x.mean())


def _blend(base: np.ndarray, betas, u) -> np.ndarray:
    # beta == 0 must reproduce the independent update bit-for-bit
    blended = (1.0 - betas) * base + betas * u
    return np.where(np.asarray(betas) == 0.0, base, blended)


def _step_states(x: np.ndarray, gains: np.ndarray, betas, u, noise,
                 bound: float) -> np.ndarray:
    base = gains * x + noise
    return np.clip(_blend(base, betas, u), -bound, bound)


def open_loop_step(state: CrowdState, config: CrowdConfig,
                   noise: np.ndarray) -> CrowdState:
    """One independent-learning transition: x <- g*x + noise, clamped."""
    x = np.asarray(state.x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    new = np.clip(config.gain_vector * x + noise,
                  -config.state_bound, config.state_bound)
    return CrowdState(state.t + 1, new)


def soft_feedback_step(state: CrowdState, config: CrowdConfig,
                       policy: InfluencePolicy, noise: np.ndarray) -> CrowdState:
    """One soft-feedback transition.

    The feedback u is the population average of the pre-update state; each
    agent moves to (1-beta)*(g*x + noise) + beta*u with its own weight
    beta in [0, 1), then the state is clamped to the bounded set.
    """
    x = np.asarray(state.x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    u = population_feedback(state)
    gains = config.gain_vector
    betas = policy.weights(x, gains, u, state.t)
    betas_arr = np.asarray(betas, dtype=float)
    if np.any(betas_arr < 0.0) or np.any(betas_arr >= 1.0):
        raise ValueError("invalid influence weight")
    new = _step_states(x, gains, betas, u, noise, config.state_bound)
    return CrowdState(state.t + 1, new)


# ---------------------------------------------------------------------------
# seeded simulation
# ---------------------------------------------------------------------------

def draw_initial(config: CrowdConfig, rng: np.random.Generator,
                 replicates: int | None = None) -> np.ndarray:
    """Sample x(0) per the config's init spec; shape (n,) or (replicates, n)."""
    shape = (config.n,) if replicates is None else (replicates, config.n)
    if isinstance(config.init, ExplicitInit):
        x0 = np.clip(np.asarray(config.init.x0, dtype=float),
                     -config.state_bound, config.state_bound)
        return x0.copy() if replicates is None else np.tile(x0, (replicates, 1))
    spec = config.init
    rows = 1 if replicates is None else replicates
    sign = rng.choice([-1.0, 1.0], size=(rows, 1))
    bias = math.sqrt(spec.bias_fraction * spec.mse0) * sign
    half = math.sqrt(3.0 * (1.0 - spec.bias_fraction) * spec.mse0)
    scatter = rng.uniform(-half, half, size=(rows, config.n))
    x = bias + scatter
    realized = np.mean(x * x, axis=1, keepdims=True)
    x = x * np.sqrt(spec.mse0 / realized)
    x = np.clip(x, -config.state_bound, config.state_bound)
    realized = float(np.mean(x[0] * x[0]))
    if abs(realized - spec.mse0) / spec.mse0 > 0.05:
        raise ValueError("initial MSE unreachable within the state bound")
    return x[0] if replicates is None else x


def draw_noise(config: CrowdConfig, rng: np.random.Generator,
               shape: tuple[int, ...]) -> np.ndarray:
    if config.noise_dist == "uniform":
        half = config.noise_sigma * math.sqrt(3.0)
        return rng.uniform(-half, half, size=shape)
    return rng.normal(0.0, config.noise_sigma, size=shape)


def simulate(config: CrowdConfig, policy: InfluencePolicy, horizon: int,
             seed: int) -> Trajectory:
    """Run the crowd for ``horizon`` steps from a seeded draw of x(0).

    Produces states x(0)..x(horizon-1), i.e. horizon-1 transitions.
    Deterministic: the same (config, policy, horizon, seed) replays the
    exact same trajectory.
    """
    if horizon < 1:
        raise ValueError("empty horizon")
    rng = np.random.default_rng(seed)
    x = draw_initial(config, rng)
    gains = config.gain_vector
    xs = np.empty((horizon, config.n))
    xs[0] = x
    for t in range(horizon - 1):
        u = x.mean()
        noise = draw_noise(config, rng, (config.n,))
        betas = policy.weights(x, gains, u, t)
        x = _step_states(x, gains, betas, u, noise, config.state_bound)
        xs[t + 1] = x
    return Trajectory(xs, seed=seed, config_digest=config_digest(config, policy))


@dataclass
class BatchDraws:
    """Pre-drawn randomness for a batch of replicates.

    ``std_noise`` holds unit-variance noise in the config's distribution,
    shaped (horizon-1, replicates, n); the actual noise scale is applied
    at run time, so the same draws serve as common random numbers across
    candidate parameters as well as candidate policies.
    """

    x0: np.ndarray
    std_noise: np.ndarray


def draw_batch(config: CrowdConfig, horizon: int, replicates: int,
               seed: int) -> BatchDraws:
    if horizon < 1:
        raise ValueError("empty horizon")
    if replicates < 1:
        raise ValueError("need at least one replicate")
    rng = np.random.default_rng(seed)
    x0 = draw_initial(config, rng, replicates=replicates)
    shape = (max(horizon - 1, 0), replicates, config.n)
    if config.noise_dist == "uniform":
        std = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=shape)
    else:
        std = rng.standard_normal(shape)
    return BatchDraws(x0=x0, std_noise=std)


def run_batch_mse(config: CrowdConfig, policy: InfluencePolicy, horizon: int,
                  draws: BatchDraws) -> tuple[np.ndarray, np.ndarray]:
    """Advance every replicate through the horizon; returns (mean_mse, costs)."""
    x = draws.x0.copy()
    gains = config.gain_vector
    replicates = x.shape[0]
    mse_sum = np.zeros(horizon)
    costs = np.zeros(replicates)
    step_mse = np.mean(x * x, axis=1)
    mse_sum[0] = step_mse.sum()
    costs += step_mse
    for t in range(horizon - 1):
        u = x.mean(axis=1, keepdims=True)
        noise = config.noise_sigma * draws.std_noise[t]
        betas = policy.weights(x, gains, u, t)
        x = _step_states(x, gains, betas, u, noise, config.state_bound)
        step_mse = np.mean(x * x, axis=1)
        mse_sum[t + 1] = step_mse.sum()
        costs += step_mse
    return mse_sum / replicates, costs


def simulate_mean_mse(config: CrowdConfig, policy: InfluencePolicy, horizon: int,
                      replicates: int, seed: int,
                      draws: BatchDraws | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo average of the MSE time series over seeded replicates.

    Returns (mean_mse, costs): the per-step MSE averaged over replicates,
    and the per-replicate cumulative cost. All randomness comes from a
    single stream seeded with ``seed`` and does not depend on the policy,
    so different policies (or gain/noise candidates, via ``draws``)
    evaluated with the same seed see common random numbers.
    """
    if draws is None:
        draws = draw_batch(config, horizon, replicates, seed)
    return run_batch_mse(config, policy, horizon, draws)


# ---------------------------------------------------------------------------
# asynchronous event logs -> discrete grid
# ---------------------------------------------------------------------------

def make_time_grid(duration_s: float, steps: int) -> np.ndarray:
    """End-of-bin sample times: duration split into ``steps`` equal bins."""
    if steps < 1:
        raise ValueError("empty horizon")
    return duration_s * (np.arange(1, steps + 1) / steps)


def resample_to_grid(events: Iterable[tuple], grid: Sequence[float],
                     theta_star: float,
                     agents: Sequence | None = None) -> Trajectory:
    """Map an asynchronous guess log onto the discrete model grid.

    ``events`` are (agent, timestamp, decision) triples. At each grid
    time an agent's state is its most recent decision minus ``theta_star``
    (last observation carried forward); agents that have not acted yet are
    left out of that step's MSE and feedback. An explicit ``agents``
    roster may list participants; roster members with no events at all are
    dropped and counted in ``dropped_agents``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty horizon")
    ev = sorted(((str(a), float(ts), float(z)) for a, ts, z in events),
                key=lambda e: e[1])
    seen = sorted({a for a, _, _ in ev})
    dropped = 0
    if agents is not None:
        roster = sorted({str(a) for a in agents})
        dropped = len([a for a in roster if a not in seen])
        seen = [a for a in roster if a in seen]
    if not seen:
        raise ValueError("no usable agents")
    index = {a: i for i, a in enumerate(seen)}
    T, n = grid.size, len(seen)
    xs = np.zeros((T, n))
    active = np.zeros((T, n), dtype=bool)
    last = np.full(n, np.nan)
    pos = 0
    for k, edge in enumerate(grid):
        while pos < len(ev) and ev[pos][1] <= edge:
            a, _, z = ev[pos]
            last[index[a]] = z - theta_star
            pos += 1
        known = ~np.isnan(last)
        xs[k, known] = last[known]
        active[k] = known
    return Trajectory(xs, active=active, dropped_agents=dropped)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def _meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")

def write_trajectory_csv(traj: Trajectory, path, config: CrowdConfig | None = None,
                         policy: InfluencePolicy | None = None) -> list[Path]:
    """Write a trajectory in long format plus a JSON metadata sidecar.

    Columns are t, agent_id, x; inactive (agent, step) cells are omitted.
    Floats carry 17 significant digits so a round trip is bit exact.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "agent_id", "x"])
        for t in range(traj.horizon):
            for i in range(traj.n):
                if traj.active is not None and not traj.active[t, i]:
                    continue
                writer.writerow([t, i, format(traj.xs[t, i], ".17g")])
    meta = {
        "n": traj.n,
        "gains": list(config.gains) if config else None,
        "noise_sigma": config.noise_sigma if config else None,
        "seed": traj.seed,
        "policy": policy.to_json() if policy else None,
        "config_digest": traj.config_digest,
        "dropped_agents": traj.dropped_agents,
    }
    meta_path = _meta_path(path)
    meta_path.write_text(json.dumps(meta, indent=2))
    return [path, meta_path]


def read_trajectory_csv(path) -> tuple[Trajectory, dict]:
    """Read a long-format trajectory CSV; returns (trajectory, metadata)."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append((int(row["t"]), int(row["agent_id"]), float(row["x"])))
    if not rows:
        raise ValueError("no usable agents")
    T = max(r[0] for r in rows) + 1
    ids = sorted({r[1] for r in rows})
    index = {a: i for i, a in enumerate(ids)}
    xs = np.zeros((T, len(ids)))
    active = np.zeros((T, len(ids)), dtype=bool)
    for t, a, x in rows:
        xs[t, index[a]] = x
        active[t, index[a]] = True
    meta: dict = {}
    meta_path = _meta_path(path)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
    if active.all():
        active = None
    traj = Trajectory(xs, seed=meta.get("seed"),
                      config_digest=meta.get("config_digest", ""), active=active)
    return traj, meta
