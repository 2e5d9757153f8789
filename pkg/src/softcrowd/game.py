"""The Fitness Game engine: live sessions of humans and simulated bot agents.

Players repeatedly guess a diet level; the server returns a noisy fitness
reading of a hidden concave target and, during the treatment phase, a live
population recommendation (the mean of everyone's most recent guess).
Bot agents follow the crowd-learning update on a fixed cadence so a single
human can play inside a populated crowd.

All timing is driven by a caller-supplied clock value, and all randomness
comes from one per-session generator, so a scripted session replays
bit-exactly under a fixed seed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DEFAULT_BIAS_FRACTION, Trajectory, make_time_grid, resample_to_grid

PRACTICE = "practice"
OPEN_LOOP = "open_loop"
SOFT_FEEDBACK = "soft_feedback"
FINISHED = "finished"
SCORED_PHASES = (OPEN_LOOP, SOFT_FEEDBACK)
HISTORY_LIMIT = 10


@dataclass(frozen=True)
class BotParams:
    """Learning parameters of the simulated agents."""

    gain: float = 0.75
    sigma: float = 60.0
    beta: float = 0.32
    init_mse: float = 72000.0
    init_bias_fraction: float = DEFAULT_BIAS_FRACTION
    state_bound: float = 500.0


@dataclass(frozen=True)
class GameConfig:
    """Constants of the Fitness Game."""

    theta_star_range: tuple[float, float] = (2000.0, 2500.0)
    f0: float = 0.98
    kappa: float = 500.0
    fitness_noise_halfwidth: float = 0.02
    score_threshold: float = 0.99
    phase_seconds: float = 240.0
    guess_range: tuple[float, float] = (1500.0, 3000.0)
    n_bots: int = 0
    bot_params: BotParams = field(default_factory=BotParams)
    bot_tick_seconds: float = 8.0


@dataclass
class PlayerState:
    player_id: str
    is_bot: bool = False
    last_guess: float | None = None
    last_fitness: float | None = None
    guess_count: int = 0
    score: int = 0
    history: list[tuple[float, float]] = field(default_factory=list)
    phase_guess: float | None = None       # most recent guess in the current phase

    def view(self) -> dict:
        return {
            "player_id": self.player_id,
            "is_bot": self.is_bot,
            "last_guess": self.last_guess,
            "last_fitness": self.last_fitness,
            "guess_count": self.guess_count,
            "score": self.score,
            "history": [list(h) for h in self.history],
        }


@dataclass
class GuessEvent:
    phase: str
    player_id: str
    timestamp_s: float
    guess: float
    fitness: float
    score_delta: int


class GameSession:
    """One live run of the Fitness Game.

    Mutations (guesses, bot ticks, phase advances) must be serialized by
    the caller; the session itself is single-writer. ``now`` arguments are
    seconds on any monotone clock shared by all calls for this session.
    """

    def __init__(self, session_id: str, config: GameConfig, seed: int,
                 created_at: float = 0.0):
        self.id = session_id
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.created_at = created_at
        self.phase = PRACTICE
        self.phase_started_at = created_at
        self.theta_star = self._sample_theta()
        self.theta_by_phase: dict[str, float] = {PRACTICE: self.theta_star}
        self.phase_offsets: dict[str, float] = {PRACTICE: 0.0}
        self.players: dict[str, PlayerState] = {}
        self.recommendation: float | None = None
        self.events: list[GuessEvent] = []
        self._bot_errors: dict[str, float] = {}
        self._next_bot_tick: float | None = None
        self._bot_serial = 0
        for _ in range(config.n_bots):
            self._add_bot()

    # -- setup ------------------------------------------------------------

    def _sample_theta(self) -> float:
        lo, hi = self.config.theta_star_range
        return float(self.rng.uniform(lo, hi))

    def _add_bot(self):
        bot_id = f"bot-{self._bot_serial}"
        self._bot_serial += 1
        self.players[bot_id] = PlayerState(player_id=bot_id, is_bot=True)
        self._bot_errors[bot_id] = 0.0

    def add_player(self, player_id: str | None = None) -> str:
        if self.phase == FINISHED:
            raise ValueError("session over")
        if player_id is None:
            player_id = f"player-{sum(not p.is_bot for p in self.players.values())}"
        if player_id in self.players:
            raise ValueError(f"player {player_id!r} already joined")
        self.players[player_id] = PlayerState(player_id=player_id)
        return player_id

    @property
    def bot_ids(self) -> list[str]:
        return sorted(self._bot_errors)

    # -- clock ------------------------------------------------------------

    def clock(self, now: float) -> float:
        return max(now - self.phase_started_at, 0.0)

    def advance(self, now: float):
        """Catch up every due bot tick and phase transition, in time order."""
        while True:
            boundary = None
            if self.phase in SCORED_PHASES:
                boundary = self.phase_started_at + self.config.phase_seconds
            tick = self._next_bot_tick
            if tick is not None and (boundary is None or tick < boundary) and tick <= now:
                self._run_bot_tick(tick)
            elif boundary is not None and boundary <= now:
                self._enter_next_phase(boundary)
            else:
                return

    def _enter_next_phase(self, at: float):
        if self.phase == OPEN_LOOP:
            self._begin_phase(SOFT_FEEDBACK, at, resample_theta=True)
        elif self.phase == SOFT_FEEDBACK:
            self.phase = FINISHED
            self.phase_started_at = at
            self.phase_offsets[FINISHED] = at - self.created_at
            self._next_bot_tick = None
            self.recommendation = None

    def _begin_phase(self, phase: str, at: float, resample_theta: bool):
        self.phase = phase
        self.phase_started_at = at
        self.phase_offsets[phase] = at - self.created_at
        if resample_theta:
            self.theta_star = self._sample_theta()
        self.theta_by_phase[phase] = self.theta_star
        self.recommendation = None
        for p in self.players.values():
            p.score = 0
            p.phase_guess = None
        if phase == OPEN_LOOP:
            self._init_bot_errors()
        else:
            # players carry their previous decisions into the reset game,
            # so the new errors share the common offset theta_old - theta_new
            for bot_id in self.bot_ids:
                prev = self.players[bot_id].last_guess
                if prev is not None:
                    err = prev - self.theta_star
                    bound = self.config.bot_params.state_bound
                    self._bot_errors[bot_id] = float(np.clip(err, -bound, bound))
        if self._bot_errors:
            self._next_bot_tick = at

    def _init_bot_errors(self):
        bp = self.config.bot_params
        n = len(self._bot_errors)
        if n == 0:
            return
        sign = self.rng.choice([-1.0, 1.0])
        bias = math.sqrt(bp.init_bias_fraction * bp.init_mse) * sign
        half = math.sqrt(3.0 * (1.0 - bp.init_bias_fraction) * bp.init_mse)
        scatter = self.rng.uniform(-half, half, size=n)
        x = bias + scatter
        x = x * math.sqrt(bp.init_mse / float(np.mean(x * x)))
        x = np.clip(x, -bp.state_bound, bp.state_bound)
        for bot_id, err in zip(self.bot_ids, x):
            self._bot_errors[bot_id] = float(err)

    def start(self, now: float):
        """Explicitly begin the first scored phase."""
        if self.phase != PRACTICE:
            raise ValueError("session already started")
        self._begin_phase(OPEN_LOOP, now, resample_theta=True)
        self.advance(now)

    # -- core mechanics ---------------------------------------------------

    def sample_fitness(self, guess: float) -> float:
        """Noisy fitness of a guess: f0 - ((guess - theta*)/kappa)^2 + noise.

        The uniform noise may push the value above f0 or below zero; the
        raw reading is returned unclamped.
        """
        lo, hi = self.config.guess_range
        if not lo <= guess <= hi:
            raise ValueError(f"guess out of range [{lo:g}, {hi:g}] kcal")
        x = (guess - self.theta_star) / self.config.kappa
        w = self.config.fitness_noise_halfwidth
        noise = float(self.rng.uniform(-w, w))
        return self.config.f0 - x * x + noise

    def _recompute_recommendation(self):
        guesses = [p.phase_guess for p in self.players.values()
                   if p.phase_guess is not None]
        self.recommendation = float(np.mean(guesses)) if guesses else None

    def _record_guess(self, player: PlayerState, guess: float,
                      now: float) -> dict:
        fitness = self.sample_fitness(guess)
        score_delta = 0
        if self.phase in SCORED_PHASES and fitness >= self.config.score_threshold:
            score_delta = 1
        player.last_guess = guess
        player.last_fitness = fitness
        player.guess_count += 1
        player.score += score_delta
        player.phase_guess = guess
        player.history.append((guess, fitness))
        del player.history[:-HISTORY_LIMIT]
        self.events.append(GuessEvent(self.phase, player.player_id,
                                      now - self.created_at, guess, fitness,
                                      score_delta))
        result = {
            "fitness": fitness,
            "score_delta": score_delta,
            "score_total": player.score,
            "guess_count": player.guess_count,
        }
        if self.phase == SOFT_FEEDBACK:
            self._recompute_recommendation()
            result["recommendation"] = self.recommendation
            result["recommendation_message"] = recommendation_message(
                self.recommendation)
        return result

    def submit_guess(self, player_id: str, guess: float, now: float) -> dict:
        """Register a human guess; returns fitness, score and feedback fields."""
        self.advance(now)
        if self.phase == FINISHED:
            raise ValueError("session over")
        player = self.players.get(player_id)
        if player is None:
            raise KeyError(f"unknown player {player_id!r}")
        if player.is_bot:
            raise ValueError("bots cannot take manual guesses")
        return self._record_guess(player, float(guess), now)

    def _run_bot_tick(self, at: float):
        bp = self.config.bot_params
        beta = bp.beta if self.phase == SOFT_FEEDBACK else 0.0
        # feedback basis is the pre-tick snapshot, shared by every bot
        u = None
        if beta > 0.0 and self.recommendation is not None:
            u = self.recommendation - self.theta_star
        first_tick = at == self.phase_started_at
        for bot_id in self.bot_ids:
            x = self._bot_errors[bot_id]
            if not first_tick:
                noise = float(self.rng.normal(0.0, bp.sigma))
                own = bp.gain * x + noise
                x = own if u is None else (1.0 - beta) * own + beta * u
                x = float(np.clip(x, -bp.state_bound, bp.state_bound))
                self._bot_errors[bot_id] = x
            guess = self.theta_star + x
            lo, hi = self.config.guess_range
            self._record_guess(self.players[bot_id],
                               float(np.clip(guess, lo, hi)), at)
        self._next_bot_tick = at + self.config.bot_tick_seconds

    # -- views and export ---------------------------------------------------

    def state_view(self, now: float, player_id: str | None = None) -> dict:
        self.advance(now)
        view = {
            "session_id": self.id,
            "phase": self.phase,
            "clock": self.clock(now),
            "phase_seconds": self.config.phase_seconds,
            "players": sum(1 for p in self.players.values() if not p.is_bot),
            "bots": len(self._bot_errors),
        }
        if self.phase == SOFT_FEEDBACK and self.recommendation is not None:
            view["recommendation"] = self.recommendation
            view["recommendation_message"] = recommendation_message(self.recommendation)
        if player_id is not None:
            player = self.players.get(player_id)
            if player is None:
                raise KeyError(f"unknown player {player_id!r}")
            view["player"] = player.view()
        return view

    def export_csv(self) -> str:
        """Event log of a finished session, one row per guess."""
        if self.phase != FINISHED:
            raise ValueError("session not finished")
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["phase", "player_id", "timestamp_s", "guess",
                         "fitness", "score_delta"])
        for ev in self.events:
            writer.writerow([ev.phase, ev.player_id,
                             format(ev.timestamp_s, ".17g"),
                             format(ev.guess, ".17g"),
                             format(ev.fitness, ".17g"), ev.score_delta])
        return buf.getvalue()

    def export_metadata(self) -> dict:
        if self.phase != FINISHED:
            raise ValueError("session not finished")
        return {
            "session_id": self.id,
            "seed": self.seed,
            "theta_star_by_phase": dict(self.theta_by_phase),
            "phase_offsets_s": dict(self.phase_offsets),
            "phase_seconds": self.config.phase_seconds,
            "n_bots": self.config.n_bots,
            "bot_params": dict(self.config.bot_params.__dict__),
            "bot_tick_seconds": self.config.bot_tick_seconds,
        }

    def phase_events(self, phase: str) -> list[tuple[str, float, float]]:
        """(player, seconds-into-phase, guess) triples for one phase."""
        offset = self.phase_offsets.get(phase)
        if offset is None:
            return []
        return [(ev.player_id, ev.timestamp_s - offset, ev.guess)
                for ev in self.events if ev.phase == phase]


def recommendation_message(value: float) -> str:
    return f"We recommend {round(value):d} kcal"


def phase_trajectory(session: GameSession, phase: str, steps: int = 30,
                     align_to_ticks: bool = True) -> Trajectory:
    """Resample one phase of a finished session onto the analysis grid.

    Sessions with bots emit guesses on the tick cadence starting at the
    phase opening, so sampling at the tick times recovers the underlying
    states exactly; ``align_to_ticks=False`` falls back to end-of-bin
    sampling for logs with no such structure.
    """
    events = session.phase_events(phase)
    if align_to_ticks:
        grid = session.config.phase_seconds * np.arange(steps) / steps
    else:
        grid = make_time_grid(session.config.phase_seconds, steps)
    theta = session.theta_by_phase[phase]
    return resample_to_grid(events, grid, theta)


def events_from_export(csv_text: str, phase: str,
                       metadata: dict) -> list[tuple[str, float, float]]:
    """Recover (player, phase-relative time, guess) triples from an export."""
    offset = metadata["phase_offsets_s"][phase]
    out = []
    for row in csv.DictReader(io.StringIO(csv_text)):
        if row["phase"] == phase:
            out.append((row["player_id"], float(row["timestamp_s"]) - offset,
                        float(row["guess"])))
    return out
