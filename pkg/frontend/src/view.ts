// View-state bookkeeping: merging server payloads into the ClientView and
// validating input before it is allowed anywhere near the network.

import {
  ClientView,
  GUESS_MAX,
  GUESS_MIN,
  GuessResponse,
  RECENT_LIMIT,
  StateResponse,
} from "./types.js";

export function emptyView(): ClientView {
  return {
    phase: "practice",
    clockRemaining: 0,
    guessCount: 0,
    lastGuess: null,
    lastFitness: null,
    score: 0,
    scoreHistory: [],
    recommendationMessage: null,
    recent: [],
    flash: false,
    error: null,
    connected: true,
  };
}

export type GuessCheck =
  | { ok: true; value: number }
  | { ok: false; message: string };

export function validateGuess(raw: string | number): GuessCheck {
  const value = typeof raw === "number" ? raw : Number(String(raw).trim());
  if (!Number.isFinite(value)) {
    return { ok: false, message: "enter a number of kcal" };
  }
  if (value < GUESS_MIN || value > GUESS_MAX) {
    return {
      ok: false,
      message: `guess must be between ${GUESS_MIN} and ${GUESS_MAX} kcal`,
    };
  }
  return { ok: true, value };
}

export function mergeState(view: ClientView, state: StateResponse): ClientView {
  const player = state.player;
  return {
    ...view,
    phase: state.phase,
    clockRemaining: Math.max(state.phase_seconds - state.clock, 0),
    guessCount: player ? player.guess_count : view.guessCount,
    lastGuess: player ? player.last_guess : view.lastGuess,
    lastFitness: player ? player.last_fitness : view.lastFitness,
    score: player ? player.score : view.score,
    recent: player ? player.history.slice(-RECENT_LIMIT) : view.recent,
    recommendationMessage:
      state.phase === "soft_feedback" && state.recommendation_message
        ? state.recommendation_message
        : null,
    flash: false,
    error: null,
    connected: true,
  };
}

export function mergeGuess(
  view: ClientView,
  guess: number,
  resp: GuessResponse,
): ClientView {
  const recent = [...view.recent, [guess, resp.fitness] as [number, number]];
  return {
    ...view,
    guessCount: resp.guess_count,
    lastGuess: guess,
    lastFitness: resp.fitness,
    score: resp.score_total,
    scoreHistory: [...view.scoreHistory, resp.score_total].slice(-RECENT_LIMIT),
    recent: recent.slice(-RECENT_LIMIT),
    recommendationMessage:
      view.phase === "soft_feedback" && resp.recommendation_message
        ? resp.recommendation_message
        : null,
    flash: resp.score_delta > 0,
    error: null,
    connected: true,
  };
}

/** Display-only clamp: raw readings may leave [0, 1], the percent shown
 *  never does. */
export function displayFitness(fitness: number | null): string {
  if (fitness === null) {
    return "-";
  }
  const clamped = Math.min(Math.max(fitness, 0), 1);
  return `${Math.round(clamped * 100)}%`;
}

export function formatClock(seconds: number): string {
  const whole = Math.max(Math.ceil(seconds), 0);
  const m = Math.floor(whole / 60);
  const s = whole % 60;
  return `${m}:${String(s).padStart(2, "0")}`;
}
