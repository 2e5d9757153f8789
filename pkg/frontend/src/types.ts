// Payload shapes of the game server API. Every number shown in the UI
// originates from one of these; the client never derives fitness, the
// hidden optimum, or the recommendation on its own.

export type Phase = "practice" | "open_loop" | "soft_feedback" | "finished";

export interface GuessResponse {
  fitness: number;
  score_delta: number;
  score_total: number;
  guess_count: number;
  recommendation?: number;
  recommendation_message?: string;
}

export interface PlayerSnapshot {
  player_id: string;
  last_guess: number | null;
  last_fitness: number | null;
  guess_count: number;
  score: number;
  history: [number, number][];
}

export interface StateResponse {
  session_id: string;
  phase: Phase;
  clock: number;
  phase_seconds: number;
  players: number;
  bots: number;
  recommendation?: number;
  recommendation_message?: string;
  player?: PlayerSnapshot;
}

/** What the screen is rendered from. `recent` keeps at most ten
 *  (guess, fitness) pairs, newest last. */
export interface ClientView {
  phase: Phase;
  clockRemaining: number;
  guessCount: number;
  lastGuess: number | null;
  lastFitness: number | null;
  score: number;
  scoreHistory: number[];
  recommendationMessage: string | null;
  recent: [number, number][];
  flash: boolean;
  error: string | null;
  connected: boolean;
}

export const GUESS_MIN = 1500;
export const GUESS_MAX = 3000;
export const RECENT_LIMIT = 10;
