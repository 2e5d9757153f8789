import { describe, expect, it } from "vitest";

import {
  displayFitness,
  emptyView,
  formatClock,
  mergeGuess,
  mergeState,
  validateGuess,
} from "../src/view.js";
import { guessPayload } from "./stub_server.js";

describe("validateGuess", () => {
  it("accepts the in-range values the server accepts", () => {
    expect(validateGuess(2250)).toEqual({ ok: true, value: 2250 });
    expect(validateGuess("1500")).toEqual({ ok: true, value: 1500 });
    expect(validateGuess("3000")).toEqual({ ok: true, value: 3000 });
  });

  it("rejects out-of-range and non-numeric input", () => {
    expect(validateGuess(1499).ok).toBe(false);
    expect(validateGuess(3001).ok).toBe(false);
    expect(validateGuess("two thousand").ok).toBe(false);
    expect(validateGuess("").ok).toBe(false);
  });
});

describe("displayFitness", () => {
  it("formats as a whole percent", () => {
    expect(displayFitness(0.9512)).toBe("95%");
    expect(displayFitness(null)).toBe("-");
  });

  it("clamps only for display", () => {
    expect(displayFitness(-0.031)).toBe("0%");
    expect(displayFitness(1.02)).toBe("100%");
    const view = mergeGuess(emptyView(), 2000, guessPayload({ fitness: -0.031 }));
    expect(view.lastFitness).toBe(-0.031);
    expect(view.recent[0][1]).toBe(-0.031);
  });
});

describe("mergeGuess", () => {
  it("keeps at most ten recent entries, newest last", () => {
    let view = emptyView();
    for (let k = 0; k < 12; k++) {
      view = mergeGuess(view, 2000 + k,
        guessPayload({ fitness: 0.5 + k / 100, guess_count: k + 1 }));
    }
    expect(view.recent).toHaveLength(10);
    expect(view.recent[9][0]).toBe(2011);
    expect(view.recent[0][0]).toBe(2002);
    expect(view.guessCount).toBe(12);
  });

  it("flashes exactly when a point is scored", () => {
    const scored = mergeGuess(emptyView(), 2250,
      guessPayload({ fitness: 0.995, score_delta: 1, score_total: 3 }));
    expect(scored.flash).toBe(true);
    expect(scored.score).toBe(3);
    const plain = mergeGuess(emptyView(), 2250, guessPayload());
    expect(plain.flash).toBe(false);
  });

  it("drops the recommendation outside the treatment phase", () => {
    const open = mergeGuess(emptyView(), 2200,
      guessPayload({ recommendation_message: "We recommend 2300 kcal" }));
    expect(open.recommendationMessage).toBeNull();
    const soft = mergeGuess({ ...emptyView(), phase: "soft_feedback" }, 2200,
      guessPayload({ recommendation: 2300,
                     recommendation_message: "We recommend 2300 kcal" }));
    expect(soft.recommendationMessage).toBe("We recommend 2300 kcal");
  });
});

describe("mergeState", () => {
  it("takes everything from the payload", () => {
    const view = mergeState(emptyView(), {
      session_id: "s",
      phase: "soft_feedback",
      clock: 30,
      phase_seconds: 240,
      players: 1,
      bots: 5,
      recommendation: 2300,
      recommendation_message: "We recommend 2300 kcal",
      player: {
        player_id: "p0",
        last_guess: 2280,
        last_fitness: 0.97,
        guess_count: 7,
        score: 2,
        history: [[2280, 0.97]],
      },
    });
    expect(view.phase).toBe("soft_feedback");
    expect(view.clockRemaining).toBe(210);
    expect(view.guessCount).toBe(7);
    expect(view.recommendationMessage).toBe("We recommend 2300 kcal");
  });
});

describe("formatClock", () => {
  it("renders minutes:seconds", () => {
    expect(formatClock(240)).toBe("4:00");
    expect(formatClock(61.2)).toBe("1:02");
    expect(formatClock(0)).toBe("0:00");
  });
});
