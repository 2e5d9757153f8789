// Orchestration between input, API client, and view state. Pure with
// respect to the DOM so the whole flow is testable with a stubbed fetch.

import { ApiError, GameClient } from "./client.js";
import { ClientView } from "./types.js";
import { mergeGuess, mergeState, validateGuess } from "./view.js";

/** Validate locally, then submit; out-of-range input never reaches the
 *  network and server rejections land in `view.error` word for word. */
export async function submitAndUpdate(
  client: GameClient,
  view: ClientView,
  raw: string | number,
): Promise<ClientView> {
  const check = validateGuess(raw);
  if (!check.ok) {
    return { ...view, flash: false, error: check.message };
  }
  try {
    const resp = await client.guess(check.value);
    return mergeGuess(view, check.value, resp);
  } catch (err) {
    if (err instanceof ApiError) {
      return { ...view, flash: false, error: err.message };
    }
    return { ...view, flash: false, error: "server unreachable", connected: false };
  }
}

/** One polling step; a failed poll flips the retry indicator but keeps
 *  the last good screen. */
export async function pollState(
  client: GameClient,
  view: ClientView,
): Promise<ClientView> {
  try {
    return mergeState(view, await client.state());
  } catch {
    return { ...view, connected: false };
  }
}
