// HTML/SVG string rendering of the game screen. Four regions mirror the
// original interface: status (top left), score history (top right), the
// last-ten scatter of fitness vs diet (bottom left), and the last-ten
// fitness history line (bottom right). The recommendation banner appears
// only during the treatment phase.

import { ClientView, GUESS_MAX, GUESS_MIN } from "./types.js";
import { displayFitness, formatClock } from "./view.js";

const W = 320;
const H = 180;
const PAD = 28;

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function scaleX(guess: number): number {
  return PAD + ((guess - GUESS_MIN) / (GUESS_MAX - GUESS_MIN)) * (W - 2 * PAD);
}

function scaleY(fitness: number): number {
  const clamped = Math.min(Math.max(fitness, 0), 1);
  return H - PAD - clamped * (H - 2 * PAD);
}

export function renderBanner(view: ClientView): string {
  if (view.phase !== "soft_feedback" || !view.recommendationMessage) {
    return "";
  }
  return `<div class="banner" id="recommendation">${escapeHtml(view.recommendationMessage)}</div>`;
}

export function renderStatusPanel(view: ClientView): string {
  const flash = view.flash ? " flash-green" : "";
  return `
<div class="panel status${flash}" id="status">
  <div class="row"><span>guesses</span><b>${view.guessCount}</b></div>
  <div class="row"><span>last guess</span><b>${view.lastGuess === null ? "-" : `${view.lastGuess} kcal`}</b></div>
  <div class="row"><span>fitness</span><b>${displayFitness(view.lastFitness)}</b></div>
  <div class="row"><span>score</span><b>${view.score}</b></div>
</div>`;
}

export function renderScorePanel(view: ClientView): string {
  const items = view.scoreHistory.map((s) => `<li>${s}</li>`).join("");
  return `
<div class="panel scores" id="scores">
  <h3>latest scores</h3>
  <ol>${items || "<li>-</li>"}</ol>
</div>`;
}

export function renderScatter(view: ClientView): string {
  const dots = view.recent
    .map(([guess, fitness]) =>
      `<circle cx="${scaleX(guess).toFixed(1)}" cy="${scaleY(fitness).toFixed(1)}" r="4"/>`)
    .join("");
  return `
<div class="panel chart" id="scatter">
  <h3>fitness vs diet (last ${view.recent.length})</h3>
  <svg viewBox="0 0 ${W} ${H}">${axes()}${dots}</svg>
</div>`;
}

export function renderFitnessLine(view: ClientView): string {
  const points = view.recent
    .map(([, fitness], i) => {
      const x = PAD + (view.recent.length === 1
        ? 0
        : (i / (view.recent.length - 1)) * (W - 2 * PAD));
      return `${x.toFixed(1)},${scaleY(fitness).toFixed(1)}`;
    })
    .join(" ");
  const dots = view.recent
    .map(([, fitness], i) => {
      const x = PAD + (view.recent.length === 1
        ? 0
        : (i / (view.recent.length - 1)) * (W - 2 * PAD));
      return `<circle cx="${x.toFixed(1)}" cy="${scaleY(fitness).toFixed(1)}" r="3"/>`;
    })
    .join("");
  const line = view.recent.length > 1
    ? `<polyline fill="none" points="${points}"/>` : "";
  return `
<div class="panel chart" id="fitness-history">
  <h3>fitness history (last ${view.recent.length})</h3>
  <svg viewBox="0 0 ${W} ${H}">${axes()}${line}${dots}</svg>
</div>`;
}

function axes(): string {
  return `<line class="axis" x1="${PAD}" y1="${H - PAD}" x2="${W - PAD}" y2="${H - PAD}"/>`
    + `<line class="axis" x1="${PAD}" y1="${PAD}" x2="${PAD}" y2="${H - PAD}"/>`;
}

export function renderHeader(view: ClientView): string {
  const status = view.connected
    ? "" : `<span class="retry" id="retry">reconnecting...</span>`;
  return `
<div class="header">
  <span class="phase">${view.phase.replace("_", " ")}</span>
  <span class="clock" id="clock">${formatClock(view.clockRemaining)}</span>
  ${status}
</div>`;
}

export function renderError(view: ClientView): string {
  return view.error
    ? `<div class="error" id="error">${escapeHtml(view.error)}</div>` : "";
}

export function renderApp(view: ClientView): string {
  return [
    renderHeader(view),
    renderBanner(view),
    renderError(view),
    '<div class="grid">',
    renderStatusPanel(view),
    renderScorePanel(view),
    renderScatter(view),
    renderFitnessLine(view),
    "</div>",
  ].join("\n");
}
