/**
 * Pure HTML renderers: UiState in, markup string out.
 *
 * No DOM access here; main.ts assigns the output to innerHTML and the
 * tests assert on the strings directly.
 */

import { Snapshot, ThreadInfo } from "./protocol.js";
import { probeBudget, UiState } from "./state.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderThreads(state: UiState): string {
  const rows = state.snapshot.threads.map((t: ThreadInfo) => {
    const focus = t.tid === state.snapshot.focus ? "*" : "";
    const loc = t.loc ? `${t.loc.file}:${t.loc.line}` : "-";
    const frames = t.frames.map((f) => f.function).join(" &lt; ");
    return (
      `<tr class="thread thread-${t.status}">` +
      `<td>${focus}${t.tid}</td><td>${t.status}</td>` +
      `<td>${esc(loc)}</td><td>${frames}</td></tr>`
    );
  });
  return (
    '<table class="threads"><tr><th>tid</th><th>status</th>' +
    "<th>where</th><th>stack</th></tr>" +
    rows.join("") +
    "</table>"
  );
}

export function renderSource(state: UiState): string {
  const src = state.snapshot.source;
  if (!src) return '<div class="source empty">no source position</div>';
  const culprit = state.search.done;
  const rows: string[] = [];
  for (let i = 0; i < src.lines.length; i++) {
    const n = src.first_line + i;
    const classes = ["srcline"];
    if (n === src.line) classes.push("current");
    if (culprit && culprit.file === src.file && culprit.line === n) {
      classes.push("culprit");
    }
    rows.push(
      `<div class="${classes.join(" ")}">` +
        `<span class="lineno">${n}</span>` +
        `<code>${esc(src.lines[i])}</code></div>`,
    );
  }
  return `<div class="source" data-file="${esc(src.file)}">${rows.join("")}</div>`;
}

export function renderTimeline(state: UiState): string {
  const end = state.snapshot.stats.record_end ?? state.position.gstep;
  const marks = state.checkpoints.map((c) => {
    const kind = c.label === "intermediate" ? "intermediate" : "user";
    const pct = end > 0 ? Math.round((c.gstep / end) * 100) : 0;
    return (
      `<span class="ckpt ${kind}" style="left:${pct}%" ` +
      `title="ckpt ${c.ckpt_id} @ gstep ${c.gstep}"></span>`
    );
  });
  const cursor =
    end > 0 ? Math.round((state.position.gstep / end) * 100) : 0;
  return (
    '<div class="timeline">' +
    marks.join("") +
    `<span class="cursor" style="left:${cursor}%"></span>` +
    `<span class="label">gstep ${state.position.gstep} / ${end}</span>` +
    "</div>"
  );
}

export function renderSearch(state: UiState): string {
  const s = state.search;
  const budget = probeBudget(state.snapshot.stats.record_end ?? 1);
  const stages = ["A", "B", "C", "D"].map((st) => {
    const active = st === s.stage ? " active" : "";
    const seen = s.windows[st] ? " visited" : "";
    const last = s.windows[st]?.at(-1);
    const size = last === undefined ? "" : ` (${last})`;
    return `<span class="stage${active}${seen}">${st}${size}</span>`;
  });
  const done = s.done
    ? `<div class="verdict">culprit: tid ${s.done.tid} at ` +
      `${esc(s.done.file)}:${s.done.line}</div>`
    : "";
  const health = s.windowsMonotone ? "ok" : "regressed";
  return (
    '<div class="search">' +
    `<div class="stages">${stages.join(" ")}</div>` +
    `<div class="probes">probes ${s.probes} / budget ${budget}</div>` +
    `<div class="windows ${health}">windows ${health}</div>` +
    done +
    "</div>"
  );
}

export function renderEventLog(state: UiState): string {
  const snap: Snapshot = state.snapshot;
  const lines = state.outputs.map(
    (t) => `<div class="out">${esc(t)}</div>`,
  );
  return (
    '<div class="eventlog">' +
    `<div class="cursor">log ${snap.log_cursor} / ${snap.log_length}</div>` +
    lines.join("") +
    "</div>"
  );
}

export function renderApp(state: UiState): string {
  const fault = state.snapshot.fault_detail
    ? `<div class="fault">${esc(state.snapshot.fault_detail)}</div>`
    : "";
  return (
    `<header>fred &mdash; ${state.role} &mdash; phase ${state.snapshot.phase}</header>` +
    fault +
    renderTimeline(state) +
    renderSource(state) +
    renderThreads(state) +
    renderSearch(state) +
    renderEventLog(state)
  );
}
