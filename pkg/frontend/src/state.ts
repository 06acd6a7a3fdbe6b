/**
 * Pure UI state: a snapshot plus a fold over the event stream.
 *
 * Contracts enforced here:
 *   - seqnos are consumed strictly increasing; an event with seqno at or
 *     below the last applied one is a duplicate and is dropped, so a
 *     reconnecting observer can replay from any point without damage;
 *   - per-stage search windows never grow; `windowsMonotone` turns false
 *     the moment a stage reports a larger window than its previous one.
 */

import {
  CheckpointInfo,
  parseEventPayload,
  Position,
  SearchDone,
  SearchProgress,
  Snapshot,
  WireEvent,
} from "./protocol.js";

export interface SearchState {
  stage: SearchProgress["stage"] | null;
  probes: number;
  /** window sizes per stage, in arrival order */
  windows: Record<string, number[]>;
  windowsMonotone: boolean;
  done: SearchDone | null;
}

export interface UiState {
  role: "controller" | "observer";
  snapshot: Snapshot;
  lastSeqno: number;
  position: Position;
  where: string | null;
  outputs: string[];
  checkpoints: CheckpointInfo[];
  search: SearchState;
}

export function initialState(
  role: "controller" | "observer",
  snapshot: Snapshot,
): UiState {
  return {
    role,
    snapshot,
    lastSeqno: -1,
    position: snapshot.position,
    where: null,
    outputs: [],
    checkpoints: [...snapshot.checkpoints],
    search: {
      stage: null,
      probes: 0,
      windows: {},
      windowsMonotone: true,
      done: snapshot.last_report ?? null,
    },
  };
}

export function applyEvent(state: UiState, ev: WireEvent): UiState {
  if (ev.seqno <= state.lastSeqno) return state; // duplicate or replayed
  const next: UiState = { ...state, lastSeqno: ev.seqno };
  const parsed = parseEventPayload(ev);
  switch (parsed.kind) {
    case "stopped":
      next.position = parsed.position;
      next.where = parsed.where;
      break;
    case "output":
      next.outputs = [...state.outputs, parsed.text];
      break;
    case "checkpoint-taken":
      next.checkpoints = [...state.checkpoints, parsed.checkpoint];
      break;
    case "search-progress": {
      const p = parsed.progress;
      const windows = { ...state.search.windows };
      const series = windows[p.stage] ? [...windows[p.stage]] : [];
      let monotone = state.search.windowsMonotone;
      if (series.length > 0 && p.size > series[series.length - 1]) {
        monotone = false;
      }
      series.push(p.size);
      windows[p.stage] = series;
      next.search = {
        ...state.search,
        stage: p.stage,
        probes: p.probes,
        windows,
        windowsMonotone: monotone,
      };
      break;
    }
    case "search-done":
      next.search = { ...state.search, done: parsed.report };
      break;
  }
  return next;
}

export function applyEvents(state: UiState, evs: WireEvent[]): UiState {
  return evs.reduce(applyEvent, state);
}

/** Probe budget the wizard displays: ceil(log2 N) plus slack. */
export function probeBudget(nStatements: number, slack = 8): number {
  if (nStatements <= 1) return slack;
  return Math.ceil(Math.log2(nStatements)) + slack;
}
