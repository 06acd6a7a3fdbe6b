import { describe, expect, it } from "vitest";

import { Snapshot, WireEvent } from "../src/protocol.js";
import { applyEvent, applyEvents, initialState, probeBudget } from "../src/state.js";

function baseSnapshot(): Snapshot {
  return {
    phase: "replay",
    end_reason: "fault",
    fault_detail: "lock of freed mutex",
    position: { gstep: 900, ckpt_ordinal: 3, history_index: 0, step_subindex: 0, event_seqno: null },
    focus: 0,
    threads: [
      { tid: 0, status: "runnable", loc: { file: "p.fr", line: 44, stmt_id: 20 }, frames: [{ function: "main", ip: 9 }] },
      { tid: 1, status: "blocked", loc: { file: "p.fr", line: 18, stmt_id: 8 }, frames: [{ function: "consumer", ip: 2 }] },
    ],
    source: { file: "p.fr", line: 44, first_line: 39, lines: ["a", "b", "c", "d", "e", "f"] },
    checkpoints: [{ ckpt_id: 0, gstep: 64, label: "intermediate", value: null }],
    breakpoints: [],
    log_cursor: 12,
    log_length: 40,
    stats: { gstep: 900, restarts: 2, record_end: 900 },
    last_report: null,
  };
}

function progress(seqno: number, stage: "A" | "B" | "C" | "D", left: number, right: number): WireEvent {
  return {
    event: "search-progress",
    seqno,
    payload: {
      stage,
      left,
      right,
      size: right - left,
      granularity: stage === "A" ? "checkpoint" : stage === "C" ? "event" : "step",
      probes: seqno,
    },
  };
}

describe("state reducer", () => {
  it("folds output and checkpoint events", () => {
    let s = initialState("controller", baseSnapshot());
    s = applyEvents(s, [
      { event: "output", seqno: 0, payload: { text: "12" } },
      { event: "checkpoint-taken", seqno: 1, payload: { ckpt_id: 1, gstep: 128, label: "user" } },
    ]);
    expect(s.outputs).toEqual(["12"]);
    expect(s.checkpoints.map((c) => c.ckpt_id)).toEqual([0, 1]);
    expect(s.lastSeqno).toBe(1);
  });

  it("drops duplicate and replayed seqnos", () => {
    let s = initialState("observer", baseSnapshot());
    const ev: WireEvent = { event: "output", seqno: 5, payload: { text: "x" } };
    s = applyEvent(s, ev);
    s = applyEvent(s, ev);
    s = applyEvent(s, { event: "output", seqno: 4, payload: { text: "stale" } });
    expect(s.outputs).toEqual(["x"]);
    s = applyEvent(s, { event: "output", seqno: 6, payload: { text: "y" } });
    expect(s.outputs).toEqual(["x", "y"]);
  });

  it("tracks shrinking per-stage windows as monotone", () => {
    let s = initialState("controller", baseSnapshot());
    s = applyEvents(s, [
      progress(0, "A", 0, 512),
      progress(1, "A", 0, 256),
      progress(2, "B", 192, 256),
      progress(3, "B", 192, 224),
      progress(4, "C", 200, 210),
      progress(5, "D", 204, 205),
    ]);
    expect(s.search.windowsMonotone).toBe(true);
    expect(s.search.stage).toBe("D");
    expect(s.search.windows["A"]).toEqual([512, 256]);
    expect(s.search.probes).toBe(5);
  });

  it("flags a growing window within a stage", () => {
    let s = initialState("controller", baseSnapshot());
    s = applyEvents(s, [progress(0, "B", 0, 64), progress(1, "B", 0, 128)]);
    expect(s.search.windowsMonotone).toBe(false);
  });

  it("a new stage may start wider than the last one ended", () => {
    // Stage B expands one checkpoint interval into many steps, so the
    // first B window being larger than the final A window is normal.
    let s = initialState("controller", baseSnapshot());
    s = applyEvents(s, [progress(0, "A", 0, 2), progress(1, "B", 0, 128)]);
    expect(s.search.windowsMonotone).toBe(true);
  });

  it("records the search verdict", () => {
    let s = initialState("controller", baseSnapshot());
    s = applyEvent(s, {
      event: "search-done",
      seqno: 9,
      payload: {
        tid: 0,
        file: "p.fr",
        line: 35,
        stmt_id: 19,
        pre_gstep: 260,
        value_before: false,
        value_after: true,
        expr: "fifo.mut == 0",
        stats: {
          n_statements: 900,
          expr_evals: 14,
          checkpoints: 20,
          restarts: 9,
          max_exec_count: 2,
          probes: { A: 4, B: 6, C: 2, D: 2 },
          wall: { total: 0.5 },
          threads_skipped: 0,
        },
      },
    });
    expect(s.search.done?.line).toBe(35);
  });

  it("seeds the verdict from a snapshot with a prior report", () => {
    const snap = baseSnapshot();
    snap.last_report = {
      tid: 1,
      file: "p.fr",
      line: 13,
      stmt_id: 3,
      pre_gstep: 40,
      value_before: false,
      value_after: true,
      expr: "x",
      stats: {
        n_statements: 100,
        expr_evals: 9,
        checkpoints: 5,
        restarts: 3,
        max_exec_count: 1,
        probes: {},
        wall: {},
        threads_skipped: 0,
      },
    };
    const s = initialState("observer", snap);
    expect(s.search.done?.line).toBe(13);
  });

  it("probe budget is ceil(log2 N) plus slack", () => {
    expect(probeBudget(1 << 16)).toBe(24);
    expect(probeBudget(1000, 0)).toBe(10);
    expect(probeBudget(1)).toBe(8);
  });
});
