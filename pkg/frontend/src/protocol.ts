/**
 * Wire protocol types and validation.
 *
 * This file mirrors ../../schema/wire.schema.json, the single source of
 * truth for the session-server protocol: newline-delimited JSON, one
 * message per line.  Everything the UI displays originates from one of
 * these messages.
 */

import { z } from "zod";

export const EVENT_KINDS = [
  "stopped",
  "output",
  "checkpoint-taken",
  "search-progress",
  "search-done",
] as const;

export type EventKind = (typeof EVENT_KINDS)[number];

export const positionSchema = z.object({
  gstep: z.number().int(),
  ckpt_ordinal: z.number().int().nullable().optional(),
  history_index: z.number().int().nullable().optional(),
  step_subindex: z.number().int().nullable().optional(),
  event_seqno: z.number().int().nullable().optional(),
});

export const locSchema = z
  .object({
    file: z.string(),
    line: z.number().int(),
    stmt_id: z.number().int(),
  })
  .nullable();

export const threadSchema = z.object({
  tid: z.number().int(),
  status: z.enum(["runnable", "blocked", "exited", "faulted"]),
  loc: locSchema,
  frames: z.array(z.object({ function: z.string(), ip: z.number().int() })),
});

export const checkpointSchema = z.object({
  ckpt_id: z.number().int(),
  gstep: z.number().int(),
  label: z.string(),
  value: z.string().nullable().optional(),
});

export const searchProgressSchema = z.object({
  stage: z.enum(["A", "B", "C", "D"]),
  left: z.number().int(),
  right: z.number().int(),
  size: z.number().int(),
  granularity: z.enum(["checkpoint", "step", "event"]),
  probes: z.number().int(),
});

export const searchDoneSchema = z.object({
  tid: z.number().int(),
  file: z.string(),
  line: z.number().int(),
  stmt_id: z.number().int(),
  pre_gstep: z.number().int(),
  value_before: z.unknown(),
  value_after: z.unknown(),
  expr: z.string(),
  stats: z.object({
    n_statements: z.number().int(),
    expr_evals: z.number().int(),
    checkpoints: z.number().int(),
    restarts: z.number().int(),
    max_exec_count: z.number().int(),
    probes: z.record(z.number()),
    wall: z.record(z.number()),
    threads_skipped: z.number().int(),
  }),
});

export const snapshotSchema = z.object({
  phase: z.enum(["record", "replay"]),
  end_reason: z.enum(["fault", "program-exit"]).nullable(),
  fault_detail: z.string().nullable(),
  position: positionSchema,
  focus: z.number().int(),
  threads: z.array(threadSchema),
  source: z
    .object({
      file: z.string(),
      line: z.number().int(),
      first_line: z.number().int(),
      lines: z.array(z.string()),
    })
    .nullable(),
  checkpoints: z.array(checkpointSchema),
  breakpoints: z.array(z.object({ id: z.number().int(), line: z.number().int() })),
  log_cursor: z.number().int(),
  log_length: z.number().int(),
  stats: z.object({
    gstep: z.number().int(),
    restarts: z.number().int(),
    record_end: z.number().int().nullable(),
  }),
  last_report: searchDoneSchema.nullable().optional(),
});

export const responseSchema = z.object({
  id: z.unknown(),
  ok: z.boolean(),
  payload: z.unknown().optional(),
  error: z
    .object({ code: z.string(), message: z.string() })
    .optional(),
});

export const eventSchema = z.object({
  event: z.enum(EVENT_KINDS),
  seqno: z.number().int(),
  payload: z.unknown(),
});

export type Position = z.infer<typeof positionSchema>;
export type ThreadInfo = z.infer<typeof threadSchema>;
export type CheckpointInfo = z.infer<typeof checkpointSchema>;
export type SearchProgress = z.infer<typeof searchProgressSchema>;
export type SearchDone = z.infer<typeof searchDoneSchema>;
export type Snapshot = z.infer<typeof snapshotSchema>;
export type WireResponse = z.infer<typeof responseSchema>;
export type WireEvent = z.infer<typeof eventSchema>;

export type ServerMessage =
  | { type: "response"; message: WireResponse }
  | { type: "event"; message: WireEvent };

/** Parse one line from the server. Throws on anything off-schema. */
export function parseServerMessage(line: string): ServerMessage {
  const doc = JSON.parse(line);
  if (typeof doc === "object" && doc !== null && "event" in doc) {
    return { type: "event", message: eventSchema.parse(doc) };
  }
  return { type: "response", message: responseSchema.parse(doc) };
}

export function parseEventPayload(ev: WireEvent):
  | { kind: "stopped"; position: Position; where: string }
  | { kind: "output"; text: string }
  | { kind: "checkpoint-taken"; checkpoint: CheckpointInfo }
  | { kind: "search-progress"; progress: SearchProgress }
  | { kind: "search-done"; report: SearchDone } {
  switch (ev.event) {
    case "stopped": {
      const p = z
        .object({ position: positionSchema, where: z.string() })
        .parse(ev.payload);
      return { kind: "stopped", position: p.position, where: p.where };
    }
    case "output":
      return {
        kind: "output",
        text: z.object({ text: z.string() }).parse(ev.payload).text,
      };
    case "checkpoint-taken":
      return {
        kind: "checkpoint-taken",
        checkpoint: checkpointSchema.parse(ev.payload),
      };
    case "search-progress":
      return {
        kind: "search-progress",
        progress: searchProgressSchema.parse(ev.payload),
      };
    case "search-done":
      return { kind: "search-done", report: searchDoneSchema.parse(ev.payload) };
  }
}
