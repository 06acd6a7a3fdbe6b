"""The deterministic-replay event log.

A single global, append-only, totally ordered log of synchronization-
relevant events.  Recording uses a two-phase reserve/fill API: a slot is
assigned its sequence number the moment the event triggers, and becomes
visible to replay only once filled.  Replay gates each intended action
against the entry at the cursor; a thread whose action does not match is
descheduled by the VM until the cursor advances.

On-disk format (little-endian):
    header:  8s magic "FREDLOG1", u32 version, u64 entry count
    entry:   u32 total length (seqno+tid+kind+payload), u64 seqno,
             u16 tid, u8 kind, payload (kind-specific, variable size)
"""

import struct
from collections import Counter

from .errors import (BadMagic, DoubleFill, FillOfForeignSlot, LogError,
                     TruncatedEntry, VersionMismatch)

MAGIC = b"FREDLOG1"
VERSION = 1
_HEADER = struct.Struct("<8sIQ")
_ENTRY_HEAD = struct.Struct("<IQHB")


class EventKind:
    LOCK_ACQUIRE = 1
    LOCK_RELEASE = 2
    THREAD_CREATE = 3
    THREAD_EXIT = 4
    JOIN = 5
    ALLOC = 6
    FREE = 7
    REALLOC = 8
    CLOCK_READ = 9
    RAND_READ = 10
    INPUT_READ = 11

    NAMES = {
        1: "LockAcquire", 2: "LockRelease", 3: "ThreadCreate", 4: "ThreadExit",
        5: "Join", 6: "Alloc", 7: "Free", 8: "Realloc", 9: "ClockRead",
        10: "RandRead", 11: "InputRead",
    }


# payload schema per kind: struct format, or None for variable (InputRead).
_PAYLOAD_FMT = {
    EventKind.LOCK_ACQUIRE: struct.Struct("<Q"),
    EventKind.LOCK_RELEASE: struct.Struct("<Q"),
    EventKind.THREAD_CREATE: struct.Struct("<Q"),
    EventKind.THREAD_EXIT: struct.Struct("<"),
    EventKind.JOIN: struct.Struct("<Q"),
    EventKind.ALLOC: struct.Struct("<QQ"),
    EventKind.FREE: struct.Struct("<Q"),
    EventKind.REALLOC: struct.Struct("<QQQ"),
    EventKind.CLOCK_READ: struct.Struct("<Q"),
    EventKind.RAND_READ: struct.Struct("<Q"),
}


class Event:
    __slots__ = ("seqno", "tid", "kind", "payload", "filled")

    def __init__(self, seqno, tid, kind, payload=None, filled=False):
        self.seqno = seqno
        self.tid = tid
        self.kind = kind
        self.payload = payload  # tuple (or bytes for InputRead)
        self.filled = filled

    def __eq__(self, other):
        return (isinstance(other, Event)
                and self.seqno == other.seqno and self.tid == other.tid
                and self.kind == other.kind and self.payload == other.payload)

    def __repr__(self):
        return "Event(%d, tid=%d, %s, %r)" % (
            self.seqno, self.tid, EventKind.NAMES.get(self.kind, self.kind), self.payload)

    def encoded_payload(self):
        if self.kind == EventKind.INPUT_READ:
            data = self.payload
            return struct.pack("<I", len(data)) + data
        return _PAYLOAD_FMT[self.kind].pack(*self.payload)

    def dump_line(self):
        name = EventKind.NAMES.get(self.kind, str(self.kind))
        if self.kind == EventKind.INPUT_READ:
            payload = "%d %r" % (len(self.payload), self.payload)
        else:
            payload = " ".join(str(v) for v in self.payload)
        return ("%d %d %s %s" % (self.seqno, self.tid, name, payload)).rstrip()


class Slot:
    """Handle for a reserved-but-unfilled log entry."""

    __slots__ = ("log", "event")

    def __init__(self, log, event):
        self.log = log
        self.event = event

    @property
    def seqno(self):
        return self.event.seqno


class EventLog:
    def __init__(self):
        self.entries = []
        self.replay_cursor = 0

    @property
    def record_head(self):
        """Next free seqno."""
        return len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, EventLog) and self.entries == other.entries

    # -- record side ---------------------------------------------------
    def reserve(self, tid, kind):
        """Reserve the next seqno for `tid`; fill the payload later."""
        ev = Event(len(self.entries), tid, kind)
        self.entries.append(ev)
        return Slot(self, ev)

    def fill(self, slot, payload):
        if not isinstance(slot, Slot) or slot.log is not self:
            raise FillOfForeignSlot("slot does not belong to this log")
        if slot.event.filled:
            raise DoubleFill("slot %d already filled" % slot.event.seqno)
        slot.event.payload = payload
        slot.event.filled = True
        return slot.event

    def append(self, tid, kind, payload):
        """reserve+fill in one step (the common single-driver path)."""
        return self.fill(self.reserve(tid, kind), payload)

    # -- replay side ---------------------------------------------------
    def head(self):
        """The entry at the replay cursor, or None at end of log."""
        if self.replay_cursor >= len(self.entries):
            return None
        ev = self.entries[self.replay_cursor]
        return ev if ev.filled else None

    def gate(self, tid, kind, key=None):
        """Return the head event as a permit iff it matches the intended
        action; otherwise None (caller should deschedule the thread).

        `key` optionally pins the first payload field (e.g. a lock id)."""
        ev = self.head()
        if ev is None or ev.tid != tid or ev.kind != kind:
            return None
        if key is not None and ev.kind != EventKind.INPUT_READ and ev.payload[0] != key:
            return None
        return ev

    def consume(self, permit):
        """Advance the cursor past a permit returned by gate()."""
        if self.head() is not permit:
            raise LogError("consume of stale permit")
        self.replay_cursor += 1
        return permit

    def truncate(self, n):
        """Drop entries with seqno >= n (recovery after a partial load)."""
        del self.entries[n:]
        self.replay_cursor = min(self.replay_cursor, n)

    # -- persistence ---------------------------------------------------
    def save(self, path):
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, VERSION, len(self.entries)))
            for ev in self.entries:
                if not ev.filled:
                    raise LogError("cannot save: slot %d reserved but unfilled" % ev.seqno)
                payload = ev.encoded_payload()
                f.write(_ENTRY_HEAD.pack(11 + len(payload), ev.seqno, ev.tid, ev.kind))
                f.write(payload)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            data = f.read()
        if len(data) < _HEADER.size:
            raise BadMagic("file too short for header")
        magic, version, count = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise BadMagic("bad magic %r" % magic)
        if version != VERSION:
            raise VersionMismatch("log version %d, expected %d" % (version, VERSION))
        log = cls()
        off = _HEADER.size
        for _ in range(count):
            if off + _ENTRY_HEAD.size > len(data):
                raise TruncatedEntry(log.record_head - 1)
            total, seqno, tid, kind = _ENTRY_HEAD.unpack_from(data, off)
            off += _ENTRY_HEAD.size
            plen = total - 11
            if plen < 0 or off + plen > len(data):
                raise TruncatedEntry(log.record_head - 1)
            raw = data[off:off + plen]
            off += plen
            if kind == EventKind.INPUT_READ:
                (blen,) = struct.unpack_from("<I", raw, 0)
                payload = raw[4:4 + blen]
            else:
                payload = _PAYLOAD_FMT[kind].unpack(raw)
            if seqno != log.record_head:
                raise TruncatedEntry(log.record_head - 1)
            log.entries.append(Event(seqno, tid, kind, payload, filled=True))
        return log

    # -- inspection ----------------------------------------------------
    def stats(self):
        """Histogram of entry kinds and sizes."""
        counts = Counter()
        sizes = Counter()
        for ev in self.entries:
            name = EventKind.NAMES.get(ev.kind, str(ev.kind))
            counts[name] += 1
            sizes[name] += 11 + len(ev.encoded_payload())
        total = sum(counts.values())
        total_bytes = sum(sizes.values())
        return {
            "counts": dict(counts),
            "bytes": dict(sizes),
            "total": total,
            "mean_entry_size": (total_bytes / total) if total else 0.0,
        }

    def dump(self):
        """Textual export, one event per line: `seqno tid KIND payload...`."""
        return "\n".join(ev.dump_line() for ev in self.entries) + ("\n" if self.entries else "")
