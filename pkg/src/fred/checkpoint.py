"""Checkpoint images and the checkpoint store.

An image is a full serialized VM state plus the log position and debugger-
history position it was taken at.  Blob layout:

    8s magic "FREDCKPT", u32 version, u32 body length, 32s sha256(body),
    body = canonical JSON (sorted keys, no whitespace), UTF-8.

The store holds images in memory and, when given a directory, mirrors them
to `<dir>/<id>.img` with an `index.json` beside them.
"""

import bisect
import functools
import hashlib
import json
import os
import struct
import time

from .errors import CheckpointError, CorruptImage, MissingImage, StoreFull

CKPT_MAGIC = b"FREDCKPT"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<8sII32s")


@functools.total_ordering
class TimePosition:
    """A point in the recorded execution.

    Ordering is by global statement count (gstep); the other fields locate
    the same instant in checkpoint/history/event coordinates.
    """

    __slots__ = ("gstep", "ckpt_ordinal", "history_index", "step_subindex", "event_seqno")

    def __init__(self, gstep, ckpt_ordinal, history_index, step_subindex, event_seqno):
        self.gstep = gstep
        self.ckpt_ordinal = ckpt_ordinal      # latest checkpoint at or before
        self.history_index = history_index    # command index in debug history
        self.step_subindex = step_subindex    # completed steps inside that command
        self.event_seqno = event_seqno        # log entries consumed so far

    def __eq__(self, other):
        return isinstance(other, TimePosition) and self.gstep == other.gstep

    def __lt__(self, other):
        return self.gstep < other.gstep

    def __repr__(self):
        return ("TimePosition(gstep=%d, ckpt=%d, hist=%d.%d, ev=%d)"
                % (self.gstep, self.ckpt_ordinal, self.history_index,
                   self.step_subindex, self.event_seqno))

    def to_doc(self):
        return {"gstep": self.gstep, "ckpt_ordinal": self.ckpt_ordinal,
                "history_index": self.history_index,
                "step_subindex": self.step_subindex,
                "event_seqno": self.event_seqno}

    @classmethod
    def from_doc(cls, d):
        return cls(d["gstep"], d["ckpt_ordinal"], d["history_index"],
                   d["step_subindex"], d["event_seqno"])


class CheckpointImage:
    __slots__ = ("ckpt_id", "vm_doc", "position", "label", "value", "created")

    def __init__(self, ckpt_id, vm_doc, position, label="", value="unknown", created=None):
        self.ckpt_id = ckpt_id
        self.vm_doc = vm_doc          # VM.to_doc() output
        self.position = position      # TimePosition
        self.label = label            # "" (user) or "intermediate"
        self.value = value            # watched expression at creation: good/bad/unknown
        self.created = time.time() if created is None else created

    def to_blob(self):
        body = json.dumps(
            {"ckpt_id": self.ckpt_id, "vm": self.vm_doc,
             "position": self.position.to_doc(), "label": self.label,
             "value": self.value, "created": self.created},
            sort_keys=True, separators=(",", ":")).encode()
        digest = hashlib.sha256(body).digest()
        return _CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, len(body), digest) + body

    @classmethod
    def from_blob(cls, blob):
        if len(blob) < _CKPT_HEADER.size:
            raise CorruptImage("image too short for header")
        magic, version, blen, digest = _CKPT_HEADER.unpack_from(blob, 0)
        if magic != CKPT_MAGIC:
            raise CorruptImage("bad magic %r" % magic)
        if version != CKPT_VERSION:
            raise CorruptImage("image version %d, expected %d" % (version, CKPT_VERSION))
        body = blob[_CKPT_HEADER.size:_CKPT_HEADER.size + blen]
        if len(body) != blen or hashlib.sha256(body).digest() != digest:
            raise CorruptImage("image body checksum mismatch")
        d = json.loads(body)
        return cls(d["ckpt_id"], d["vm"], TimePosition.from_doc(d["position"]),
                   d.get("label", ""), d.get("value", "unknown"), d.get("created"))


class CheckpointStore:
    """Ordered collection of checkpoint images for one session."""

    def __init__(self, directory=None, max_images=0):
        self.directory = directory
        self.max_images = max_images  # 0 = unlimited
        self.images = []              # ordered by position (gstep)
        self._gsteps = []             # parallel sorted key list for bisect
        if directory:
            os.makedirs(directory, exist_ok=True)

    def __len__(self):
        return len(self.images)

    def add(self, image):
        # The list stays sorted by position; reverse-watch takes images at
        # midpoints earlier than already-stored ones, so insert, not append.
        # An existing image at the same position makes the new one redundant.
        existing = self.at_gstep(image.position.gstep)
        if existing is not None:
            return existing
        if self.max_images and len(self.images) >= self.max_images:
            raise StoreFull("store limited to %d images" % self.max_images)
        at = bisect.bisect_right(self._gsteps, image.position.gstep)
        self.images.insert(at, image)
        self._gsteps.insert(at, image.position.gstep)
        if self.directory:
            path = os.path.join(self.directory, "%d.img" % image.ckpt_id)
            with open(path, "wb") as f:
                f.write(image.to_blob())
            self._write_index()
        return image

    def get(self, ckpt_id):
        for img in self.images:
            if img.ckpt_id == ckpt_id:
                return img
        if self.directory:
            path = os.path.join(self.directory, "%d.img" % ckpt_id)
            if os.path.exists(path):
                with open(path, "rb") as f:
                    return CheckpointImage.from_blob(f.read())
        raise MissingImage("no checkpoint %d" % ckpt_id)

    def at_gstep(self, gstep):
        i = bisect.bisect_left(self._gsteps, gstep)
        if i < len(self._gsteps) and self._gsteps[i] == gstep:
            return self.images[i]
        return None

    def latest_at_or_before(self, gstep):
        """Most recent image with position.gstep <= gstep, or None."""
        i = bisect.bisect_right(self._gsteps, gstep) - 1
        return self.images[i] if i >= 0 else None

    def between(self, lo_gstep, hi_gstep):
        """Images with lo <= gstep <= hi, in time order."""
        return [img for img in self.images
                if lo_gstep <= img.position.gstep <= hi_gstep]

    def _write_index(self):
        index = [{"ckpt_id": img.ckpt_id, "position": img.position.to_doc(),
                  "label": img.label, "value": img.value}
                 for img in self.images]
        with open(os.path.join(self.directory, "index.json"), "w") as f:
            json.dump(index, f, indent=1)
