"""Line-delimited JSON server exposing one debug session.

Wire format (one JSON object per line, UTF-8):

  request   {"id": <any>, "verb": str, "args": {...}}
  response  {"id": <any>, "ok": true, "payload": ...}
            {"id": <any>, "ok": false, "error": {"code": str, "message": str}}
  event     {"event": kind, "seqno": int, "payload": {...}}
            kind in {"stopped", "output", "checkpoint-taken",
                     "search-progress", "search-done"}

Verbs "hello", "snapshot" and "bye" belong to the transport; every other
verb is a debugger command and is run through the session driver exactly
as if typed at the REPL, so the textual payload matches local output
byte for byte.  One client holds the controlling role at a time; the
rest observe and receive events only.  Events carry monotonically
increasing sequence numbers shared across all kinds.
"""

import json
import socket
import threading

from .errors import Busy, EndpointInUse, FredError, ProtocolError

# Debugger verbs that move execution and therefore warrant a stopped event.
_MOVEMENT_VERBS = {
    "run", "continue", "next", "step", "finish",
    "fred-reverse-step", "fred-reverse-next", "fred-reverse-finish",
    "fred-reverse-continue", "fred-reverse-watch",
}

_SOURCE_WINDOW = 5       # lines of context on each side in snapshots


def snapshot_state(session):
    """Read-only UI state document for a stopped session.

    Identical across repeated calls with no intervening commands."""
    vm = session.vm
    threads = []
    for t in vm.threads:
        loc = vm.thread_loc(t.tid)
        frames = []
        for f in t.frames:
            frames.append({"function": f[0].name, "ip": f[1]})
        threads.append({
            "tid": t.tid,
            "status": t.status,
            "loc": _loc_doc(loc),
            "frames": frames,
        })
    focus_loc = vm.thread_loc(session.focus)
    source = None
    if focus_loc is not None:
        lines = session.program.source.splitlines()
        lo = max(0, focus_loc.line - 1 - _SOURCE_WINDOW)
        hi = min(len(lines), focus_loc.line + _SOURCE_WINDOW)
        source = {
            "file": focus_loc.file,
            "line": focus_loc.line,
            "first_line": lo + 1,
            "lines": lines[lo:hi],
        }
    checkpoints = [{
        "ckpt_id": im.ckpt_id,
        "gstep": im.position.gstep,
        "label": im.label,
        "value": im.value,
    } for im in session.store.images]
    return {
        "phase": session.phase,
        "end_reason": session.end_reason,
        "fault_detail": session.fault_detail,
        "position": session.current_position().to_doc(),
        "focus": session.focus,
        "threads": threads,
        "source": source,
        "checkpoints": checkpoints,
        "breakpoints": [{"id": i, "line": ln}
                        for i, ln in sorted(session.breakpoints.items())],
        "log_cursor": session.log.replay_cursor,
        "log_length": len(session.log),
        "stats": {
            "gstep": vm.gstep,
            "restarts": session.restarts,
            "record_end": session.record_end,
        },
        "last_report": (session.last_report.to_doc()
                        if session.last_report else None),
    }


def _loc_doc(loc):
    if loc is None:
        return None
    return {"file": loc.file, "line": loc.line, "stmt_id": loc.stmt_id}


class _Client:
    def __init__(self, sock, addr):
        self.sock = sock
        self.addr = addr
        self.role = "observer"
        self.send_lock = threading.Lock()
        self.alive = True

    def send(self, doc):
        data = (json.dumps(doc) + "\n").encode()
        try:
            with self.send_lock:
                self.sock.sendall(data)
        except OSError:
            self.alive = False


class SessionServer:
    """Serves one DebugSession to one controller and many observers."""

    def __init__(self, session, host="127.0.0.1", port=0):
        self.session = session
        self.host = host
        self.port = port
        self.listener = None
        self.clients = []
        self.clients_lock = threading.Lock()
        self.driver_lock = threading.Lock()   # serializes session access
        self.controller = None
        self.seqno = 0
        self.seqno_lock = threading.Lock()
        self.stopping = False

    # -- lifecycle -------------------------------------------------------
    def start(self):
        try:
            self.listener = socket.create_server((self.host, self.port))
        except OSError as exc:
            raise EndpointInUse("cannot bind %s:%d: %s"
                                % (self.host, self.port, exc))
        self.port = self.listener.getsockname()[1]
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        return self

    def stop(self):
        self.stopping = True
        try:
            self.listener.close()
        except OSError:
            pass
        with self.clients_lock:
            clients = list(self.clients)
        for c in clients:
            try:
                c.sock.close()
            except OSError:
                pass

    def _accept_loop(self):
        while not self.stopping:
            try:
                sock, addr = self.listener.accept()
            except OSError:
                return
            client = _Client(sock, addr)
            with self.clients_lock:
                self.clients.append(client)
            threading.Thread(target=self._client_loop, args=(client,),
                             daemon=True).start()

    def _client_loop(self, client):
        try:
            buf = client.sock.makefile("r", encoding="utf-8")
            for line in buf:
                line = line.strip()
                if not line:
                    continue
                self._handle_line(client, line)
                if not client.alive:
                    break
        except OSError:
            pass
        finally:
            self._drop(client)

    def _drop(self, client):
        client.alive = False
        with self.clients_lock:
            if client in self.clients:
                self.clients.remove(client)
        if self.controller is client:
            self.controller = None
        try:
            client.sock.close()
        except OSError:
            pass

    # -- events ----------------------------------------------------------
    def _emit(self, kind, payload):
        with self.seqno_lock:
            seq = self.seqno
            self.seqno += 1
        doc = {"event": kind, "seqno": seq, "payload": payload}
        with self.clients_lock:
            clients = list(self.clients)
        for c in clients:
            c.send(doc)

    # -- request handling ------------------------------------------------
    def _handle_line(self, client, line):
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict) or "verb" not in msg:
                raise ProtocolError("request must be an object with a verb")
        except (ValueError, ProtocolError) as exc:
            client.send({"id": None, "ok": False,
                         "error": {"code": "ProtocolError", "message": str(exc)}})
            return
        rid = msg.get("id")
        verb = msg["verb"]
        args = msg.get("args") or {}
        try:
            payload = self._dispatch(client, verb, args)
        except FredError as exc:
            client.send({"id": rid, "ok": False,
                         "error": {"code": type(exc).__name__,
                                   "message": str(exc)}})
            return
        client.send({"id": rid, "ok": True, "payload": payload})

    def _dispatch(self, client, verb, args):
        if verb == "hello":
            return self._hello(client, args)
        if verb == "snapshot":
            with self.driver_lock:
                return snapshot_state(self.session)
        if verb == "bye":
            client.alive = False
            return {"bye": True}
        # Everything else is a debugger command: controller only.
        if self.controller is not client:
            if self.controller is None:
                self.controller = client
                client.role = "controller"
            else:
                raise Busy("another client holds the controlling role")
        line = self._command_line(verb, args)
        return self._run_command(verb, line)

    def _hello(self, client, args):
        role = args.get("role", "observer")
        if role not in ("controller", "observer"):
            raise ProtocolError("role must be 'controller' or 'observer'")
        if role == "controller":
            if self.controller is not None and self.controller is not client:
                raise Busy("another client holds the controlling role")
            self.controller = client
        client.role = role
        with self.driver_lock:
            snap = snapshot_state(self.session)
        return {"role": role, "snapshot": snap}

    def _command_line(self, verb, args):
        if "line" in args:
            text = args["line"]
            if not isinstance(text, str):
                raise ProtocolError("args.line must be a string")
            return text
        arg = args.get("expr", args.get("arg", ""))
        if arg is None:
            arg = ""
        if not isinstance(arg, (str, int)):
            raise ProtocolError("argument must be a string or number")
        return ("%s %s" % (verb, arg)).strip()

    def _run_command(self, verb, line):
        session = self.session
        with self.driver_lock:
            out0 = len(session.vm.output)
            if verb == "fred-reverse-watch":
                session.search_progress = (
                    lambda p: self._emit("search-progress", p))
            try:
                output = session.execute_command(line)
            finally:
                session.search_progress = None
            for text in session.vm.output[out0:]:
                self._emit("output", {"text": text})
            if verb == "fred-checkpoint":
                im = session.store.images[-1]
                self._emit("checkpoint-taken", {
                    "ckpt_id": im.ckpt_id,
                    "gstep": im.position.gstep,
                    "label": im.label,
                })
            if verb in _MOVEMENT_VERBS:
                self._emit("stopped", {
                    "position": session.current_position().to_doc(),
                    "where": session._where(),
                })
            if verb == "fred-reverse-watch" and session.last_report:
                self._emit("search-done", session.last_report.to_doc())
        return {"output": output}


def serve(session, endpoint):
    """Start serving a session on 'host:port' (or just 'port').

    Returns the running SessionServer; call .stop() to shut down."""
    host, port = "127.0.0.1", 0
    if ":" in endpoint:
        host, _, p = endpoint.rpartition(":")
        port = int(p)
    elif endpoint:
        port = int(endpoint)
    return SessionServer(session, host, port).start()
