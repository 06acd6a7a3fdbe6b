#!/usr/bin/env python3
"""Serve one corpus program for the frontend integration tests.

Records the program to its end, starts the session server on an
ephemeral port, prints "PORT <n>" on stdout, and then blocks until
stdin closes.
"""

import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.path.join(ROOT, "src"))

from fred.compiler import compile_program
from fred.server import serve
from fred.session import DebugSession


def main(argv):
    name = argv[1] if len(argv) > 1 else "pbzip_order.fr"
    seed = int(argv[2]) if len(argv) > 2 else 0
    path = os.path.join(ROOT, "corpus", name)
    with open(path) as f:
        program = compile_program(f.read(), path)
    session = DebugSession(program, seed=seed, auto_ckpt=64)
    session.execute_command("run")
    server = serve(session, "127.0.0.1:0")
    print("PORT %d" % server.port, flush=True)
    try:
        sys.stdin.read()
    except KeyboardInterrupt:
        pass
    server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
