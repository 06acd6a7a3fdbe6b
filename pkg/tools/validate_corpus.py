"""Record each corpus program, confirm the fault, run reverse_watch,
and print the reported culprit plus search stats."""

import json
import sys
import time

sys.path.insert(0, "src")

from fred.compiler import compile_program
from fred.session import DebugSession
from fred.search import reverse_watch

CASES = [
    ("corpus/mysql_atomicity.fr", "r != 0 && r.key == 1702125600", 0),
    ("corpus/mysql_stale_ptr.fr", "c == 0 || c.ptr == 0 || *(c.ptr) != 999", 0),
    ("corpus/pbzip_order.fr", "fifo != 0 && fifo.head > 0 && fifo.mut == 0", 0),
    ("corpus/pbzip_order_decoy.fr", "fifo != 0 && fifo.head > 0 && fifo.mut == 0", 0),
]


def main():
    for path, expr, seed in CASES:
        src = open(path).read()
        program = compile_program(src, path)
        sess = DebugSession(program, seed=seed, auto_ckpt=64)
        out = sess.execute_command("run")
        print("== %s (seed %d)" % (path, seed))
        print("   run ->", out.splitlines()[-1] if out else "(no output)")
        vm = sess.vm
        print("   gstep=%d mode=%s" % (vm.gstep, vm.mode))
        faulted = [t.tid for t in vm.threads if t.status == "faulted"]
        print("   faulted tids:", faulted)
        t0 = time.time()
        try:
            report = reverse_watch(sess, expr)
        except Exception as exc:
            print("   SEARCH FAILED: %s: %s" % (type(exc).__name__, exc))
            continue
        dt = time.time() - t0
        print("   culprit: tid %d at %s" % (report.tid, report.loc))
        print("   wall %.2fs  stats: %s" % (dt, json.dumps(report.stats.to_doc())))
        print()


if __name__ == "__main__":
    main()
