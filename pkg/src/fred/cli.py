"""Command-line entry point: interactive/batch debugger, bench, logdump."""

import argparse
import json
import os
import sys
import time

from .compiler import compile_program
from .errors import FredError, SearchError
from .events import EventLog
from .session import DebugSession

PROMPT = "(fred) "

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAULT = 2
EXIT_SEARCH = 3


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fred",
        description="Reversible debugger for the .fr mini-language")
    sub = parser.add_subparsers(dest="cmd")

    p_dbg = sub.add_parser("debug", help="debug a .fr program")
    p_dbg.add_argument("program", help="path to the .fr source file")
    p_dbg.add_argument("--seed", type=int, default=0,
                       help="scheduler/rand seed (default 0)")
    p_dbg.add_argument("--auto-ckpt", type=int, default=1000, metavar="K",
                       help="intermediate checkpoint every K statements "
                            "(0 disables, default 1000)")
    p_dbg.add_argument("--strict-eval", action="store_true",
                       help="watch evaluation errors raise instead of "
                            "classifying as bad")
    p_dbg.add_argument("--serve", metavar="ADDR",
                       help="also serve the session on host:port")
    p_dbg.add_argument("--batch", metavar="FILE",
                       help="read commands from FILE instead of stdin")
    p_dbg.add_argument("--stats", metavar="JSON",
                       help="write session statistics to this JSON file")
    p_dbg.add_argument("--dump-bytecode", action="store_true",
                       help="print the compiled bytecode before starting")
    p_dbg.add_argument("--session-dir", metavar="DIR",
                       help="directory for the transcript and on-disk images")

    p_bench = sub.add_parser("bench", help="run the bug corpus benchmark")
    p_bench.add_argument("corpus", help="corpus directory with manifest.json")
    p_bench.add_argument("--auto-ckpt", type=int, default=64, metavar="K")
    p_bench.add_argument("--stats", metavar="JSON", default=None,
                         help="write the machine-readable report here "
                              "(default: bench.json in the working directory)")

    p_dump = sub.add_parser("logdump", help="print a saved event log")
    p_dump.add_argument("logfile", help="path to a FREDLOG1 file")

    args = parser.parse_args(argv)
    if args.cmd is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        if args.cmd == "debug":
            return cmd_debug(args)
        if args.cmd == "bench":
            return cmd_bench(args)
        return cmd_logdump(args)
    except FredError as exc:
        print("fred: error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


# ----------------------------------------------------------------------
# debug
# ----------------------------------------------------------------------
def cmd_debug(args):
    try:
        source = open(args.program).read()
    except OSError as exc:
        print("fred: cannot read %s: %s" % (args.program, exc), file=sys.stderr)
        return EXIT_USAGE
    program = compile_program(source, args.program)
    if args.dump_bytecode:
        print(program.disassemble())

    store_dir = None
    transcript = None
    if args.session_dir:
        os.makedirs(args.session_dir, exist_ok=True)
        store_dir = os.path.join(args.session_dir, "images")
        transcript = open(os.path.join(args.session_dir, "transcript.txt"),
                          "w", encoding="utf-8")

    session = DebugSession(program, seed=args.seed, store_dir=store_dir,
                           auto_ckpt=args.auto_ckpt,
                           strict_eval=args.strict_eval)
    server = None
    if args.serve:
        from .server import serve
        server = serve(session, args.serve)
        server.controller = "local"        # the REPL holds the driver
        print("serving on %s:%d (observers only)" % (server.host, server.port))

    def run_line(verb, line):
        if server is not None:
            return server._run_command(verb, line)["output"]
        return session.execute_command(line)

    if args.batch:
        try:
            lines = open(args.batch).read().splitlines()
        except OSError as exc:
            print("fred: cannot read %s: %s" % (args.batch, exc),
                  file=sys.stderr)
            return EXIT_USAGE
        stream = iter(lines)
        interactive = False
    else:
        stream = None
        interactive = True

    code = EXIT_OK
    while True:
        if interactive:
            try:
                line = input(PROMPT)
            except EOFError:
                print()
                break
        else:
            line = next(stream, None)
            if line is None:
                break
            # Echo so batch output matches an interactive transcript.
            print(PROMPT + line)
        if transcript is not None:
            transcript.write(PROMPT + line + "\n")
        stripped = line.strip()
        if stripped in ("quit", "q", "exit"):
            break
        if not stripped or stripped.startswith("#"):
            continue
        verb = stripped.split(None, 1)[0]
        try:
            out = run_line(verb, stripped)
        except SearchError as exc:
            out = "search failed: %s" % exc
            code = EXIT_SEARCH
        except FredError as exc:
            out = "error: %s" % exc
        else:
            if verb == "fred-reverse-watch" and code == EXIT_FAULT:
                code = EXIT_OK             # the fault has been diagnosed
        if out:
            print(out)
            if transcript is not None:
                transcript.write(out + "\n")
        if (session.ended and session.end_reason == "fault"
                and session.phase == "record" and code == EXIT_OK):
            code = EXIT_FAULT

    if args.stats:
        _write_json(args.stats, _session_stats(session))
    if transcript is not None:
        transcript.close()
    if server is not None:
        server.stop()
    if interactive:
        return EXIT_OK
    return code


def _session_stats(session):
    doc = {
        "gstep": session.vm.gstep,
        "record_end": session.record_end,
        "phase": session.phase,
        "checkpoints": len(session.store.images),
        "restarts": session.restarts,
        "ckpt_wall": round(session.ckpt_wall, 6),
        "restore_wall": round(session.restore_wall, 6),
        "log_events": len(session.log),
    }
    if session.last_report is not None:
        doc["last_report"] = session.last_report.to_doc()
    return doc


# ----------------------------------------------------------------------
# bench
# ----------------------------------------------------------------------
BENCH_COLUMNS = ("Bug", "N", "Num Ckpts", "Num Rstr", "Num Expr Eval",
                 "Avg Ckpt", "Avg Rstr", "Search (s)", "Result")


def cmd_bench(args):
    manifest_path = os.path.join(args.corpus, "manifest.json")
    try:
        manifest = json.load(open(manifest_path))
    except OSError:
        manifest = {"cases": []}
    rows = []
    from .search import reverse_watch
    for case in manifest["cases"]:
        path = os.path.join(args.corpus, case["file"])
        program = compile_program(open(path).read(), path)
        session = DebugSession(program, seed=case.get("seed", 0),
                               auto_ckpt=args.auto_ckpt)
        session.execute_command("run")
        t0 = time.perf_counter()
        result = "FAIL"
        try:
            report = reverse_watch(session, case["watch"])
        except SearchError as exc:
            report = None
            detail = str(exc)
        else:
            want = case["culprit"]
            if (report.tid == want["tid"] and report.loc.line == want["line"]
                    and report.loc.stmt_id == want["stmt_id"]):
                result = "PASS"
            detail = "tid %d line %d" % (report.tid, report.loc.line)
        wall = time.perf_counter() - t0
        stats = report.stats if report is not None else None
        n_ckpt = len(session.store.images)
        n_rstr = session.restarts
        rows.append({
            "Bug": case["name"],
            "N": session.record_end,
            "Num Ckpts": n_ckpt,
            "Num Rstr": n_rstr,
            "Num Expr Eval": stats.expr_evals if stats else None,
            "Avg Ckpt": round(session.ckpt_wall / n_ckpt, 6) if n_ckpt else 0.0,
            "Avg Rstr": round(session.restore_wall / n_rstr, 6) if n_rstr else 0.0,
            "Search (s)": round(wall, 4),
            "Result": result,
            "detail": detail,
        })
    _print_table(rows)
    out_path = args.stats or "bench.json"
    _write_json(out_path, {"columns": list(BENCH_COLUMNS), "rows": rows})
    print("wrote %s" % out_path)
    return EXIT_OK if all(r["Result"] == "PASS" for r in rows) else EXIT_SEARCH


def _print_table(rows):
    if not rows:
        print("(empty corpus)")
        return
    widths = {c: len(c) for c in BENCH_COLUMNS}
    for r in rows:
        for c in BENCH_COLUMNS:
            widths[c] = max(widths[c], len(str(r[c])))
    line = "  ".join(c.ljust(widths[c]) for c in BENCH_COLUMNS)
    print(line)
    print("-" * len(line))
    for r in rows:
        print("  ".join(str(r[c]).ljust(widths[c]) for c in BENCH_COLUMNS))


# ----------------------------------------------------------------------
# logdump
# ----------------------------------------------------------------------
def cmd_logdump(args):
    log = EventLog.load(args.logfile)
    sys.stdout.write(log.dump())
    stats = log.stats()
    print("-- %d events: %s" % (len(log), json.dumps(stats)))
    return EXIT_OK


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=False)
        f.write("\n")


if __name__ == "__main__":
    sys.exit(main())
