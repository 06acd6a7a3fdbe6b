"""CLI tests: batch transcripts, bench report, logdump, exit codes."""

import json
import os
import subprocess
import sys

import pytest

from conftest import CORPUS, ROOT, corpus_manifest


def run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "fred.cli"] + args,
                          capture_output=True, text=True, cwd=cwd, timeout=120)


def write_script(tmp_path, lines):
    path = tmp_path / "script.txt"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


CASE = corpus_manifest()[0]          # mysql_atomicity
CASE_FILE = os.path.join(CORPUS, CASE["file"])


class TestDebugBatch:
    def test_scripted_reverse_watch_names_culprit(self, tmp_path):
        script = write_script(tmp_path, [
            "break %d" % CASE["fault"]["line"],
            "run",
            "fred-checkpoint",
            "continue",
            "fred-reverse-watch %s" % CASE["watch"],
            "quit",
        ])
        r = run_cli(["debug", CASE_FILE, "--auto-ckpt", "64",
                     "--batch", script], str(tmp_path))
        assert r.returncode == 0, r.stderr
        assert "culprit: tid %d" % CASE["culprit"]["tid"] in r.stdout
        assert ":%d (stmt %d)" % (CASE["culprit"]["line"],
                                  CASE["culprit"]["stmt_id"]) in r.stdout

    def test_prompt_and_echo(self, tmp_path):
        script = write_script(tmp_path, ["run", "quit"])
        r = run_cli(["debug", CASE_FILE, "--batch", script], str(tmp_path))
        assert r.stdout.startswith("(fred) run\n")

    def test_empty_script_exits_clean(self, tmp_path):
        script = write_script(tmp_path, [""])
        r = run_cli(["debug", CASE_FILE, "--batch", script], str(tmp_path))
        assert r.returncode == 0
        assert r.stderr == ""
        assert r.stdout.strip() in ("", "(fred)")

    def test_batch_interactive_equivalence(self, tmp_path):
        lines = ["break %d" % CASE["fault"]["line"], "run", "print r.key",
                 "quit"]
        script = write_script(tmp_path, lines)
        batch = run_cli(["debug", CASE_FILE, "--batch", script],
                        str(tmp_path))
        inter = subprocess.run(
            [sys.executable, "-m", "fred.cli", "debug", CASE_FILE],
            input="\n".join(lines) + "\n", capture_output=True, text=True,
            cwd=str(tmp_path), timeout=120)
        # Batch mode echoes the commands after the prompt; interactive mode
        # does not (the terminal would). Outputs proper must be identical.
        def canon(s):
            return [ln for ln in s.replace("(fred) ", "").splitlines()
                    if ln and ln not in lines]
        assert canon(batch.stdout) == canon(inter.stdout)

    def test_unhandled_fault_exit_code(self, tmp_path):
        script = write_script(tmp_path, ["run", "quit"])
        r = run_cli(["debug", CASE_FILE, "--batch", script], str(tmp_path))
        assert r.returncode == 2

    def test_search_failure_exit_code(self, tmp_path):
        script = write_script(tmp_path, [
            "run",
            "fred-reverse-watch 1 == 1",   # bad over the whole lifetime
            "quit",
        ])
        r = run_cli(["debug", CASE_FILE, "--batch", script], str(tmp_path))
        assert r.returncode == 3
        assert "search failed" in r.stdout

    def test_usage_error_exit_code(self, tmp_path):
        r = run_cli(["debug", str(tmp_path / "missing.fr")], str(tmp_path))
        assert r.returncode == 1

    def test_transcript_written(self, tmp_path):
        script = write_script(tmp_path, ["run", "quit"])
        r = run_cli(["debug", CASE_FILE, "--batch", script,
                     "--session-dir", "sess"], str(tmp_path))
        transcript = (tmp_path / "sess" / "transcript.txt").read_text()
        assert transcript.startswith("(fred) run\n")
        assert "tid 0" in transcript

    def test_stats_json(self, tmp_path):
        script = write_script(tmp_path, [
            "run", "fred-reverse-watch %s" % CASE["watch"], "quit"])
        r = run_cli(["debug", CASE_FILE, "--auto-ckpt", "64",
                     "--batch", script, "--stats", "out.json"], str(tmp_path))
        doc = json.loads((tmp_path / "out.json").read_text())
        assert doc["checkpoints"] > 0
        assert doc["last_report"]["tid"] == CASE["culprit"]["tid"]

    def test_dump_bytecode(self, tmp_path):
        script = write_script(tmp_path, ["quit"])
        r = run_cli(["debug", CASE_FILE, "--batch", script,
                     "--dump-bytecode"], str(tmp_path))
        assert "fn main" in r.stdout


class TestBench:
    def test_full_corpus_all_pass(self, tmp_path):
        r = run_cli(["bench", CORPUS, "--stats", "bench.json"], str(tmp_path))
        assert r.returncode == 0, r.stdout + r.stderr
        lines = r.stdout.splitlines()
        header = lines[0]
        for col in ("Num Ckpts", "Num Rstr", "Num Expr Eval",
                    "Avg Ckpt", "Avg Rstr"):
            assert col in header
        doc = json.loads((tmp_path / "bench.json").read_text())
        assert len(doc["rows"]) == len(corpus_manifest())
        assert all(row["Result"] == "PASS" for row in doc["rows"])

    def test_empty_corpus(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        (empty / "manifest.json").write_text('{"cases": []}')
        r = run_cli(["bench", str(empty), "--stats", "b.json"], str(tmp_path))
        assert r.returncode == 0
        assert "(empty corpus)" in r.stdout


def test_logdump_roundtrip(tmp_path):
    from fred.session import DebugSession
    from conftest import compile_corpus
    sess = DebugSession(compile_corpus(CASE["file"]), seed=CASE["seed"])
    sess.execute_command("run")
    path = tmp_path / "run.frlog"
    sess.log.save(str(path))
    r = run_cli(["logdump", str(path)], str(tmp_path))
    assert r.returncode == 0
    assert "ThreadCreate" in r.stdout
    assert r.stdout.strip().splitlines()[-1].startswith("--")
