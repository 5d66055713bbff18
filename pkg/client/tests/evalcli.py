"""Drive the evaluator strictly through its public CLI.

The client package has no import path into the evaluator; everything
here shells out to the installed `oevla` command and talks to it over
loopback sockets, exactly like a real deployment would.
"""

import re
import subprocess

EVAL_TIMEOUT = 120  # seconds; generous, the suites here are tiny

_PORT_RE = re.compile(r"waiting for policy connections on port (\d+)")


def run_oevla(*args):
    proc = subprocess.run(
        ["oevla", *map(str, args)],
        capture_output=True,
        text=True,
        timeout=EVAL_TIMEOUT,
    )
    if proc.returncode != 0:
        raise AssertionError(
            f"oevla {' '.join(map(str, args))} failed "
            f"({proc.returncode}):\n{proc.stdout}\n{proc.stderr}"
        )
    return proc


class ListeningEvaluator:
    """`oevla eval run --policy listen:0` as a context manager."""

    def __init__(self, suite, out, seed=0, debug_hints=False, timeout=30.0):
        cmd = [
            "oevla", "eval", "run",
            "--suite", str(suite),
            "--policy", "listen:0",
            "--seed", str(seed),
            "--out", str(out),
            "--timeout", str(timeout),
        ]
        if debug_hints:
            cmd.append("--debug-hints")
        self.proc = subprocess.Popen(
            cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True
        )
        self.port = None
        for line in self.proc.stderr:
            m = _PORT_RE.search(line)
            if m:
                self.port = int(m.group(1))
                break
        if self.port is None:
            self.proc.kill()
            raise AssertionError("evaluator never announced a port")

    @property
    def endpoint(self):
        return f"127.0.0.1:{self.port}"

    def wait(self):
        try:
            out, err = self.proc.communicate(timeout=EVAL_TIMEOUT)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            raise
        return self.proc.returncode, out, err

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.communicate()
