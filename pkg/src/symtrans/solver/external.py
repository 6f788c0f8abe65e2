"""External SMT solver spoken to over SMT-LIB text on stdin/stdout.

One long-lived process per backend instance; each query runs inside a
``push``/``pop`` scope so queries stay independent.
"""

from __future__ import annotations

import os
import selectors
import shutil
import subprocess
import time

from .query import SolverAnswer, SolverError, SolverQuery, parse_bv_literal, symbol_name

SOLVER_ENV = "SYMTRANS_SOLVER"
PREAMBLE = "(set-option :produce-models true)\n(set-logic QF_BV)\n"


def find_solver(path: str | None = None) -> str | None:
    """Explicit path, then ``$SYMTRANS_SOLVER``, then ``z3`` on PATH. The
    first of these that is set decides; a missing binary is not skipped."""
    cand = path or os.environ.get(SOLVER_ENV) or "z3"
    return shutil.which(cand)


def session_preamble(timeout: float) -> str:
    return PREAMBLE + f"(set-option :timeout {int(timeout * 1000)})\n"


def stream_for(q: SolverQuery) -> str:
    """Exact text sent for ``q`` once the session preamble is out."""
    return "(push 1)\n" + q.to_smtlib(get_model=True) + "(pop 1)\n"


class TranscribingBackend:
    """Answers through ``inner`` while writing down the session an external
    solver would have received for the same queries."""

    def __init__(self, inner, timeout: float = 30.0):
        self.inner = inner
        self.name = f"{inner.name}+transcript"
        self.transcript: list[str] = [session_preamble(timeout)]

    @property
    def calls(self) -> int:
        return self.inner.calls

    def check(self, q: SolverQuery) -> SolverAnswer:
        self.transcript.append(stream_for(q))
        return self.inner.check(q)

    def close(self) -> None:
        self.inner.close()


class ExternalBackend:
    name = "external"

    def __init__(self, path: str | None = None, timeout: float = 30.0, args=("-in", "-smt2"),
                 record: bool = False):
        exe = find_solver(path)
        if exe is None:
            raise SolverError("no SMT solver executable found (set SYMTRANS_SOLVER)")
        self.exe = exe
        self.args = tuple(args)
        self.timeout = timeout
        self.calls = 0
        self.proc: subprocess.Popen | None = None
        self._buf = b""
        # every byte written to the solver, when recording
        self.transcript: list[str] | None = [] if record else None

    # -- process management --
    def _start(self) -> None:
        try:
            self.proc = subprocess.Popen(
                [self.exe, *self.args],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as e:
            raise SolverError(f"cannot start solver {self.exe}: {e}") from e
        self._buf = b""
        self._send(self.preamble())

    def preamble(self) -> str:
        return session_preamble(self.timeout)

    def close(self) -> None:
        if self.proc is not None:
            try:
                self.proc.stdin.close()
                self.proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()
            self.proc = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _send(self, text: str) -> None:
        if self.transcript is not None:
            self.transcript.append(text)
        try:
            self.proc.stdin.write(text.encode())
            self.proc.stdin.flush()
        except (OSError, ValueError) as e:
            self._kill()
            raise SolverError(f"solver pipe closed: {e}") from e

    def _kill(self) -> None:
        if self.proc is not None:
            self.proc.kill()
            self.proc.wait()
            self.proc = None

    def _readline(self, deadline: float) -> str:
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError
            sel = selectors.DefaultSelector()
            sel.register(self.proc.stdout, selectors.EVENT_READ)
            ready = sel.select(remaining)
            sel.close()
            if not ready:
                raise TimeoutError
            chunk = os.read(self.proc.stdout.fileno(), 65536)
            if not chunk:
                self._kill()
                raise SolverError("solver exited unexpectedly")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode().strip()

    def _read_sexpr(self, deadline: float) -> str:
        text = ""
        depth = 0
        while True:
            line = self._readline(deadline)
            text += line + " "
            depth += line.count("(") - line.count(")")
            if depth <= 0 and text.strip():
                return text.strip()

    # -- queries --
    def stream_for(self, q: SolverQuery) -> str:
        return stream_for(q)

    def check(self, q: SolverQuery) -> SolverAnswer:
        if self.proc is None:
            self._start()
        self.calls += 1
        deadline = time.monotonic() + self.timeout + 5.0
        self._send(self.stream_for(q))
        try:
            while True:
                line = self._readline(deadline)
                if line in ("sat", "unsat", "unknown"):
                    break
                if line.startswith("(error") or line == "unsupported":
                    self._kill()
                    raise SolverError(f"solver rejected query: {line}")
            # get-value answers with a model or, off a sat result, an error
            reply = self._read_sexpr(deadline) if q.symbols else ""
        except TimeoutError:
            self._kill()
            return SolverAnswer("unknown", reason="timeout")
        if line == "unknown":
            return SolverAnswer("unknown", reason="solver returned unknown")
        if line == "unsat":
            return SolverAnswer("unsat")
        model = _parse_model(reply) if q.symbols else {}
        missing = [i for i, _ in q.symbols if i not in model]
        if missing:
            raise SolverError(f"model lacks symbols {missing}")
        return SolverAnswer("sat", model)


def _parse_model(text: str) -> dict[int, int]:
    # ((s0 #x09) (s1 #b1))
    body = text.strip()
    if not body.startswith("((") or body.startswith("(error"):
        raise SolverError(f"bad get-value response: {text!r}")
    model = {}
    for part in body[1:-1].split(")"):
        part = part.strip().lstrip("(").strip()
        if not part:
            continue
        name, _, lit = part.partition(" ")
        if not name.startswith("s"):
            raise SolverError(f"unexpected name {name!r} in model")
        model[int(name[1:])] = parse_bv_literal(lit)
    return model
