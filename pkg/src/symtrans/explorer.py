"""Explicit-state exploration of a transformed module.

Every ``@choose`` is a fork point: the state is snapshotted and each
direction is scheduled. Branch feasibility is checked by the domain at the
``a_assume`` that follows a generated choice, so infeasible directions die
one instruction after the fork. Violations are recorded and the path goes
on under the assumption that the assertion held, which makes the set of
explored (decisions, outcome) pairs match what concrete executions of the
original program can do.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .domains.term import NAME as TERM, TermStore
from .ir.nodes import Module
from .solver import make_backend
from .terms import TermArena
from .vm import DEFAULT_FUEL, Halt, Host, Machine, MachineState, Outcome, StateImage

STRATEGIES = ("dfs", "bfs")
DEDUP_MODES = ("off", "syntactic", "semantic")


@dataclass
class ExploreConfig:
    strategy: str = "dfs"
    dedup: str = "off"
    depth: int = 10_000
    max_states: int = 100_000
    time_limit: Optional[float] = None
    fuel: int = DEFAULT_FUEL
    solver: str = "auto"
    solver_path: Optional[str] = None
    timeout: float = 30.0
    jobs: int = 1
    record_paths: bool = False
    stop_at_first: bool = False
    entry: str = "main"
    # called once per worker to open its solver connection
    backend_factory: Optional[Callable] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.dedup not in DEDUP_MODES:
            raise ValueError(f"dedup must be one of {DEDUP_MODES}")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")


@dataclass(frozen=True)
class Violation:
    kind: str  # "assert" or "trap"
    detail: str
    model: dict
    trail: tuple  # every choice taken, generated ones included
    choices: tuple  # user-level @choose answers only
    decisions: tuple
    output: tuple

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "detail": self.detail,
            "model": {f"s{i}": v for i, v in sorted(self.model.items())},
            "trail": list(self.trail),
            "choices": list(self.choices),
            "decisions": [list(d) for d in self.decisions],
            "output": list(self.output),
        }


@dataclass
class Stats:
    states_stored: int = 0
    solver_calls: int = 0
    memo_hits: int = 0
    prunes: int = 0
    trivial_prunes: int = 0
    dedup_hits: int = 0
    paths: int = 0
    wall_time: float = 0.0


@dataclass
class Verdict:
    result: str  # safe | violation | unknown
    violations: list = field(default_factory=list)
    reasons: list = field(default_factory=list)
    stats: Stats = field(default_factory=Stats)
    paths: Optional[set] = None

    @property
    def violation(self) -> Optional[Violation]:
        return self.violations[0] if self.violations else None

    @property
    def exit_code(self) -> int:
        return {"safe": 0, "violation": 1}.get(self.result, 3)


class _WorkerHost(Host):
    """Never answers a choice itself, so every fork comes back to the
    explorer; records may-fail assertions and divisions and continues."""

    def __init__(self, ex: "Explorer"):
        super().__init__()
        self.ex = ex

    def choose(self, st, site, arity, generated):
        return None

    def sym(self, st, index, t):
        return None

    def on_assert(self, st, dom, h):
        status, model = st.ctx[dom].check_assert(h)
        if status == "holds":
            return "holds"
        if status == "fails":
            self.ex.record(st, "assert", "assertion may fail", model)
            return "continue"
        raise Halt("unknown", "assertion undecided")

    def on_division(self, st, dom, h):
        status, model = st.ctx[dom].division(h)
        if status == "safe":
            return "holds"
        if status == "may-trap":
            self.ex.record(st, "trap", "division by zero", model)
            return "continue"
        raise Halt("unknown", "divisor undecided")


class _Worker:
    def __init__(self, ex: "Explorer"):
        self.ex = ex
        self.host = _WorkerHost(ex)
        self.stores: dict[str, Any] = {}
        if ex.uses_term:
            cfg = ex.cfg
            factory = cfg.backend_factory or (
                lambda: make_backend(cfg.solver, timeout=cfg.timeout, path=cfg.solver_path)
            )
            self.stores[TERM] = TermStore(backend_factory=factory, arena=ex.arena)
        self.machine = Machine(ex.module, stores=self.stores, host=self.host, fuel=ex.cfg.fuel)

    def close(self) -> None:
        for s in self.stores.values():
            s.close()


def _user_choices(decisions) -> tuple:
    return tuple(d[3] for d in decisions if len(d) == 4)


class Explorer:
    def __init__(self, module: Module, cfg: ExploreConfig | None = None):
        self.module = module
        self.cfg = cfg or ExploreConfig()
        self.arena = TermArena()
        probe = Machine(module)
        self.uses_term = TERM in probe.domains
        self.lock = threading.Lock()
        self.cv = threading.Condition(self.lock)
        self.frontier: deque[StateImage] = deque()
        self.visited: dict[bytes, list[StateImage]] = {}
        self.stats = Stats()
        self.violations: list[Violation] = []
        self.possible = 0
        self.reasons: list[str] = []
        self.paths: set = set()
        self.active = 0
        self.stopped = False
        self.deadline = None

    # -- bookkeeping shared by workers --
    def record(self, st: MachineState, kind: str, detail: str, model: Optional[dict]) -> None:
        if not all(c.exact() for c in st.ctx.values()):
            # the path may exist only in the abstraction
            with self.lock:
                self.stats.paths += 1
                self.possible += 1
                reason = f"possible {kind} on an over-approximated path"
                if reason not in self.reasons:
                    self.reasons.append(reason)
            return
        v = Violation(
            kind=kind,
            detail=detail,
            model=dict(model or {}),
            trail=tuple(d for _, d, _ in st.trail),
            choices=_user_choices(st.decisions),
            decisions=tuple(st.decisions),
            output=tuple(st.output),
        )
        with self.lock:
            self.violations.append(v)
            if self.cfg.record_paths:
                self.paths.add((v.decisions, kind))
            self.stats.paths += 1
            if self.cfg.stop_at_first:
                self.stopped = True

    def _unknown(self, reason: str) -> None:
        with self.lock:
            if reason not in self.reasons:
                self.reasons.append(reason)

    def _finish_path(self, st: MachineState, kind: str) -> None:
        with self.lock:
            self.stats.paths += 1
            if self.cfg.record_paths:
                self.paths.add((tuple(st.decisions), kind))

    # -- dedup --
    def _contexts(self, w: _Worker, img: StateImage) -> dict:
        out = {}
        for name, cimg in img.ctx:
            c = w.machine.domains[name].new_context(w.stores.get(name))
            c.restore(cimg)
            out[name] = c
        return out

    def _same(self, w: _Worker, a: StateImage, b: StateImage) -> bool:
        ha, hb = a.abstract_handles(), b.abstract_handles()
        if [d for d, _ in ha] != [d for d, _ in hb]:
            return False
        ca, cb = self._contexts(w, a), self._contexts(w, b)
        semantic = self.cfg.dedup == "semantic"
        for name in ca:
            xa = [h for d, h in ha if d == name]
            xb = [h for d, h in hb if d == name]
            if ca[name].syntactic_key(xa) == cb[name].syntactic_key(xb):
                continue
            if not semantic or ca[name].equivalent(xa, cb[name], xb) != "yes":
                return False
        return True

    def same_state(self, a: StateImage, b: StateImage) -> bool:
        """Whether the configured dedup mode treats two images as one state."""
        if a.digest() != b.digest():
            return False
        w = _Worker(self)
        try:
            return self._same(w, a, b)
        finally:
            w.close()

    def _seen(self, w: _Worker, img: StateImage) -> bool:
        key = img.digest()
        with self.lock:
            candidates = list(self.visited.get(key, ()))
        for other in candidates:
            if self._same(w, img, other):
                return True
        with self.lock:
            self.visited.setdefault(key, []).append(img)
        return False

    # -- exploration --
    def _settle(self, w: _Worker, st: MachineState, out: Outcome) -> None:
        k = out.kind
        if k == "choice":
            if len(st.trail) >= self.cfg.depth:
                self._unknown("depth bound reached")
                return
            img = w.machine.snapshot(st)
            if self.cfg.dedup != "off" and self._seen(w, img):
                with self.lock:
                    self.stats.dedup_hits += 1
                return
            with self.cv:
                if self.stats.states_stored >= self.cfg.max_states:
                    if "state budget exhausted" not in self.reasons:
                        self.reasons.append("state budget exhausted")
                    return
                self.stats.states_stored += 1
                self.frontier.append(img)
                self.cv.notify()
        elif k == "exit":
            self._finish_path(st, "ok")
        elif k in ("assert", "trap"):
            model = out.data.get("model")
            if model is None:
                model = {}
                for c in st.ctx.values():
                    m = c.model()
                    if m:
                        model.update(m)
            self.record(st, k, out.detail, model)
        elif k == "infeasible":
            with self.lock:
                if out.data.get("trivial", True):
                    self.stats.trivial_prunes += 1
                elif out.data.get("where") == "assume":
                    self.stats.prunes += 1
        elif k == "fuel":
            self._unknown("step budget exhausted")
        else:
            self._unknown(out.detail or k)

    def _take(self) -> Optional[StateImage]:
        with self.cv:
            while True:
                if self.stopped:
                    return None
                if self.deadline is not None and time.monotonic() > self.deadline:
                    if self.frontier:
                        if "time budget exhausted" not in self.reasons:
                            self.reasons.append("time budget exhausted")
                        self.frontier.clear()
                    self.stopped = True
                    self.cv.notify_all()
                    return None
                if self.frontier:
                    self.active += 1
                    if self.cfg.strategy == "dfs":
                        return self.frontier.pop()
                    return self.frontier.popleft()
                if self.active == 0:
                    self.cv.notify_all()
                    return None
                self.cv.wait(0.05)

    def _done_with(self) -> None:
        with self.cv:
            self.active -= 1
            self.cv.notify_all()

    def _work(self, w: _Worker) -> None:
        m = w.machine
        while True:
            img = self._take()
            if img is None:
                return
            try:
                arity = img.result.arity
                for d in range(arity):
                    if self.stopped:
                        break
                    st = m.restore(img)
                    self._settle(w, st, m.run(st, choice=d))
            finally:
                self._done_with()

    def run(self) -> Verdict:
        t0 = time.monotonic()
        if self.cfg.time_limit is not None:
            self.deadline = t0 + self.cfg.time_limit
        workers = [_Worker(self) for _ in range(self.cfg.jobs)]
        try:
            w0 = workers[0]
            st = w0.machine.start(self.cfg.entry)
            self._settle(w0, st, w0.machine.run(st))
            if len(workers) == 1:
                self._work(w0)
            else:
                threads = [threading.Thread(target=self._work, args=(w,), daemon=True) for w in workers]
                for t in threads:
                    t.start()
                for t in threads:
                    t.join()
        finally:
            for w in workers:
                self.stats.solver_calls += sum(getattr(s, "solver_calls", 0) for s in w.stores.values())
                self.stats.memo_hits += sum(getattr(s, "memo_hits", 0) for s in w.stores.values())
                w.close()
        self.stats.wall_time = time.monotonic() - t0
        if self.violations:
            result = "violation"
        elif self.reasons:
            result = "unknown"
        else:
            result = "safe"
        return Verdict(
            result=result,
            violations=list(self.violations),
            reasons=list(self.reasons),
            stats=self.stats,
            paths=set(self.paths) if self.cfg.record_paths else None,
        )


def explore(module: Module, cfg: ExploreConfig | None = None, **kw) -> Verdict:
    """Explore every feasible resolution of the choices in ``module``
    (already transformed) within the configured bounds."""
    if cfg is None:
        cfg = ExploreConfig(**kw)
    elif kw:
        raise TypeError("pass either cfg or keyword options")
    return Explorer(module, cfg).run()


# -- counterexample replay --

class ReplayError(RuntimeError):
    """The violation cannot be replayed (nothing to replay, or the concrete
    run went somewhere else: an internal soundness failure)."""


@dataclass
class ReplayTrace:
    outcome: Outcome
    output: tuple
    decisions: tuple
    inputs: tuple


def replay(original: Module, violation, entry: str = "main", fuel: int = DEFAULT_FUEL) -> ReplayTrace:
    """Run the untransformed program on the violation's model and check that
    it takes the same branches and fails the same way."""
    if isinstance(violation, Verdict):
        if violation.violation is None:
            raise ReplayError(f"verdict is {violation.result}; there is no counterexample to replay")
        violation = violation.violation
    model = violation.model
    inputs: list[int] = []

    def pin(index, t):
        v = model.get(index, 0) & t.mask
        inputs.append(v)
        return v

    host = Host(trail=list(violation.choices), pins=pin)
    st, out = Machine(original, host=host, fuel=fuel).execute(entry)
    trace = ReplayTrace(out, tuple(st.output), tuple(st.decisions), tuple(inputs))
    if out.kind != violation.kind or trace.decisions != tuple(violation.decisions):
        raise ReplayError(
            f"replay diverged: expected {violation.kind} after {len(violation.decisions)} decisions, "
            f"got {out.kind} ({out.detail}) after {len(trace.decisions)}"
        )
    return trace
