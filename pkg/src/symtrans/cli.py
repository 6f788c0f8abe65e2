"""Command-line entry point.

Exit codes: 0 ok/safe, 1 violation, 2 usage or transform error, 3 unknown,
101 trap (``run`` only; an assertion failure counts as a trap).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import REPORT_SCHEMA_VERSION, __version__
from .domains import domain_names
from .domains.term import TermStore
from .explorer import DEDUP_MODES, STRATEGIES, ExploreConfig, ReplayError, explore, replay
from .ir import IrError, Module, parse_module, print_module
from .ir.nodes import split_domain_call
from .report import build_report, dumps, validate_report
from .solver import SolverError, make_backend
from .transform import TransformError, transform
from .vm import Host, Machine, VmError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_UNKNOWN = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load(path: str) -> Module:
    return parse_module(_read(path))


def is_transformed(m: Module) -> bool:
    return any(
        ins.op == "call" and split_domain_call(ins.callee) is not None
        for f in m.functions
        for _, _, ins in f.instructions()
    )


def _int_list(text: str, what: str) -> list[int]:
    if not text.strip():
        return []
    try:
        return [int(x, 0) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated integers, got {text!r}") from None


# -- commands --

def cmd_transform(a) -> int:
    m = _load(a.input)
    t0 = time.perf_counter()
    out = transform(m, domain=a.domain, entry=a.entry)
    dt = time.perf_counter() - t0
    _write(a.out, print_module(out))
    if a.time:
        print(f"transform: {dt * 1000:.2f} ms", file=sys.stderr)
    return EXIT_OK


def cmd_run(a) -> int:
    m = _load(a.input)
    trail = _int_list(a.trail, "--trail") if a.trail is not None else []
    pins = _int_list(a.pins, "--pins") if a.pins is not None else None
    stores = {}
    backend = None
    if is_transformed(m):
        backend = make_backend(a.solver, timeout=a.timeout, path=a.solver_path)
        stores["term"] = TermStore(backend=backend)
    host = Host(trail=trail, pins=pins)
    try:
        st, out = Machine(m, stores=stores, host=host, fuel=a.fuel).execute(a.entry)
    except VmError as e:
        raise UsageError(str(e)) from None
    finally:
        if backend is not None:
            backend.close()
    for line in st.output:
        print(line)
    if out.kind == "exit":
        return out.exit_code
    if out.kind == "choice":
        print(f"error: choice trail exhausted at {out.site} (arity {out.arity})", file=sys.stderr)
        return EXIT_USAGE
    print(f"{out.kind}: {out.detail}", file=sys.stderr)
    return out.exit_code


def _explore_config(a, **extra) -> ExploreConfig:
    return ExploreConfig(
        strategy=a.strategy,
        dedup=a.dedup,
        depth=a.depth,
        max_states=a.max_states,
        time_limit=a.time_limit,
        fuel=a.fuel,
        solver=a.solver,
        solver_path=a.solver_path,
        timeout=a.timeout,
        jobs=a.jobs,
        entry=a.entry,
        **extra,
    )


def cmd_verify(a) -> int:
    m = _load(a.input)
    if is_transformed(m):
        original, t = None, m
    else:
        original, t = m, transform(m, domain=a.domain, entry=a.entry)
    cfg = _explore_config(a, stop_at_first=a.first)
    v = explore(t, cfg)
    status = None
    diverged = False
    if v.violations:
        status = []
        for x in v.violations:
            if original is None:
                status.append("skipped")
                continue
            try:
                replay(original, x, entry=a.entry, fuel=a.fuel)
                status.append("confirmed")
            except ReplayError as e:
                status.append("diverged")
                diverged = True
                print(f"internal soundness error: {e}", file=sys.stderr)
    doc = build_report(v, a.input, a.domain, cfg, status)
    validate_report(doc)
    if a.report:
        _write(a.report, dumps(doc))
        print(f"{v.result}: states={v.stats.states_stored} solver-calls={v.stats.solver_calls} "
              f"prunes={v.stats.prunes} wall={v.stats.wall_time:.3f}s")
    else:
        sys.stdout.write(dumps(doc))
    if diverged:
        return EXIT_UNKNOWN
    return v.exit_code


def cmd_dump_smt(a) -> int:
    m = _load(a.input)
    t = m if is_transformed(m) else transform(m, domain="term", entry=a.entry)
    backends = []

    def factory():
        b = make_backend(a.solver, timeout=a.timeout, path=a.solver_path, record=True)
        backends.append(b)
        return b

    cfg = _explore_config(a, backend_factory=factory)
    v = explore(t, cfg)
    text = "".join("".join(b.transcript) for b in backends)
    _write(a.out, text)
    print(f"{v.result}: {sum(len(b.transcript) - 1 for b in backends)} queries", file=sys.stderr)
    return EXIT_OK


def cmd_corpus(a) -> int:
    """Transform every program of a directory and report per-program times."""
    d = Path(a.dir)
    files = sorted(d.glob("*.sir"))
    if not files:
        raise UsageError(f"no .sir files in {d}")
    rows = []
    worst = 0.0
    for f in files:
        m = parse_module(f.read_text())
        t0 = time.perf_counter()
        transform(m, domain=a.domain)
        ms = (time.perf_counter() - t0) * 1000
        worst = max(worst, ms)
        rows.append({"program": f.stem, "transform-ms": round(ms, 3)})
    doc = {"schema": REPORT_SCHEMA_VERSION, "domain": a.domain, "programs": rows,
           "max-transform-ms": round(worst, 3)}
    _write(a.report, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


# -- argument parsing --

def _add_budget(p) -> None:
    p.add_argument("--strategy", choices=STRATEGIES, default="dfs")
    p.add_argument("--depth", type=int, default=10_000, help="maximum number of choices on a path")
    p.add_argument("--max-states", type=int, default=100_000, help="stored state budget")
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--jobs", type=int, default=1, help="exploration worker threads")


def _add_solver(p) -> None:
    p.add_argument("--solver", choices=("auto", "brute", "external"), default="auto")
    p.add_argument("--solver-path", default=None, help="solver executable (default: $SYMTRANS_SOLVER, then z3)")
    p.add_argument("--timeout", type=float, default=30.0, help="per-query solver timeout in seconds")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symtrans", description="Abstraction pass, VM and explorer for the symtrans IR.")
    p.add_argument("--version", action="version",
                   version=f"symtrans {__version__} (report schema {REPORT_SCHEMA_VERSION})")
    sub = p.add_subparsers(dest="command", required=True)
    domains = domain_names()

    t = sub.add_parser("transform", help="rewrite a module over an abstract domain")
    t.add_argument("input", help="module file, - for stdin")
    t.add_argument("--domain", choices=domains, default="term")
    t.add_argument("-o", "--out", default="-", help="output file, - for stdout")
    t.add_argument("--entry", default="main")
    t.add_argument("--time", action="store_true", help="print the transform time to stderr")
    t.set_defaults(fn=cmd_transform)

    r = sub.add_parser("run", help="execute one path")
    r.add_argument("input")
    r.add_argument("--trail", default=None, help='choice directions, e.g. "0,1,1,0"')
    r.add_argument("--pins", default=None, help="values for the inputs in creation order")
    r.add_argument("--entry", default="main")
    r.add_argument("--fuel", type=int, default=1_000_000)
    _add_solver(r)
    r.set_defaults(fn=cmd_run)

    v = sub.add_parser("verify", help="explore all paths and check assertions")
    v.add_argument("input")
    v.add_argument("--domain", choices=domains, default="term")
    v.add_argument("--dedup", choices=DEDUP_MODES, default="off")
    v.add_argument("--report", default=None, help="write the JSON report here instead of stdout")
    v.add_argument("--first", action="store_true", help="stop at the first violation")
    v.add_argument("--entry", default="main")
    v.add_argument("--fuel", type=int, default=1_000_000)
    _add_budget(v)
    _add_solver(v)
    v.set_defaults(fn=cmd_verify)

    d = sub.add_parser("dump-smt", help="write the SMT-LIB text sent to the solver during verification")
    d.add_argument("input")
    d.add_argument("-o", "--out", default="-")
    d.add_argument("--entry", default="main")
    d.add_argument("--fuel", type=int, default=1_000_000)
    d.set_defaults(dedup="off")
    _add_budget(d)
    _add_solver(d)
    d.set_defaults(fn=cmd_dump_smt)

    c = sub.add_parser("corpus", help="transform a directory of programs and report timings")
    c.add_argument("dir", nargs="?", default="corpus")
    c.add_argument("--domain", choices=domains, default="term")
    c.add_argument("--report", default="-")
    c.set_defaults(fn=cmd_corpus)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    try:
        return a.fn(a)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (IrError, TransformError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_UNKNOWN


if __name__ == "__main__":
    sys.exit(main())
