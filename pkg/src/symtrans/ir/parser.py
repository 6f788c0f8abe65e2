"""Text format reader for the mini-IR.

Grammar sketch::

    fn @name(%p: i32, %q: ptr) -> i32 {
    entry:
      %r = add i32 %p, 1        ; comment
      br %c, then, else
    ...
    }

One instruction per line; ``;`` starts a comment; integer literals are
decimal (optionally negative) or ``0x`` hex.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .nodes import (
    BINOPS,
    CASTS,
    PREDICATES,
    Block,
    Const,
    Function,
    Instruction,
    Module,
    Reg,
)
from .types import (
    I1,
    I64,
    PTR,
    VOID,
    AbsType,
    ArrayType,
    IntType,
    IrType,
    RecordType,
    int_type,
)


class IrError(Exception):
    """Base class for all IR reading/validation failures."""


class ParseError(IrError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class ValidationError(IrError):
    """Raised by :func:`parse_module` when the module parses but is invalid."""

    def __init__(self, diagnostics, positions=None):
        self.diagnostics = list(diagnostics)
        positions = positions or {}
        lines = []
        for d in self.diagnostics:
            pos = positions.get((d.function, d.block, d.index))
            where = f"{pos}: " if pos else ""
            lines.append(f"{where}{d}")
        super().__init__("\n".join(lines))

    @property
    def rules(self) -> set[str]:
        return {d.rule for d in self.diagnostics}


class TypeCheckError(ValidationError):
    pass


class SsaError(ValidationError):
    pass


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>;[^\n]*)
  | (?P<nl>\n)
  | (?P<global>@[A-Za-z0-9_.$]+)
  | (?P<local>%[A-Za-z0-9_.$]+)
  | (?P<arrow>->)
  | (?P<int>-?0x[0-9A-Fa-f]+|-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<punct>[(){}\[\],:=])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            out.append(Token("nl", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


def parse_int_literal(text: str) -> int:
    neg = text.startswith("-")
    body = text[1:] if neg else text
    v = int(body, 16) if body.lower().startswith("0x") else int(body)
    return -v if neg else v


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.positions: dict[tuple[str, str, int], str] = {}

    # -- token helpers --
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        raise ParseError(msg, t.line, t.col)

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.tok
        if t.kind == kind and (text is None or t.text == text):
            self.i += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            want = text if text is not None else kind
            got = self.tok.text if self.tok.kind != "nl" else "end of line"
            self.error(f"expected {want!r}, got {got!r}")
        return t

    def skip_newlines(self):
        while self.tok.kind == "nl":
            self.i += 1

    def end_of_line(self):
        if self.tok.kind == "eof":
            return
        if self.tok.kind == "punct" and self.tok.text == "}":
            return
        self.expect("nl")

    # -- grammar --
    def module(self) -> Module:
        funcs = []
        self.skip_newlines()
        while self.tok.kind != "eof":
            funcs.append(self.function())
            self.skip_newlines()
        return Module(tuple(funcs))

    def function(self) -> Function:
        self.expect("ident", "fn")
        name = self.expect("global").text[1:]
        self.expect("punct", "(")
        params = []
        if not self.accept("punct", ")"):
            while True:
                p = self.expect("local").text[1:]
                self.expect("punct", ":")
                params.append((p, self.type()))
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        self.expect("arrow")
        ret = self.type()
        self.skip_newlines()
        self.expect("punct", "{")
        blocks: list[Block] = []
        label: str | None = None
        instrs: list[Instruction] = []
        while True:
            self.skip_newlines()
            if self.accept("punct", "}"):
                break
            if self.tok.kind == "eof":
                self.error("unterminated function body")
            if (
                self.tok.kind == "ident"
                and self.toks[self.i + 1].kind == "punct"
                and self.toks[self.i + 1].text == ":"
            ):
                if label is not None:
                    blocks.append(Block(label, tuple(instrs)))
                label = self.next().text
                self.next()
                instrs = []
                continue
            if label is None:
                self.error("instruction outside of a labelled block")
            start = self.tok
            ins = self.instruction()
            self.positions[(name, label, len(instrs))] = f"{start.line}:{start.col}"
            instrs.append(ins)
            self.end_of_line()
        if label is not None:
            blocks.append(Block(label, tuple(instrs)))
        return Function(name, tuple(params), ret, tuple(blocks))

    def type(self) -> IrType:
        t = self.tok
        if self.accept("punct", "["):
            count = parse_int_literal(self.expect("int").text)
            self.expect("ident", "x")
            elem = self.type()
            self.expect("punct", "]")
            if count < 0:
                self.error("negative array count", t)
            return ArrayType(elem, count)
        if self.accept("punct", "{"):
            fields = []
            if not self.accept("punct", "}"):
                while True:
                    fields.append(self.type())
                    if self.accept("punct", "}"):
                        break
                    self.expect("punct", ",")
            return RecordType(tuple(fields))
        name = self.expect("ident").text
        if name == "ptr":
            return PTR
        if name == "void":
            return VOID
        abstract = name.startswith("a.")
        base = name[2:] if abstract else name
        if base.startswith("i") and base[1:].isdigit():
            try:
                it = int_type(int(base[1:]))
            except ValueError:
                self.error(f"unsupported integer width in {name!r}", t)
            return AbsType(it) if abstract else it
        self.error(f"unknown type {name!r}", t)

    def value(self, ty: IrType | None):
        t = self.tok
        if self.accept("local"):
            return Reg(t.text[1:])
        if self.accept("int"):
            v = parse_int_literal(t.text)
            if isinstance(ty, IntType):
                v &= ty.mask
            elif ty == PTR:
                v &= (1 << 64) - 1
            return Const(v)
        self.error(f"expected a value, got {t.text!r}")

    def label(self) -> str:
        return self.expect("ident").text

    def instruction(self) -> Instruction:
        if self.tok.kind == "local":
            res = self.next().text[1:]
            self.expect("punct", "=")
            return self.valued(res)
        op_tok = self.expect("ident")
        op = op_tok.text
        if op == "store":
            ty = self.type()
            v = self.value(ty)
            self.expect("punct", ",")
            p = self.value(PTR)
            return Instruction("store", ty=ty, args=(v, p))
        if op == "br":
            if self.tok.kind == "ident":
                return Instruction("br", labels=(self.label(),))
            c = self.value(I1)
            self.expect("punct", ",")
            t = self.label()
            self.expect("punct", ",")
            f = self.label()
            return Instruction("br", args=(c,), labels=(t, f))
        if op == "ret":
            ty = self.type()
            if ty == VOID:
                return Instruction("ret", ty=VOID)
            return Instruction("ret", ty=ty, args=(self.value(ty),))
        if op == "call":
            return self.call(None)
        self.error(f"unknown or value-producing opcode {op!r} without result", op_tok)

    def valued(self, res: str) -> Instruction:
        op_tok = self.expect("ident")
        op = op_tok.text
        if op in BINOPS:
            ty = self.type()
            a = self.value(ty)
            self.expect("punct", ",")
            b = self.value(ty)
            return Instruction(op, res, ty, (a, b))
        if op == "icmp":
            pt = self.expect("ident")
            if pt.text not in PREDICATES:
                self.error(f"unknown icmp predicate {pt.text!r}", pt)
            ty = self.type()
            a = self.value(ty)
            self.expect("punct", ",")
            b = self.value(ty)
            return Instruction("icmp", res, ty, (a, b), pred=pt.text)
        if op in CASTS:
            ty = self.type()
            v = self.value(ty)
            self.expect("ident", "to")
            to_tok = self.tok
            to = self.type()
            if not isinstance(to, IntType):
                self.error("cast target must be an integer type", to_tok)
            return Instruction(op, res, ty, (v,), to_ty=to)
        if op == "alloca":
            return Instruction("alloca", res, self.type())
        if op == "load":
            ty = self.type()
            self.expect("punct", ",")
            return Instruction("load", res, ty, (self.value(PTR),))
        if op == "ptradd":
            base = self.value(PTR)
            self.expect("punct", ",")
            return Instruction("ptradd", res, None, (base, self.value(I64)))
        if op == "phi":
            ty = self.type()
            vals, labels = [], []
            while True:
                self.expect("punct", "[")
                vals.append(self.value(ty))
                self.expect("punct", ",")
                labels.append(self.label())
                self.expect("punct", "]")
                if not self.accept("punct", ","):
                    break
            return Instruction("phi", res, ty, tuple(vals), labels=tuple(labels))
        if op == "call":
            return self.call(res)
        self.error(f"unknown opcode {op!r}", op_tok)

    def call(self, res: str | None) -> Instruction:
        ret = self.type()
        callee = self.expect("global").text[1:]
        self.expect("punct", "(")
        args, types = [], []
        if not self.accept("punct", ")"):
            while True:
                t = self.type()
                types.append(t)
                args.append(self.value(t))
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        return Instruction(
            "call", res, ret, tuple(args), callee=callee, arg_types=tuple(types)
        )


def parse_module_unchecked(text: str) -> tuple[Module, dict]:
    """Parse without validation; returns the module and an instruction
    position table keyed by (function, block, index)."""
    p = _Parser(text)
    return p.module(), p.positions


def parse_module(text: str) -> Module:
    """Parse and validate. Raises ParseError, TypeCheckError or SsaError."""
    from .validate import validate

    module, positions = parse_module_unchecked(text)
    diags = validate(module)
    if diags:
        if any(d.rule.startswith("ssa") for d in diags):
            raise SsaError(diags, positions)
        if any(d.rule.startswith("type") for d in diags):
            raise TypeCheckError(diags, positions)
        raise ValidationError(diags, positions)
    return module
