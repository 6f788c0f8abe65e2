"""Reference semantics written independently of the package.

Nothing here imports symtrans arithmetic: the bit-vector rules follow the
SMT-LIB definitions of the QF_BV operators directly.
"""

import random
import re


def signed(v, w):
    return v - (1 << w) if v >> (w - 1) & 1 else v


def bv(op, a, b, w):
    """Value of ``op`` on w-bit operands; None when the divisor is zero."""
    m = (1 << w) - 1
    if op == "add":
        return (a + b) % (m + 1)
    if op == "sub":
        return (a - b) % (m + 1)
    if op == "mul":
        return (a * b) % (m + 1)
    if op in ("udiv", "urem", "sdiv", "srem") and b == 0:
        return None
    if op == "udiv":
        return a // b
    if op == "urem":
        return a % b
    if op == "sdiv":
        sa, sb = signed(a, w), signed(b, w)
        q = abs(sa) // abs(sb)
        return (-q if (sa < 0) != (sb < 0) else q) % (m + 1)
    if op == "srem":
        sa, sb = signed(a, w), signed(b, w)
        r = abs(sa) % abs(sb)
        return (-r if sa < 0 else r) % (m + 1)
    if op == "shl":
        return (a << b) % (m + 1) if b < w else 0
    if op == "lshr":
        return a >> b if b < w else 0
    if op == "ashr":
        return (signed(a, w) >> min(b, w)) % (m + 1)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    raise KeyError(op)


def cmp(pred, a, b, w):
    sa, sb = signed(a, w), signed(b, w)
    return int({
        "eq": a == b, "ne": a != b,
        "ult": a < b, "ule": a <= b, "ugt": a > b, "uge": a >= b,
        "slt": sa < sb, "sle": sa <= sb, "sgt": sa > sb, "sge": sa >= sb,
    }[pred])


def cast(op, v, fw, tw):
    if op == "trunc":
        return v % (1 << tw)
    if op == "zext":
        return v
    return signed(v, fw) % (1 << tw)


# -- SMT-LIB evaluation --

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def sexprs(text):
    stack = [[]]
    for tok in _TOKEN.findall(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


_BVOP = {
    "bvadd": "add", "bvsub": "sub", "bvmul": "mul", "bvudiv": "udiv", "bvsdiv": "sdiv",
    "bvurem": "urem", "bvsrem": "srem", "bvand": "and", "bvor": "or", "bvxor": "xor",
    "bvshl": "shl", "bvlshr": "lshr", "bvashr": "ashr",
}
_BVCMP = {
    "=": "eq", "distinct": "ne", "bvult": "ult", "bvule": "ule", "bvugt": "ugt", "bvuge": "uge",
    "bvslt": "slt", "bvsle": "sle", "bvsgt": "sgt", "bvsge": "sge",
}


def smt_holds(script, assignment):
    """Evaluate every assertion of a QF_BV script under ``assignment``
    (symbol name -> int). Returns True when all hold."""
    env = {}  # name -> (value, width)
    asserts = []
    for form in sexprs(script):
        head = form[0]
        if head == "declare-fun":
            w = int(form[3][2])
            env[form[1]] = (assignment.get(form[1], 0) % (1 << w), w)
        elif head == "define-fun":
            env[form[1]] = _eval(form[4], env)
        elif head == "assert":
            asserts.append(form[1])
    return all(_eval(a, env)[0] == 1 for a in asserts)


def smt_div(op, a, b, w):
    """The total SMT-LIB division operators (defined for a zero divisor)."""
    if b:
        return bv(op, a, b, w)
    m = (1 << w) - 1
    if op == "udiv":
        return m
    if op == "sdiv":
        return 1 if signed(a, w) < 0 else m
    return a  # urem, srem


def _eval(e, env):
    if isinstance(e, str):
        if e.startswith("#x"):
            return int(e[2:], 16), 4 * (len(e) - 2)
        if e.startswith("#b"):
            return int(e[2:], 2), len(e) - 2
        return env[e]
    head = e[0]
    if isinstance(head, list):  # ((_ extract hi 0) x) etc.
        kind = head[1]
        v, w = _eval(e[1], env)
        if kind == "extract":
            hi = int(head[2])
            return v % (1 << (hi + 1)), hi + 1
        n = int(head[2])
        return cast("zext" if kind == "zero_extend" else "sext", v, w, w + n), w + n
    if head == "ite":
        c = _eval_bool(e[1], env)
        return _eval(e[2], env) if c else _eval(e[3], env)
    if head == "=" and len(e) == 3:
        return int(_eval_bool(e, env)), 1
    (a, w), (b, _) = _eval(e[1], env), _eval(e[2], env)
    op = _BVOP[head]
    if op in ("udiv", "urem", "sdiv", "srem"):
        return smt_div(op, a, b, w), w
    return bv(op, a, b, w), w


def _eval_bool(e, env):
    (a, w), (b, _) = _eval(e[1], env), _eval(e[2], env)
    return bool(cmp(_BVCMP[e[0]], a, b, w))


# -- random terms --

ARITH = ("add", "sub", "mul", "udiv", "urem", "sdiv", "srem", "and", "or", "xor", "shl", "lshr", "ashr")
PREDS = ("eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge")


def random_pc(arena, rng: random.Random, nsyms=2, width=8, conjuncts=(1, 4), depth=3):
    """A list of width-1 terms over symbols 0..nsyms-1 built through the
    arena's public constructors."""
    syms = [arena.symbol(i, width) for i in range(nsyms)]

    def value(d):
        if d == 0 or rng.random() < 0.3:
            if rng.random() < 0.6:
                return rng.choice(syms)
            return arena.const(rng.randrange(1 << width), width)
        op = rng.choice(ARITH)
        a, b = value(d - 1), value(d - 1)
        if op in ("udiv", "urem", "sdiv", "srem") and arena.is_const(b) and arena.const_value(b) == 0:
            b = arena.const(rng.randrange(1, 1 << width), width)
        return arena.apply(op, (a, b))

    out = []
    for _ in range(rng.randint(*conjuncts)):
        c = arena.apply(rng.choice(PREDS), (value(depth), value(depth)))
        out.append(c)
    return out
