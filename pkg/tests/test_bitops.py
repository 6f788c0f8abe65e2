import pytest
from hypothesis import given, settings, strategies as st

import oracles
from symtrans import bitops
from symtrans.bitops import DivisionByZero

WIDTHS = (1, 8, 16, 32, 64)


@st.composite
def operands(draw):
    w = draw(st.sampled_from(WIDTHS))
    edge = st.sampled_from([0, 1, (1 << w) - 1, 1 << (w - 1), (1 << (w - 1)) - 1])
    a = draw(st.one_of(edge, st.integers(0, (1 << w) - 1)))
    b = draw(st.one_of(edge, st.integers(0, (1 << w) - 1), st.integers(0, w + 2)))
    return w, a, b & ((1 << w) - 1)


@settings(max_examples=400)
@given(operands(), st.sampled_from(oracles.ARITH))
def test_binop_matches_reference(args, op):
    w, a, b = args
    want = oracles.bv(op, a, b, w)
    if want is None:
        with pytest.raises(DivisionByZero):
            bitops.binop(op, a, b, w)
    else:
        assert bitops.binop(op, a, b, w) == want


@settings(max_examples=300)
@given(operands(), st.sampled_from(oracles.PREDS))
def test_icmp_matches_reference(args, pred):
    w, a, b = args
    assert bitops.icmp(pred, a, b, w) == oracles.cmp(pred, a, b, w)


@given(st.integers(0, (1 << 64) - 1), st.sampled_from([(8, 32), (1, 8), (16, 64), (8, 16)]))
def test_casts_match_reference(v, widths):
    fw, tw = widths
    v &= (1 << fw) - 1
    for op in ("zext", "sext"):
        assert bitops.cast(op, v, fw, tw) == oracles.cast(op, v, fw, tw)
    assert bitops.cast("trunc", bitops.cast("sext", v, fw, tw), tw, fw) == v


def test_wraparound_and_signed_edges():
    assert bitops.binop("add", 255, 1, 8) == 0
    assert bitops.binop("sub", 0, 1, 32) == 0xFFFFFFFF
    # INT_MIN / -1 wraps instead of trapping
    assert bitops.binop("sdiv", 0x80, 0xFF, 8) == 0x80
    assert bitops.binop("srem", 0x80, 0xFF, 8) == 0
    assert bitops.binop("srem", (-7) & 0xFF, 2, 8) == 0xFF
    assert bitops.binop("shl", 1, 8, 8) == 0
    assert bitops.binop("ashr", 0x80, 200, 8) == 0xFF


def test_specialised_closures_agree_with_generic_entry():
    add8 = bitops.make_binop("add", 8)
    ult8 = bitops.make_icmp("ult", 8)
    sext = bitops.make_cast("sext", 8, 32)
    assert add8(200, 100) == bitops.binop("add", 200, 100, 8)
    assert ult8(3, 4) == 1
    assert sext(0xFE) == 0xFFFFFFFE
    with pytest.raises(DivisionByZero):
        bitops.make_binop("urem", 16)(5, 0)
