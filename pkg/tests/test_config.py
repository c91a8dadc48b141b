import math

import pytest
from hypothesis import given, strategies as st

from fidreg.config import (
    format_float,
    format_kv,
    format_triple,
    kv_bool,
    kv_float,
    kv_int,
    kv_triple,
    parse_kv_text,
    require_keys,
)
from fidreg.errors import ConfigError


def test_parse_basic_with_comments_and_blanks():
    text = "# heading\n\na = 1\nb = two words\n  # indented comment\nc=3\n"
    assert parse_kv_text(text) == {"a": "1", "b": "two words", "c": "3"}


def test_parse_reports_line_numbers():
    with pytest.raises(ConfigError) as err:
        parse_kv_text("a = 1\nnot-a-pair\n")
    assert "line 2" in str(err.value)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError) as err:
        parse_kv_text("a = 1\na = 2\n")
    assert "duplicate" in str(err.value)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_format_float_is_repr_style():
    assert format_float(0.1) == "0.1"
    assert format_float(1e-17) == "1e-17"
    assert format_float(2) == "2.0"


def test_format_kv_and_reparse():
    pairs = {"alpha": "1.5", "beta": "x y z"}
    assert parse_kv_text(format_kv(pairs)) == pairs


def test_triple_round_trip():
    t = (1.5, -2.25, 1e-9)
    kv = parse_kv_text(f"p = {format_triple(t)}")
    assert kv_triple(kv, "p") == t


def test_kv_helpers_errors():
    kv = {"n": "3", "x": "1.5", "flag": "true", "bad": "nope", "p": "1 2"}
    assert kv_int(kv, "n") == 3
    assert kv_float(kv, "x") == 1.5
    assert kv_bool(kv, "flag") is True
    with pytest.raises(ConfigError):
        kv_int(kv, "x")
    with pytest.raises(ConfigError):
        kv_float(kv, "bad")
    with pytest.raises(ConfigError):
        kv_bool(kv, "bad")
    with pytest.raises(ConfigError):
        kv_triple(kv, "p")


def test_require_keys():
    kv = {"a": "1", "b": "2"}
    require_keys(kv, required=("a",), known=("a", "b"))
    with pytest.raises(ConfigError) as err:
        require_keys(kv, required=("c",), known=("a", "b", "c"))
    assert "'c'" in str(err.value)
    with pytest.raises(ConfigError) as err:
        require_keys(kv, required=(), known=("a",))
    assert "'b'" in str(err.value)


def test_nan_not_finite_checked_here():
    # format_float must not mangle specials that callers intentionally emit
    assert format_float(float("nan")) == "nan"
    assert math.isinf(float(format_float(float("inf"))))
