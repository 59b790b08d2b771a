import math

import pytest
from hypothesis import given, strategies as st

from trainfb.core import (BadConstellation, BlocklengthTooSmall, BudgetTooSmall, ConfigError,
                          InfeasibleSplit, NtTooSmall, ResourceSplit, SchemeKind, SchemeSpec,
                          SystemConfig, db_to_linear, is_valid_constellation, validate_config)


def test_db_conversion():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(0.0) == 1.0
    assert SystemConfig(4, 20.0, 100).rho == pytest.approx(100.0)


@pytest.mark.parametrize("name,kind", [
    ("analog", SchemeKind.ANALOG), ("TDD", SchemeKind.TDD),
    ("digital", SchemeKind.DIGITAL_ERRORFREE), ("qam", SchemeKind.DIGITAL_QAM),
    ("digital-qam", SchemeKind.DIGITAL_QAM),
])
def test_scheme_parse(name, kind):
    assert SchemeKind.parse(name) is kind


def test_scheme_parse_rejects_unknown():
    with pytest.raises(ConfigError, match="unknown scheme"):
        SchemeKind.parse("carrier-pigeon")


def test_scheme_constants_nt4():
    a = SchemeSpec.build("analog", 4)
    assert (a.w1, a.w_fb, a.min_t1, a.min_tfb) == (3, 12, 4, 16)
    t = SchemeSpec.build("tdd", 4)
    assert (t.w1, t.w_fb, t.min_tfb) == (3, 0, 0)
    d = SchemeSpec.build("digital-errorfree", 4)
    assert d.min_budget == 8
    q = SchemeSpec.build("digital-qam", 4)
    assert q.constellation_set == (2, 4, 16, 64)


@pytest.mark.parametrize("m,ok", [(2, True), (4, True), (8, False), (16, True), (64, True),
                                  (256, True), (1, False), (32, False), (0, False)])
def test_constellation_rule(m, ok):
    assert is_valid_constellation(m) is ok


def test_nt_too_small():
    cfg = SystemConfig(1, 10.0, 100)
    with pytest.raises(NtTooSmall):
        validate_config(cfg, SchemeSpec.build("tdd", 1))


def test_blocklength_too_small_lists_minimum():
    cfg = SystemConfig(4, 10.0, 6)
    with pytest.raises(BlocklengthTooSmall) as exc:
        validate_config(cfg, SchemeSpec.build("analog", 4))
    assert "20" in str(exc.value)


def test_bad_constellation():
    cfg = SystemConfig(4, 10.0, 100)
    with pytest.raises(BadConstellation):
        validate_config(cfg, SchemeSpec.build("digital-qam", 4, (4, 8)))


def test_multiple_problems_are_collected():
    cfg = SystemConfig(1, 10.0, 1)
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg, SchemeSpec.build("analog", 1))
    assert len(exc.value.problems) >= 2


def test_split_checks(cfg):
    scheme = SchemeSpec.build("analog", 4)
    ResourceSplit(50, 99, True).check(cfg, scheme)
    with pytest.raises(InfeasibleSplit):
        ResourceSplit(600, 500).check(cfg, scheme)
    with pytest.raises(BudgetTooSmall):
        ResourceSplit(50, 10).check(cfg, scheme)
    with pytest.raises(InfeasibleSplit):
        ResourceSplit(50.5, 99, True).check(cfg, scheme)


@given(st.integers(2, 64))
def test_min_budget_at_least_two_nt(n):
    for kind in SchemeKind:
        s = SchemeSpec.build(kind, n)
        assert s.min_budget >= n
        assert s.w1 == n - 1
        if kind is SchemeKind.ANALOG:
            assert s.min_budget == n + n * n


@given(st.floats(-30, 40))
def test_rho_positive(db):
    rho = SystemConfig(4, db, 100).rho
    assert rho > 0 and math.isclose(10 * math.log10(rho), db, abs_tol=1e-9)
