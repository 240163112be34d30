"""Tests for process descriptors, seeding, horizons, and check bookkeeping."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from majority_lab.core import (
    CheckResult,
    MajorityState,
    ModelKind,
    ProcessSpec,
    SeedPolicy,
    ValidationError,
    horizon,
    validate_state,
)


def test_process_spec_basics():
    p3 = ProcessSpec(3)
    assert p3.j == 3
    assert not p3.ties_possible
    assert p3.quorum == 2

    p4 = ProcessSpec(4)
    assert p4.ties_possible
    assert p4.quorum == 3


def test_process_spec_rejects_bad_j():
    for bad in (0, -1, 65):
        with pytest.raises(ValidationError):
            ProcessSpec(bad)
    with pytest.raises(ValidationError):
        ProcessSpec(2.5)


def test_model_kind_round_trip():
    assert ModelKind("gossip") is ModelKind.GOSSIP
    assert ModelKind("sequential") is ModelKind.SEQUENTIAL
    assert str(ModelKind.GOSSIP) == "gossip"
    with pytest.raises(ValueError):
        ModelKind("asynchronous")


def test_validate_state_bounds():
    assert validate_state(10, 0).is_absorbing
    assert validate_state(10, 10).is_absorbing
    assert not validate_state(10, 5).is_absorbing
    for bad in (-1, 11):
        with pytest.raises(ValidationError):
            validate_state(10, bad)
    with pytest.raises(ValidationError):
        validate_state(0, 0)


def test_majority_state_fraction():
    st_ = MajorityState(n=8, s=6)
    assert st_.alpha == 0.75
    assert st_.bias == 4
    with pytest.raises(ValidationError):
        MajorityState(n=8, s=9)


def test_seed_policy_reproducible():
    policy = SeedPolicy(12345)
    a = policy.stream(7).random(4)
    b = policy.stream(7).random(4)
    assert np.array_equal(a, b)


def test_seed_policy_streams_differ():
    policy = SeedPolicy(0)
    draws = {policy.stream(k).integers(0, 2**63) for k in range(64)}
    assert len(draws) == 64


def test_seed_policy_masters_differ():
    x = SeedPolicy(1).stream(0).integers(0, 2**63)
    y = SeedPolicy(2).stream(0).integers(0, 2**63)
    assert x != y


def test_seed_policy_validation():
    with pytest.raises(ValidationError):
        SeedPolicy(-1)
    with pytest.raises(ValidationError):
        SeedPolicy(2**64)
    with pytest.raises(ValidationError):
        SeedPolicy("42")
    with pytest.raises(ValidationError):
        SeedPolicy(0).stream(-1)


@given(st.integers(min_value=0, max_value=2**64 - 1),
       st.integers(min_value=0, max_value=2**32))
@settings(max_examples=25, deadline=None)
def test_seed_policy_any_valid_inputs(master, k):
    gen = SeedPolicy(master).stream(k)
    v = gen.random()
    assert 0.0 <= v < 1.0


def test_horizon_values():
    n = 100
    assert horizon(ModelKind.SEQUENTIAL, n, 10.0) == math.ceil(10 * n * math.log(n))
    assert horizon(ModelKind.GOSSIP, n, 10.0) == math.ceil(10 * math.log(n))
    assert horizon(ModelKind.GOSSIP, 1, 5.0) == 1  # ln 1 = 0 floors to 1
    with pytest.raises(ValidationError):
        horizon(ModelKind.GOSSIP, 0, 1.0)
    with pytest.raises(ValidationError):
        horizon(ModelKind.GOSSIP, 10, 0.0)


def test_check_result_pass_and_fail():
    res = CheckResult(name="demo", passed=True, checked=0)
    res.checked += 1
    assert res.passed
    assert "PASS" in res.summary()
    assert "(1 cases" in res.summary()

    res.record("s=3 deviates", 1e-3)
    res.record("s=4 deviates", 5e-3)
    assert not res.passed
    assert len(res.failures) == 2
    assert res.worst == 5e-3
    assert "FAIL" in res.summary()
