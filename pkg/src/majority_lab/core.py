"""Shared value types: process descriptions, counted states, seed derivation.

Everything downstream works on the pair (process, state) where the process is
"sample j opinions uniformly with replacement, adopt the sample majority" and
the state is the number of agents currently holding opinion ``a`` out of ``n``.
On the complete graph that count is a sufficient statistic, so no per-agent
arrays appear anywhere in the package.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

MAX_SAMPLE_SIZE = 64  # binomial evaluation is validated accurate up to this
_U64 = 0xFFFFFFFFFFFFFFFF


class MajorityLabError(Exception):
    """Base class for package errors."""


class ValidationError(MajorityLabError, ValueError):
    """An argument violated a documented bound."""


class DomainError(MajorityLabError, ValueError):
    """An argument is outside the mathematical domain of the quantity."""


class CapacityError(MajorityLabError, RuntimeError):
    """The request exceeds a documented size guard."""


class NumericError(MajorityLabError, RuntimeError):
    """A numerical post-condition (residual, tolerance) failed."""


class ModelKind(str, enum.Enum):
    """Activation model: all agents at once, or one uniform agent per step."""

    GOSSIP = "gossip"
    SEQUENTIAL = "sequential"

    def __str__(self) -> str:  # so f-strings and CSV cells get the bare word
        return self.value


@dataclass(frozen=True)
class ProcessSpec:
    """The j-sample majority rule.

    ``j`` is the number of opinions sampled (uniformly, with replacement,
    self-sampling allowed).  Odd ``j`` never ties; even ``j`` breaks the
    j/2 : j/2 tie with an unbiased coin.
    """

    j: int

    def __post_init__(self) -> None:
        if not isinstance(self.j, (int, np.integer)) or isinstance(self.j, bool):
            raise ValidationError(f"sample size j must be an integer, got {self.j!r}")
        if self.j < 1:
            raise ValidationError(f"sample size j must be >= 1, got {self.j}")
        if self.j > MAX_SAMPLE_SIZE:
            raise ValidationError(
                f"sample size j must be <= {MAX_SAMPLE_SIZE}, got {self.j}"
            )
        object.__setattr__(self, "j", int(self.j))

    @property
    def ties_possible(self) -> bool:
        return self.j % 2 == 0

    @property
    def quorum(self) -> int:
        """Draws of one opinion that decide the sample majority outright."""
        return self.j // 2 + 1


@dataclass(frozen=True)
class MajorityState:
    """Count of agents holding opinion ``a``; the rest hold ``b``."""

    n: int
    s: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise ValidationError(f"population n must be an integer, got {self.n!r}")
        if self.n < 1:
            raise ValidationError(f"population n must be >= 1, got {self.n}")
        if not isinstance(self.s, (int, np.integer)) or isinstance(self.s, bool):
            raise ValidationError(f"count s must be an integer, got {self.s!r}")
        if not 0 <= self.s <= self.n:
            raise ValidationError(
                f"count s must satisfy 0 <= s <= n={self.n}, got {self.s}"
            )
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "s", int(self.s))

    @property
    def alpha(self) -> float:
        """Fraction of the population holding ``a``."""
        return self.s / self.n

    @property
    def bias(self) -> int:
        """Signed lead of ``a`` over ``b``: 2s - n."""
        return 2 * self.s - self.n

    @property
    def is_absorbing(self) -> bool:
        return self.s == 0 or self.s == self.n


def validate_state(n: int, s: int) -> MajorityState:
    """Build a `MajorityState`, raising `ValidationError` naming any violated bound."""
    return MajorityState(n=n, s=s)


def _mix64(x: int) -> int:
    # splitmix64 finalizer; bijective on 64-bit words
    x &= _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return (x ^ (x >> 31)) & _U64

_MASTER_ROUND = 0x9E3779B97F4A7C15  # 2^64 / golden ratio
_RUN_ROUND = 0xD1B54A32D192ED03


@dataclass(frozen=True)
class SeedPolicy:
    """Deterministic per-run stream derivation from one master seed.

    The stream seed for run ``k`` is::

        mix64( mix64(master_seed XOR C_master) XOR mix64((k + C_run) mod 2^64) )

    where ``mix64`` is the splitmix64 finalizer and ``C_master``, ``C_run``
    are distinct fixed round constants.  For a fixed master seed the map
    ``k -> stream seed`` is a bijection on 64-bit words (a composition of a
    modular add, bijective mixes and an XOR with a constant), so distinct run
    indices can never collide.  The derived seed keys a PCG64 generator.
    Identical ``(master_seed, run_index)`` therefore reproduce a trajectory
    bit for bit, independent of worker count or scheduling.
    """

    master_seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.master_seed, (int, np.integer)) or isinstance(
            self.master_seed, bool
        ):
            raise ValidationError(
                f"master_seed must be an integer, got {self.master_seed!r}"
            )
        if not 0 <= self.master_seed <= _U64:
            raise ValidationError(
                f"master_seed must fit in 64 bits, got {self.master_seed}"
            )
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def stream_seed(self, run_index: int) -> int:
        if not isinstance(run_index, (int, np.integer)) or isinstance(run_index, bool):
            raise ValidationError(f"run_index must be an integer, got {run_index!r}")
        if run_index < 0:
            raise ValidationError(f"run_index must be >= 0, got {run_index}")
        a = _mix64(self.master_seed ^ _MASTER_ROUND)
        b = _mix64((int(run_index) + _RUN_ROUND) & _U64)
        return _mix64(a ^ b)

    def stream(self, run_index: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.stream_seed(run_index)))


def derive_stream(policy: SeedPolicy, run_index: int) -> np.random.Generator:
    """Per-run generator; see `SeedPolicy` for the derivation contract."""
    return policy.stream(run_index)


def horizon(model: ModelKind, n: int, factor: float) -> int:
    """``ceil(factor * n * ln n)`` interactions or ``ceil(factor * ln n)`` rounds.

    Floors at 1 so degenerate populations still get a positive budget.
    """
    if n < 1:
        raise ValidationError(f"population n must be >= 1, got {n}")
    if factor <= 0:
        raise ValidationError(f"horizon factor must be > 0, got {factor}")
    base = n * math.log(n) if model is ModelKind.SEQUENTIAL else math.log(n)
    return max(1, math.ceil(factor * base))


@dataclass
class CheckResult:
    """Outcome of an exhaustive numerical check.

    ``failures`` holds up to `max_recorded` offending tuples (shape depends on
    the check); ``worst`` is the largest violation magnitude observed, 0.0 for
    a clean pass.
    """

    name: str
    passed: bool
    checked: int
    worst: float = 0.0
    failures: list = field(default_factory=list)
    detail: str = ""

    max_recorded = 16

    def record(self, failure, magnitude: float) -> None:
        self.passed = False
        self.worst = max(self.worst, magnitude)
        if len(self.failures) < self.max_recorded:
            self.failures.append(failure)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"{self.name}: {status} ({self.checked} cases"
        if not self.passed:
            msg += f", worst violation {self.worst:.3e}, e.g. {self.failures[0]!r}"
        msg += ")"
        if self.detail:
            msg += f" {self.detail}"
        return msg
