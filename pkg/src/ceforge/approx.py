"""Stage-indexed approximations: c.e. sets, c.e. reals, adversary schedules.

The "universal" machine here is a finite, stage-stamped adversary schedule
with prefix-free domain and weight below 1/4; the engines only ever read its
shortest-description lengths and its domain weight, so any such schedule is
a faithful desk-scale stand-in.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .bitcore import INFINITE, Dyadic, ExtendedLength, ZERO
from .machines import FreeBlockSet, check_prefix_free

#: Strict upper bound on the adversary schedule weight.
SCHEDULE_WEIGHT_BOUND = Dyadic.pow2_neg(2)


class BlockOverflow(RuntimeError):
    """A coding block received more flips than it has room for."""


class ScenarioError(ValueError):
    """A scenario file violates a structural invariant."""


class CESetApprox:
    """A computably enumerable set given by its finite enumeration schedule."""

    def __init__(self, schedule: list[tuple[int, int]] | None = None) -> None:
        self.schedule: list[tuple[int, int]] = []
        self._stage_of: dict[int, int] = {}
        for element, stage in schedule or []:
            self.add(element, stage)

    def add(self, element: int, stage: int) -> None:
        if element < 0 or stage < 0:
            raise ScenarioError("elements and stages must be naturals")
        if element in self._stage_of:
            raise ScenarioError(f"element {element} enumerated twice")
        self.schedule.append((element, stage))
        self._stage_of[element] = stage

    def contains(self, element: int, stage: int) -> bool:
        entered = self._stage_of.get(element)
        return entered is not None and entered <= stage

    def stage_of(self, element: int) -> int | None:
        return self._stage_of.get(element)

    def elements_at(self, stage: int) -> set[int]:
        return {e for e, s in self.schedule if s <= stage}

    def restrict(self, n: int, stage: int) -> str:
        """The first ``n`` characteristic bits at ``stage``."""
        return "".join(
            "1" if self.contains(i, stage) else "0" for i in range(n)
        )


def restrict(bits: list[int] | CESetApprox, n: int, stage: int = 0) -> str:
    """First ``n`` characteristic bits of a set approximation or bit vector."""
    if isinstance(bits, CESetApprox):
        return bits.restrict(n, stage)
    return "".join(
        "1" if i < len(bits) and bits[i] else "0" for i in range(n)
    )


class CERealApprox:
    """Stagewise binary expansions of a nondecreasing dyadic sequence.

    Valid instances satisfy two constraints: the sequence is nondecreasing as
    reals (a bit may only drop when a more significant bit rises), and bit
    ``n`` changes at most ``2**n`` times over all stages, where the value at
    stage 0 counts as a change from the implicit all-zero state.
    """

    def __init__(self, bits_per_stage: list[list[int]]) -> None:
        if not bits_per_stage:
            raise ValueError("need at least one stage")
        self.bits_per_stage = [list(v) for v in bits_per_stage]
        for vec in self.bits_per_stage:
            if any(b not in (0, 1) for b in vec):
                raise ValueError("bit vectors must contain only 0/1")
        width = max(len(v) for v in self.bits_per_stage)
        for vec in self.bits_per_stage:
            vec.extend([0] * (width - len(vec)))
        self.width = width
        for prev, cur in zip(self.bits_per_stage, self.bits_per_stage[1:]):
            for n in range(width):
                if prev[n] == 1 and cur[n] == 0:
                    if not any(
                        prev[i] == 0 and cur[i] == 1 for i in range(n)
                    ):
                        raise ValueError(
                            f"bit {n} drops without a more significant rise"
                        )

    @property
    def stages(self) -> int:
        return len(self.bits_per_stage)

    def bit(self, n: int, stage: int) -> int:
        vec = self.bits_per_stage[stage]
        return vec[n] if n < len(vec) else 0

    def change_stages(self, n: int) -> list[int]:
        """Stages at which bit ``n`` changes (stage 0 counts from zero)."""
        changes = []
        prev = 0
        for stage in range(self.stages):
            cur = self.bit(n, stage)
            if cur != prev:
                changes.append(stage)
                prev = cur
        return changes


def block_range(k: int) -> tuple[int, int]:
    """Positions ``[2**k - 1, 2**(k+1) - 1)`` reserved for bit ``k``."""
    return (1 << k) - 1, (1 << (k + 1)) - 1


def encode_real(real: CERealApprox, stages: int | None = None) -> CESetApprox:
    """Encode a c.e. real's oscillations into a c.e. set, block by block.

    Block ``k`` occupies positions ``[2**k - 1, 2**(k+1) - 1)``; the ``j``-th
    change of bit ``k`` enumerates the largest block element not yet present,
    stamped with the stage of the change.
    """
    if stages is None:
        stages = real.stages
    result = CESetApprox()
    for k in range(real.width):
        lo, hi = block_range(k)
        changes = [s for s in real.change_stages(k) if s < stages]
        if len(changes) > hi - lo:
            raise BlockOverflow(
                f"bit {k} changed {len(changes)} times, block holds {hi - lo}"
            )
        for j, stage in enumerate(changes):
            result.add(hi - 1 - j, stage)
    return result


def decode_real(encoded: CESetApprox, stage: int, n: int) -> list[int]:
    """Recover bits ``0..n-1`` at ``stage`` from flip-count parities."""
    bits = []
    for k in range(n):
        lo, hi = block_range(k)
        count = sum(
            1 for pos in range(lo, hi) if encoded.contains(pos, stage)
        )
        bits.append(count % 2)
    return bits


@dataclass(frozen=True)
class ScheduleEvent:
    stage: int
    codeword: str
    output: str


class UniversalSchedule:
    """Stage-stamped enumeration of (codeword, output) pairs standing in
    for the universal machine; prefix-free domain, weight < 1/4."""

    def __init__(self, events: list[ScheduleEvent]) -> None:
        self.events = sorted(events, key=lambda e: (e.stage, e.codeword))
        check_prefix_free([e.codeword for e in self.events])
        total = ZERO
        for event in self.events:
            total = total + Dyadic.pow2_neg(len(event.codeword))
        if not total < SCHEDULE_WEIGHT_BOUND:
            raise ScenarioError(
                f"schedule weight {total} is not below 1/4"
            )
        self.weight = total

    def k_at(self, output: str, stage: int) -> ExtendedLength:
        """Shortest description length of ``output`` enumerated by ``stage``."""
        best: ExtendedLength = INFINITE
        for event in self.events:
            if event.stage <= stage and event.output == output:
                if len(event.codeword) < best:
                    best = len(event.codeword)
        return best

    def k_at_n(self, n: int, stage: int) -> ExtendedLength:
        """K(n)[stage], identifying the number ``n`` with the string 0^n."""
        return self.k_at("0" * n, stage)


@dataclass
class Scenario:
    """One engine input: adversary schedule plus the given c.e. sets."""

    schedule: UniversalSchedule
    set_a: CESetApprox
    set_d: CESetApprox
    halting: CESetApprox
    stages: int

    def to_json(self) -> str:
        payload = {
            "universal_events": [
                [e.stage, e.codeword, e.output] for e in self.schedule.events
            ],
            "set_a": sorted(self.set_a.schedule),
            "set_d": sorted(self.set_d.schedule),
            "halting": sorted(self.halting.schedule),
            "stages": self.stages,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"malformed scenario JSON: {exc}") from exc
        try:
            events = [
                ScheduleEvent(int(s), str(c), str(o))
                for s, c, o in payload["universal_events"]
            ]
            for event in events:
                if event.codeword.strip("01") or event.output.strip("01"):
                    raise ScenarioError("codewords/outputs must be binary")
                if not event.codeword:
                    raise ScenarioError("empty codeword")
            return cls(
                schedule=UniversalSchedule(events),
                set_a=CESetApprox([tuple(p) for p in payload["set_a"]]),
                set_d=CESetApprox([tuple(p) for p in payload["set_d"]]),
                halting=CESetApprox([tuple(p) for p in payload["halting"]]),
                stages=int(payload["stages"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"bad scenario structure: {exc}") from exc


@dataclass
class GenParams:
    """Knobs for deterministic scenario generation.

    ``zero_budget_share`` controls how much of the adversary's activity goes
    to descriptions of 0^n versus evolving initial segments of the given
    sets; the split is a free parameter of the generator.
    """

    stages: int = 10_000
    events: int = 400
    active_stages: int = 1_200
    set_size: int = 14
    element_bound: int = 48
    halting_size: int = 6
    zero_budget_share: float = 0.45
    min_length: int = 4
    max_length: int = 14
    max_output: int = 160

    def validate(self) -> None:
        if self.stages < 1 or self.events < 0:
            raise ValueError("stages must be >= 1 and events >= 0")
        if not 1 <= self.active_stages <= self.stages:
            raise ValueError("active_stages must lie in [1, stages]")


def _pick_length(
    rng: random.Random, params: GenParams, remaining: Dyadic
) -> int:
    length = rng.randint(params.min_length, params.max_length)
    # Never spend more than half the remaining budget on one event, so the
    # stream can always continue and the total stays strictly below 1/4.
    while Dyadic.pow2_neg(length - 1) > remaining:
        length += 1
    return length


def gen_scenario(seed: int, params: GenParams | None = None) -> Scenario:
    """Deterministic pseudo-random scenario; same seed, same scenario."""
    params = params or GenParams()
    params.validate()
    rng = random.Random(seed)

    def gen_set(size: int, bound: int, lo: int = 1) -> CESetApprox:
        ce = CESetApprox()
        elements = rng.sample(range(lo, bound), min(size, bound - lo))
        for element in elements:
            ce.add(element, rng.randint(1, params.active_stages))
        return ce

    set_a = gen_set(params.set_size, params.element_bound)
    set_d = gen_set(params.set_size, params.element_bound)
    halting = CESetApprox()
    for n in range(params.halting_size):
        if rng.random() < 0.7:
            halting.add(n, rng.randint(1, params.active_stages))

    free = FreeBlockSet()
    budget = SCHEDULE_WEIGHT_BOUND - Dyadic.pow2_neg(params.max_length + 2)
    spent = ZERO
    events: list[ScheduleEvent] = []
    described: list[str] = []
    for _ in range(params.events):
        stage = rng.randint(1, params.active_stages)
        roll = rng.random()
        if described and roll < 0.15:
            # Re-describe a known output with a shot at a shorter codeword,
            # so K values actually drop and the repair subroutines fire.
            output = rng.choice(described)
        elif roll < 0.15 + params.zero_budget_share:
            if rng.random() < 0.6:
                n = rng.randint(0, params.element_bound + 12)
            else:
                n = rng.randint(1, max(2, min(stage, params.max_output)))
            output = "0" * n
        else:
            source = set_a if rng.random() < 0.5 else set_d
            if rng.random() < 0.5:
                n = rng.randint(1, params.element_bound + 12)
            else:
                n = rng.randint(
                    1, max(2, min(2 * stage, params.max_output))
                )
            output = source.restrict(n, stage)
        length = _pick_length(rng, params, budget - spent)
        codeword = free.allocate(length)
        spent = spent + Dyadic.pow2_neg(length)
        events.append(ScheduleEvent(stage, codeword, output))
        described.append(output)

    return Scenario(
        schedule=UniversalSchedule(events),
        set_a=set_a,
        set_d=set_d,
        halting=halting,
        stages=params.stages,
    )
