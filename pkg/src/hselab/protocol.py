"""Executable rounds of the key distribution protocol.

One round: Alice draws a letter x and c-1 indices, sends the states
|v_{a_k}> from basis x; an optional interceptor measures and resends each
state; Bob measures slot k in the k-th basis of a random ordered tuple of
distinct letters; the round survives sifting iff every outcome differs
from the announced index, in which case Bob's letter is the one basis he
did not use.

Seed discipline: trial k of role r draws from the substream (seed, r, k),
so adding or removing the interceptor never perturbs Alice's or Bob's
draws, and trials can run in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParameter
from .hilbert import Basis, StateVector, born_sample
from .rates import ProtocolConfig
from .rng import RandomStream

ALICE, BOB, EVE = "alice", "bob", "eve"


@dataclass(frozen=True)
class TrialOutcome:
    """Full record of one protocol round.

    `index_error_slots` lists the slots where Bob happened to measure in
    Alice's basis and saw a different index - the events counted by the
    index transmission error rate.
    """

    trial_id: int
    x: int
    a: tuple
    y: tuple
    b: tuple
    sifted: bool
    bob_letter: int | None
    index_error_slots: tuple


@dataclass
class EveInterceptor:
    """Intercept-and-resend attacker with one fixed measurement basis."""

    basis: Basis
    rng: RandomStream
    intercept_fraction: float = 1.0

    def for_trial(self, trial_id: int) -> "EveInterceptor":
        return EveInterceptor(self.basis, self.rng.substream(trial_id), self.intercept_fraction)

    def intercept(self, state: StateVector) -> tuple[int, StateVector]:
        """Measure one in-flight state; return (outcome, resent eigenstate)."""
        outcome = born_sample(state, self.basis, self.rng)
        return outcome, self.basis.vectors[outcome]

    def maybe_intercept(self, state: StateVector) -> tuple[int | None, StateVector]:
        """Like intercept, but honors a partial interception fraction."""
        if self.intercept_fraction < 1.0 and self.rng.uniform() >= self.intercept_fraction:
            return None, state
        outcome = born_sample(state, self.basis, self.rng)
        return outcome, self.basis.vectors[outcome]


def eve_intercept(state: StateVector, eve: EveInterceptor) -> StateVector:
    """The state Bob receives after interception: Eve's measured eigenstate."""
    return eve.intercept(state)[1]


def alice_prepare(x: int, config: ProtocolConfig, rng: RandomStream):
    """Draw c-1 uniform i.i.d. indices (repeats allowed) and prepare the
    corresponding states from basis x.  Returns (states, announcement)."""
    if not 0 <= x < config.c:
        raise InvalidParameter(f"letter {x} outside 0..{config.c - 1}")
    basis = config.basis_set.bases[x]
    announcement = tuple(rng.randint(config.d) for _ in range(config.c - 1))
    states = [basis.vectors[a] for a in announcement]
    return states, announcement


def bob_choose_bases(config: ProtocolConfig, rng: RandomStream) -> tuple:
    """Uniform ordered tuple of c-1 distinct letters (all c! tuples equally
    likely), drawn as a Fisher-Yates prefix with one uniform per slot."""
    pool = list(range(config.c))
    chosen = []
    for k in range(config.c - 1):
        chosen.append(pool.pop(rng.randint(len(pool))))
    return tuple(chosen)


def sift(a: tuple, b: tuple) -> bool:
    """A round survives iff every measured index differs from the
    announced one."""
    if len(a) != len(b):
        raise InvalidParameter(f"tuple lengths differ: {len(a)} vs {len(b)}")
    return all(ak != bk for ak, bk in zip(a, b))


def infer_letter(y: tuple, c: int) -> int:
    """The unique letter of 0..c-1 absent from Bob's basis tuple."""
    missing = set(range(c)).difference(y)
    if len(y) != c - 1 or len(missing) != 1:
        raise InvalidParameter(f"{y} is not an ordered tuple of {c - 1} distinct letters")
    return missing.pop()


def run_trial(
    config: ProtocolConfig, trial_id: int, seed: int, letters=None
) -> TrialOutcome:
    """Execute one full round in-process.

    `letters` optionally supplies Alice's raw string (for reproducing
    worked examples); the letter substream position is skipped so her
    index draws are identical either way.
    """
    alice_rng = RandomStream(seed, ALICE, trial_id)
    if letters is None:
        x = alice_rng.randint(config.c)
    else:
        x = letters[trial_id]
        alice_rng.skip(1)
    states, announced = alice_prepare(x, config, alice_rng)

    if config.eve is not None:
        eve = EveInterceptor(
            config.eve, RandomStream(seed, EVE, trial_id), config.intercept_fraction
        )
        states = [eve.maybe_intercept(state)[1] for state in states]

    bob_rng = RandomStream(seed, BOB, trial_id)
    y = bob_choose_bases(config, bob_rng)
    outcomes = tuple(
        born_sample(state, config.basis_set.bases[basis_letter], bob_rng)
        for state, basis_letter in zip(states, y)
    )

    sifted = sift(announced, outcomes)
    return TrialOutcome(
        trial_id=trial_id,
        x=x,
        a=announced,
        y=y,
        b=outcomes,
        sifted=sifted,
        bob_letter=infer_letter(y, config.c) if sifted else None,
        index_error_slots=tuple(
            k for k in range(config.c - 1) if y[k] == x and outcomes[k] != announced[k]
        ),
    )


class AliceSession:
    """Alice's side of a multi-trial session, one trial at a time."""

    def __init__(self, config: ProtocolConfig, seed: int, letters=None):
        self.config = config
        self._root = RandomStream(seed, ALICE)
        self._letters = letters
        self.raw_string: list[int] = []
        self.key: list[int] = []
        self._sift_results: dict[int, bool] = {}

    def states_for_trial(self, trial_id: int):
        """Draw this trial's letter and indices; returns (x, states, a)."""
        rng = self._root.substream(trial_id)
        if self._letters is None:
            x = rng.randint(self.config.c)
        else:
            x = self._letters[trial_id]
            rng.skip(1)
        if len(self.raw_string) != trial_id:
            raise InvalidParameter(f"trials must run in order, expected {len(self.raw_string)}")
        self.raw_string.append(x)
        states, announced = alice_prepare(x, self.config, rng)
        return x, states, announced

    def record_sift(self, trial_id: int, sifted: bool) -> None:
        self._sift_results[trial_id] = sifted
        if sifted:
            self.key.append(self.raw_string[trial_id])


@dataclass
class _PendingTrial:
    y: tuple
    measured: list = field(default_factory=list)


class BobSession:
    """Bob's side of a multi-trial session.

    Measurements happen as states arrive; sifting happens once the
    announcement arrives; the outcome's letter field is filled in only if
    Alice later discloses her raw string for comparison.
    """

    def __init__(self, config: ProtocolConfig, seed: int):
        self.config = config
        self._root = RandomStream(seed, BOB)
        self._pending: _PendingTrial | None = None
        self._rng: RandomStream | None = None
        self._records: list[tuple] = []
        self.key: list[int] = []

    def begin_trial(self, trial_id: int) -> tuple:
        if self._pending is not None:
            raise InvalidParameter("previous trial not concluded")
        if trial_id != len(self._records):
            raise InvalidParameter(f"trials must run in order, expected {len(self._records)}")
        self._rng = self._root.substream(trial_id)
        self._pending = _PendingTrial(y=bob_choose_bases(self.config, self._rng))
        return self._pending.y

    def measure(self, slot: int, state: StateVector) -> int:
        pending = self._require_pending()
        if slot != len(pending.measured):
            raise InvalidParameter(f"slot {slot} out of order, expected {len(pending.measured)}")
        basis = self.config.basis_set.bases[pending.y[slot]]
        outcome = born_sample(state, basis, self._rng)
        pending.measured.append(outcome)
        return outcome

    def conclude(self, trial_id: int, announced: tuple):
        """Apply the sifting rule; returns (sifted, inferred letter or None)."""
        pending = self._require_pending()
        if len(pending.measured) != self.config.c - 1:
            raise InvalidParameter("announcement arrived before all states were measured")
        if len(announced) != self.config.c - 1:
            raise InvalidParameter(f"announcement must list {self.config.c - 1} indices")
        sifted = sift(announced, tuple(pending.measured))
        letter = infer_letter(pending.y, self.config.c) if sifted else None
        if sifted:
            self.key.append(letter)
        self._records.append((trial_id, announced, pending.y, tuple(pending.measured), sifted, letter))
        self._pending = None
        return sifted, letter

    def outcomes(self, alice_letters=None) -> list[TrialOutcome]:
        """Materialize TrialOutcomes; Alice's letters (if disclosed) fill
        the x and error-slot fields, else they stay at -1/empty."""
        results = []
        for trial_id, announced, y, measured, sifted, letter in self._records:
            if alice_letters is None:
                x, err_slots = -1, ()
            else:
                x = alice_letters[trial_id]
                err_slots = tuple(
                    k for k in range(self.config.c - 1) if y[k] == x and measured[k] != announced[k]
                )
            results.append(
                TrialOutcome(
                    trial_id=trial_id,
                    x=x,
                    a=announced,
                    y=y,
                    b=measured,
                    sifted=sifted,
                    bob_letter=letter,
                    index_error_slots=err_slots,
                )
            )
        return results

    def _require_pending(self) -> _PendingTrial:
        if self._pending is None:
            raise InvalidParameter("no trial in progress")
        return self._pending
