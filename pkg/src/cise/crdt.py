"""Remove-wins set CRDT and a seeded multi-replica convergence simulator."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence


@dataclass(frozen=True)
class RemoveWinsSet:
    adds: frozenset = frozenset()
    removes: frozenset = frozenset()

    def __contains__(self, elt: Hashable) -> bool:
        return member(elt, self)

    def elements(self) -> frozenset:
        return self.adds - self.removes

    def __repr__(self) -> str:
        return f"RemoveWinsSet(adds={_fmt(self.adds)}, removes={_fmt(self.removes)})"


def _fmt(s: frozenset) -> str:
    return "{" + ", ".join(map(repr, sorted(s))) + "}"


def empty() -> RemoveWinsSet:
    return RemoveWinsSet()


def add_element(elt: Hashable, s: RemoveWinsSet) -> RemoveWinsSet:
    return RemoveWinsSet(s.adds | {elt}, s.removes)


def remove_element(elt: Hashable, s: RemoveWinsSet) -> RemoveWinsSet:
    return RemoveWinsSet(s.adds, s.removes | {elt})


def member(elt: Hashable, s: RemoveWinsSet) -> bool:
    return elt in s.adds and elt not in s.removes


def merge(s1: RemoveWinsSet, s2: RemoveWinsSet) -> RemoveWinsSet:
    # both components are grow-only, so union is the join
    return RemoveWinsSet(s1.adds | s2.adds, s1.removes | s2.removes)


def equal(s1: RemoveWinsSet, s2: RemoveWinsSet) -> bool:
    return s1.adds == s2.adds and s1.removes == s2.removes


# ---------------------------------------------------------------------------
# Replicas and events


@dataclass(frozen=True)
class Event:
    origin: int
    seq: int  # 1-based position in the origin's log
    kind: str  # "add" | "remove"
    elt: Hashable

    def apply(self, s: RemoveWinsSet) -> RemoveWinsSet:
        if self.kind == "add":
            return add_element(self.elt, s)
        return remove_element(self.elt, s)


@dataclass
class Replica:
    id: int
    state: RemoveWinsSet = field(default_factory=empty)
    log: list[Event] = field(default_factory=list)
    history: list[tuple[str, RemoveWinsSet]] = field(default_factory=list)

    def local(self, kind: str, elt: Hashable) -> Event:
        ev = Event(self.id, len(self.log) + 1, kind, elt)
        self.log.append(ev)
        self.state = ev.apply(self.state)
        self.history.append((f"{kind} {elt}", self.state))
        return ev

    def receive(self, ev: Event) -> None:
        self.state = ev.apply(self.state)
        self.history.append((f"recv r{ev.origin}#{ev.seq}", self.state))

    def absorb(self, other: RemoveWinsSet, src: int) -> None:
        self.state = merge(self.state, other)
        self.history.append((f"merge r{src}", self.state))

    def replay(self) -> RemoveWinsSet:
        s = empty()
        for ev in self.log:
            s = ev.apply(s)
        return s


class ScheduleError(ValueError):
    pass


# Schedule steps:
#   ("op", replica, kind, elt)        local update at a replica
#   ("deliver", src, dst, seq)        deliver event #seq of src's log to dst
#   ("merge", src, dst)               dst merges src's current state
@dataclass
class SimResult:
    converged: bool
    replicas: list[Replica]

    @property
    def final_states(self) -> list[RemoveWinsSet]:
        return [r.state for r in self.replicas]


def check_eventual_delivery(replica_count: int, steps: Sequence[tuple]) -> None:
    """Reject schedules in which some event never reaches some replica."""
    logs = {r: 0 for r in range(1, replica_count + 1)}
    delivered: set[tuple[int, int, int]] = set()
    # merges transfer everything the source knows, so track knowledge sets
    known: dict[int, set[tuple[int, int]]] = {r: set() for r in logs}
    for i, step in enumerate(steps, 1):
        tag = step[0]
        if tag == "op":
            r = step[1]
            _check_replica(r, replica_count, i)
            logs[r] += 1
            known[r].add((r, logs[r]))
        elif tag == "deliver":
            src, dst, seq = step[1:]
            _check_replica(src, replica_count, i)
            _check_replica(dst, replica_count, i)
            if not 1 <= seq <= logs[src]:
                raise ScheduleError(f"step {i}: r{src} has no event #{seq} yet")
            delivered.add((src, seq, dst))
            known[dst].add((src, seq))
        elif tag == "merge":
            src, dst = step[1:]
            _check_replica(src, replica_count, i)
            _check_replica(dst, replica_count, i)
            known[dst] |= known[src]
        else:
            raise ScheduleError(f"step {i}: unknown step {tag!r}")
    all_events = {(r, k) for r, n in logs.items() for k in range(1, n + 1)}
    for dst in logs:
        missing = all_events - known[dst]
        if missing:
            src, seq = min(missing)
            raise ScheduleError(f"event r{src}#{seq} is never delivered to r{dst}")


def _check_replica(r: int, n: int, i: int) -> None:
    if not 1 <= r <= n:
        raise ScheduleError(f"step {i}: replica r{r} out of range 1..{n}")


def simulate(replica_count: int, steps: Sequence[tuple]) -> SimResult:
    if replica_count < 1:
        raise ScheduleError("need at least one replica")
    check_eventual_delivery(replica_count, steps)
    replicas = [Replica(i) for i in range(1, replica_count + 1)]
    for step in steps:
        tag = step[0]
        if tag == "op":
            _, r, kind, elt = step
            replicas[r - 1].local(kind, elt)
        elif tag == "deliver":
            _, src, dst, seq = step
            replicas[dst - 1].receive(replicas[src - 1].log[seq - 1])
        else:
            _, src, dst = step
            replicas[dst - 1].absorb(replicas[src - 1].state, src)
    first = replicas[0].state
    return SimResult(all(equal(first, r.state) for r in replicas[1:]), replicas)


def random_schedule(rng: random.Random, replica_count: int = 3, events: int = 100,
                    elements: Iterable[Hashable] = range(4), dup_rate: float = 0.2) -> list[tuple]:
    """A random op/delivery interleaving with duplicates and reordering.

    ``events`` bounds the number of local updates.  Every update is delivered
    to every other replica at least once; pending deliveries are drained in a
    random order, so arrival order differs from issue order.
    """
    elements = list(elements)
    steps: list[tuple] = []
    pending: list[tuple[int, int, int]] = []
    sent: list[tuple[int, int, int]] = []
    counts = [0] * (replica_count + 1)
    n_ops = rng.randint(1, events)
    for _ in range(n_ops):
        r = rng.randint(1, replica_count)
        counts[r] += 1
        steps.append(("op", r, rng.choice(("add", "remove")), rng.choice(elements)))
        for dst in range(1, replica_count + 1):
            if dst != r:
                pending.append((r, dst, counts[r]))
        # deliver a random handful of pending events, possibly re-sending old ones
        rng.shuffle(pending)
        for _ in range(rng.randint(0, len(pending))):
            d = pending.pop()
            sent.append(d)
            steps.append(("deliver", *d))
        if sent and rng.random() < dup_rate:
            steps.append(("deliver", *rng.choice(sent)))
    rng.shuffle(pending)
    for d in pending:
        steps.append(("deliver", *d))
    return steps


# ---------------------------------------------------------------------------
# Scenario files
#
#   replicas 2
#   op r1 add 5
#   op r2 remove 5
#   deliver r1 r2 1
#   merge r2 r1
#   sync                 deliver every outstanding event (issue order)
#
# Blank lines and lines starting with '#' are ignored.


def parse_scenario(text: str) -> tuple[int, list[tuple]]:
    replica_count = None
    steps: list[tuple] = []
    logs: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            if words[0] == "replicas" and len(words) == 2:
                replica_count = int(words[1])
                logs = {r: 0 for r in range(1, replica_count + 1)}
            elif replica_count is None:
                raise ScheduleError("'replicas N' must come first")
            elif words[0] == "op" and len(words) == 4 and words[2] in ("add", "remove"):
                r = _rid(words[1])
                steps.append(("op", r, words[2], int(words[3])))
                logs[r] = logs.get(r, 0) + 1
            elif words[0] == "deliver" and len(words) == 4:
                steps.append(("deliver", _rid(words[1]), _rid(words[2]), int(words[3])))
            elif words[0] == "merge" and len(words) == 3:
                steps.append(("merge", _rid(words[1]), _rid(words[2])))
            elif words[0] == "sync" and len(words) == 1:
                steps.extend(_sync(steps, replica_count))
            else:
                raise ScheduleError(f"cannot parse {line!r}")
        except ValueError as exc:
            raise ScheduleError(f"line {lineno}: {exc}") from None
    if replica_count is None:
        raise ScheduleError("missing 'replicas N'")
    return replica_count, steps


def _rid(word: str) -> int:
    if not word.startswith("r"):
        raise ScheduleError(f"replica ids look like r1, r2, ...: {word!r}")
    return int(word[1:])


def _sync(steps: list[tuple], n: int) -> list[tuple]:
    counts = {r: 0 for r in range(1, n + 1)}
    issued = []
    done = set()
    for s in steps:
        if s[0] == "op":
            counts[s[1]] += 1
            issued.append((s[1], counts[s[1]]))
        elif s[0] == "deliver":
            done.add((s[1], s[3], s[2]))
    out = []
    for src, seq in issued:
        for dst in range(1, n + 1):
            if dst != src and (src, seq, dst) not in done:
                out.append(("deliver", src, dst, seq))
    return out
