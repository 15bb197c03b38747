"""The approximation order on lambda trees: comparison, glb, lub, liminf.

All computations run on the finite node graphs of regular trees.  Comparison
and greatest lower bounds are greatest fixpoints on product graphs; least
upper bounds of chains reduce to the maximal element (the union-of-domains
characterisation is validated against it); limits inferior are exact for
eventually periodic sequences and honestly approximated otherwise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .terms import Position, Sig
from .trees import (
    APP,
    CUT,
    HOLE,
    LAM,
    UNKNOWN,
    Approximant,
    Node,
    app,
    bisimilar,
    canon,
    child_at,
    children,
    has_kind,
    hole,
    is_guarded,
    label,
    node_at,
    truncate,
    unknown,
)


@dataclass(frozen=True)
class OrderVerdict:
    result: bool
    witness: Position | None = None  # a violated-clause location iff False

    def __bool__(self) -> bool:
        return self.result


def _check_inputs(sig: Sig, *ts: Node) -> None:
    for t in ts:
        if has_kind(t, CUT, UNKNOWN):
            raise ValueError("order operations reject Cut/Unknown leaves")
        if not is_guarded(sig, t):
            raise ValueError("order operations require guarded trees")


def tree_leq(sig: Sig, s: Node, t: Node) -> OrderVerdict:
    """Decide the tree order.

    Clauses checked on the product graph: (a) the domain of ``s`` is included
    in that of ``t``; (b) labels agree on the common domain; (c) wherever the
    greater tree has a child at a strict edge under a position of the smaller
    tree's domain, the smaller tree has it too.  The witness reported for a
    failure is a shortest offending position.
    """
    _check_inputs(sig, s, t)
    seen: set[tuple[int, int]] = set()
    queue: deque[tuple[Node, Node, Position]] = deque([(s, t, ())])
    while queue:
        x, y, p = queue.popleft()
        if (id(x), id(y)) in seen:
            continue
        seen.add((id(x), id(y)))
        if x.kind == HOLE:
            continue  # bottom is below everything at a non-strict or root slot
        if y.kind == HOLE:
            return OrderVerdict(False, p)  # domain inclusion fails
        if label(x) != label(y):
            return OrderVerdict(False, p)
        for (i, cx), (_, cy) in zip(children(x), children(y)):
            if sig[i] == 0 and cx.kind == HOLE and cy.kind != HOLE:
                return OrderVerdict(False, p + (i,))  # strict-child clause
            queue.append((cx, cy, p + (i,)))
    return OrderVerdict(True)


_HOLE = hole()  # shared absorbing element for product constructions


def _tuple_children(nodes: tuple[Node, ...], i: int) -> tuple[Node, ...]:
    out = []
    for n in nodes:
        c = child_at(n, i)
        out.append(c if c is not None else _HOLE)
    return tuple(out)


def glb(sig: Sig, ts: Sequence[Node]) -> Node:
    """Greatest lower bound of a nonempty finite set of guarded trees.

    The domain is the largest position set with unanimous labels that is
    prefix closed and closed under taking children at strict edges whenever
    any member has them; computed as a greatest fixpoint on the product
    graph, with labels inherited from the members.
    """
    ts = list(ts)
    if not ts:
        raise ValueError("glb of an empty set")
    _check_inputs(sig, *ts)

    root = tuple(ts)
    # collect reachable product states
    states: dict[tuple[int, ...], tuple[Node, ...]] = {}
    stack = [root]
    while stack:
        st = stack.pop()
        key = tuple(id(n) for n in st)
        if key in states:
            continue
        states[key] = st
        if all(n.kind not in (HOLE,) for n in st) and len({label(n) for n in st}) == 1:
            n0 = st[0]
            for i, _ in children(n0):
                stack.append(_tuple_children(st, i))

    def locally_ok(st: tuple[Node, ...]) -> bool:
        if any(n.kind == HOLE for n in st):
            return False
        return len({label(n) for n in st}) == 1

    ok = {key for key, st in states.items() if locally_ok(st)}
    # greatest fixpoint: a state stays only while all forced strict children stay
    changed = True
    while changed:
        changed = False
        for key in list(ok):
            st = states[key]
            for i, _ in children(st[0]):
                cs = _tuple_children(st, i)
                if sig[i] == 0 and any(c.kind != HOLE for c in cs):
                    ckey = tuple(id(n) for n in cs)
                    if ckey not in ok:
                        ok.discard(key)
                        changed = True
                        break

    memo: dict[tuple[int, ...], Node] = {}

    def build(st: tuple[Node, ...]) -> Node:
        key = tuple(id(n) for n in st)
        if key not in ok:
            return hole()
        if key in memo:
            return memo[key]
        n0 = st[0]
        new = Node(n0.kind, n0.a, n0.b)
        memo[key] = new
        if n0.kind == LAM:
            new.a = build(_tuple_children(st, 0))
        elif n0.kind == APP:
            new.a = build(_tuple_children(st, 1))
            new.b = build(_tuple_children(st, 2))
        return new

    return build(root)


def lub_chain(sig: Sig, ts: Sequence[Node]) -> Node:
    """Least upper bound of a finite ascending chain.

    The result is the union of the domains with inherited labels; for a
    finite chain that union is realised by the last element, which is
    cross-checked against the explicit union construction.
    """
    ts = list(ts)
    if not ts:
        raise ValueError("lub of an empty chain")
    _check_inputs(sig, *ts)
    for k in range(len(ts) - 1):
        v = tree_leq(sig, ts[k], ts[k + 1])
        if not v:
            raise ValueError(f"not a chain: element {k} is not below element {k + 1}")

    # explicit union-of-domains construction over the product graph
    memo: dict[tuple[int, ...], Node] = {}

    def build(st: tuple[Node, ...]) -> Node:
        key = tuple(id(n) for n in st)
        if key in memo:
            return memo[key]
        defined = [n for n in st if n.kind != HOLE]
        if not defined:
            return hole()
        n0 = defined[-1]
        new = Node(n0.kind, n0.a, n0.b)
        memo[key] = new
        if n0.kind == LAM:
            new.a = build(_tuple_children(st, 0))
        elif n0.kind == APP:
            new.a = build(_tuple_children(st, 1))
            new.b = build(_tuple_children(st, 2))
        return new

    union = build(tuple(ts))
    if not bisimilar(union, ts[-1]):
        raise AssertionError("union of chain domains disagrees with the maximum")
    return ts[-1]


@dataclass(frozen=True)
class Lasso:
    """An eventually periodic sequence: prefix then a repeating period."""

    prefix: tuple[Node, ...]
    period: tuple[Node, ...]

    def __post_init__(self):
        if not self.period:
            raise ValueError("a lasso needs a nonempty period")


def liminf_approx(
    sig: Sig,
    seq: Sequence[Node] | Lasso | Iterable[Node],
    depth: int,
    fuel: int,
) -> Approximant:
    """Limit inferior of a tree sequence.

    Finite lists converge to their last element; lassos are exact (the glb of
    the period); for open-ended generators a sliding-window glb is truncated
    at ``depth`` and only trusted once it is stable over a confirmation
    window, with Unknown leaves marking the unstable remainder.
    """
    if isinstance(seq, Lasso):
        return Approximant(glb(sig, list(seq.period)), depth=depth)
    if isinstance(seq, (list, tuple)):
        if not seq:
            raise ValueError("liminf of an empty sequence")
        return Approximant(seq[-1], depth=depth)
    return _liminf_window(sig, iter(seq), depth, fuel)


def _liminf_window(sig: Sig, it: Iterator[Node], depth: int, fuel: int) -> Approximant:
    window = max(2, 2 * depth)
    recent: deque[Node] = deque(maxlen=window)
    candidate: Node | None = None
    prev: Node | None = None
    stable = 0
    last: Node | None = None
    for _ in range(fuel):
        try:
            t = next(it)
        except StopIteration:
            if last is None:
                raise ValueError("liminf of an empty sequence") from None
            return Approximant(last, depth=depth)  # a closed sequence
        last = t
        recent.append(t)
        cur = truncate(sig, glb(sig, list(recent)), depth)
        if candidate is not None and bisimilar(cur, candidate):
            stable += 1
            if stable >= window and len(recent) == window:
                return Approximant(cur, depth=depth)
        else:
            prev, candidate, stable = candidate, cur, 0
    # fuel exhausted: report the candidate with Unknown where it moved last
    if candidate is None:
        return Approximant(unknown(), depth=depth, fuel_exhausted=True)
    marked = _mark_unstable(candidate, prev)
    return Approximant(marked, depth=depth, fuel_exhausted=True)


def _mark_unstable(cur: Node, prev: Node | None) -> Node:
    """Replace subtrees where the last two candidates disagreed by Unknown."""
    if prev is None:
        return unknown()

    def go(x: Node, y: Node) -> Node:
        if label(x) != label(y):
            return unknown()
        new = Node(x.kind, x.a, x.b)
        if x.kind == LAM:
            new.a = go(x.a, y.a)
        elif x.kind == APP:
            new.a = go(x.a, y.a)
            new.b = go(x.b, y.b)
        return new

    return go(cur, prev)
