"""Stability, activeness, bottom-instance membership, S-normal forms, and the
depth-bounded Bohm-like tree normalizer.

All the semi-decision procedures here return three-valued verdicts whose Yes
and No witnesses can be replayed.  Activeness of a subtree is what the
normalizer turns into a bottom leaf; signatures 001, 101 and 111 yield the
Bohm, Levy-Longo and Berarducci trees respectively.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .convergence import p_limit
from .rewriting import Beta, BohmBot, Trace, replace_at, run_strategy, try_step
from .terms import CANONICAL_SIGS, Position, Sig
from .trees import (
    APP,
    BVAR,
    CUT,
    FVAR,
    HOLE,
    LAM,
    UNKNOWN,
    Approximant,
    Node,
    app,
    bisimilar,
    canon,
    children,
    close_subtree,
    bind_fvars,
    bvar,
    cut,
    fvar,
    has_kind,
    hole,
    is_guarded,
    lam,
    map_graph,
    node_at,
    reachable,
    tree_of_term,
    unknown,
)
from .terms import parse_term


@dataclass(frozen=True)
class TriVerdict:
    value: str  # "yes" | "no" | "unknown"
    witness: object = None

    @property
    def is_yes(self) -> bool:
        return self.value == "yes"

    @property
    def is_no(self) -> bool:
        return self.value == "no"

    @property
    def is_unknown(self) -> bool:
        return self.value == "unknown"


def _yes(witness=None) -> TriVerdict:
    return TriVerdict("yes", witness)


def _no(witness=None) -> TriVerdict:
    return TriVerdict("no", witness)


_UNKNOWN = TriVerdict("unknown")

OMEGA = tree_of_term(parse_term(r"(\x.x x) (\x.x x)"))


def _check_tree(sig: Sig, t: Node) -> None:
    if has_kind(t, CUT, UNKNOWN):
        raise ValueError("analysis rejects Cut/Unknown leaves")
    if not is_guarded(sig, t):
        raise ValueError("analysis requires a guarded tree")


class _ShiftDetector:
    """Detects a reduction that repeats itself shifted ever deeper.

    Feed it the position and canonical key of each contracted redex subtree.
    A hit at step j means some earlier step i fired a bisimilar subtree at a
    proper prefix of the current position, with every step in between staying
    inside that prefix; the run from i can then be replayed from j forever,
    so the reduction never escapes.
    """

    def __init__(self):
        self.hist: list[tuple[Position, tuple]] = []

    def push(self, pos: Position, key: tuple) -> bool:
        hit = False
        lcp: Position | None = None  # common prefix of the steps after i
        for qp, qk in reversed(self.hist):
            if (
                qk == key
                and len(qp) < len(pos)
                and pos[: len(qp)] == qp
                and (lcp is None or lcp[: len(qp)] == qp)
            ):
                hit = True
                break
            if lcp is None:
                lcp = qp
            else:
                n = 0
                while n < min(len(lcp), len(qp)) and lcp[n] == qp[n]:
                    n += 1
                lcp = lcp[:n]
        self.hist.append((pos, key))
        return hit


# ---------------------------------------------------------------------------
# Head reduction: does a subtree ever expose a lambda at its root?

_whnf_cache: dict[tuple, TriVerdict] = {}


def reduces_to_lam(t: Node, fuel: int = 10_000) -> TriVerdict:
    """Semi-decides whether head beta reduction reaches a Lam root.

    Yes carries (reduct, list of contracted positions) for replay; No means
    the head is rigid, bottom, or loops (detected by exact state repetition
    or by the shifted-recurrence criterion); Unknown on fuel exhaustion.
    """
    key = canon(t)
    if key in _whnf_cache:
        return _whnf_cache[key]
    seen = {key}
    det = _ShiftDetector()
    cur = t
    positions: list[Position] = []
    verdict: TriVerdict | None = None
    for _ in range(fuel):
        if cur.kind == LAM:
            verdict = _yes((cur, positions))
            break
        if cur.kind != APP:
            verdict = _no(cur)
            break
        n, m = cur, 0
        spine_ids = {id(n)}
        infinite_spine = False
        while n.kind == APP:
            n = n.a
            m += 1
            if id(n) in spine_ids:
                infinite_spine = True  # the head spine loops in the graph
                break
            spine_ids.add(id(n))
        if infinite_spine or n.kind != LAM:
            verdict = _no(cur)  # rigid (variable), bottom, or infinite head
            break
        p: Position = (1,) * (m - 1)
        if det.push(p, canon(node_at(cur, p))):
            verdict = _no(cur)
            break
        cur = try_step(Beta(), cur, p, "beta").after
        positions.append(p)
        ck = canon(cur)
        if ck in seen:
            verdict = _no(cur)
            break
        seen.add(ck)
    if verdict is None:
        return _UNKNOWN
    _whnf_cache[key] = verdict
    return verdict


# ---------------------------------------------------------------------------
# Stability and activeness

def depth0_positions(sig: Sig, t: Node) -> list[tuple[Position, Node]]:
    """All positions of depth 0 (reachable through strict edges), shortlex."""
    out: list[tuple[Position, Node]] = []
    layer: list[tuple[Position, Node]] = [((), t)]
    while layer:
        nxt: list[tuple[Position, Node]] = []
        for p, n in layer:
            out.append((p, n))
            for i, c in children(n):
                if sig[i] == 0:
                    nxt.append((p + (i,), c))
        nxt.sort(key=lambda pn: pn[0])
        layer = nxt
    return out


def is_stable(sig: Sig, t: Node, fuel: int = 10_000, order: str = "leftmost") -> TriVerdict:
    """Can a beta redex ever appear at depth 0?

    Yes means stable: no reduct of t has a depth-0 redex.  The depth-0 region
    is frozen under deeper steps, so instability can only come from a present
    depth-0 redex or from a function child (under a non-strict edge) that
    head-reduces to a lambda.  No carries (preparatory positions, redex
    position, reduct) for replay.
    """
    _check_tree(sig, t)
    d0 = depth0_positions(sig, t)
    if order == "rightmost":
        d0 = list(reversed(d0))
    for p, n in d0:
        if n.kind == APP and n.a.kind == LAM:
            return _no(([], p, t))
    saw_unknown = False
    if sig[1] == 1:
        for p, n in d0:
            if n.kind != APP:
                continue
            v = reduces_to_lam(n.a, fuel)
            if v.is_yes:
                _, poss = v.witness
                prep = [p + (1,) + q for q in poss]
                u = t
                for r in prep:
                    u = try_step(Beta(), u, r, "beta").after
                return _no((prep, p, u))
            if v.is_unknown:
                saw_unknown = True
    return _UNKNOWN if saw_unknown else _yes()


_active_cache: dict[tuple, TriVerdict] = {}


def is_active(sig: Sig, t: Node, fuel: int = 10_000, order: str = "leftmost") -> TriVerdict:
    """Does t never reach a stable reduct?

    The strategy exposes a depth-0 redex (possibly after preparatory steps
    inside a function child), contracts it, and repeats.  An exact state
    repetition, or a shifted recurrence of the contracted subtree, shows the
    loop runs forever: Yes, with a destructive trace as witness.  Reaching a
    stable reduct gives No with that reduct.
    """
    key = (sig, canon(t))
    if key in _active_cache:
        return _active_cache[key]
    steps = []
    seen = {canon(t): 0}
    det = _ShiftDetector()
    cur = t
    spent = 0
    verdict: TriVerdict | None = None
    while spent < fuel and verdict is None:
        v = is_stable(sig, cur, fuel, order)
        if v.is_yes:
            verdict = _no(cur)
            break
        if v.is_unknown:
            return _UNKNOWN
        prep, q, _ = v.witness
        for r in prep:
            st = try_step(Beta(), cur, r, "beta", sig=sig)
            steps.append(st)
            cur = st.after
            spent += 1
        shifted = det.push(q, canon(node_at(cur, q)))
        st = try_step(Beta(), cur, q, "beta", sig=sig)
        steps.append(st)
        cur = st.after
        spent += 1
        ck = canon(cur)
        if ck in seen:
            tr = Trace(sig, Beta(), steps, cycle_at=seen[ck],
                       metadata={"stopped": "cycle", "evidence": "cycle"})
            verdict = _yes(tr)
            break
        seen[ck] = len(steps)
        if shifted:
            tr = Trace(sig, Beta(), steps, None,
                       metadata={"stopped": "fuel", "evidence": "shifted"})
            verdict = _yes(tr)
            break
    if verdict is None:
        return _UNKNOWN
    _active_cache[key] = verdict
    return verdict


def in_bot_instances(sig: Sig, t: Node, fuel: int = 10_000) -> TriVerdict:
    """Is t a bottom-instance of an active tree, other than bottom itself?

    Filling every Hole of t with Omega gives the canonical total instance;
    t belongs iff that instance is active.
    """
    _check_tree(sig, t)
    if t.kind == HOLE:
        return _no(None)
    inst = map_graph(t, lambda n: OMEGA if n.kind == HOLE else None)
    return is_active(sig, inst, fuel)


# ---------------------------------------------------------------------------
# S-normal forms

def _collapsible(sig: Sig, t: Node) -> set[int]:
    """ids of nodes whose subtree S-rewrites to bottom: least fixpoint of
    "is a Hole, or has a strict child that collapses"."""
    nodes = reachable(t)
    nu = {id(n) for n in nodes if n.kind == HOLE}
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if id(n) in nu:
                continue
            for i, c in children(n):
                if sig[i] == 0 and id(c) in nu:
                    nu.add(id(n))
                    changed = True
                    break
    return nu


def strict_nf(sig: Sig, t: Node) -> Node:
    """The unique normal form under the strictness rules alone.

    Cut and Unknown leaves are inert: they neither collapse nor seed a
    collapse.
    """
    masked = map_graph(t, lambda n: hole() if n.kind in (CUT, UNKNOWN) else None)
    if not is_guarded(sig, masked):
        raise ValueError("strict_nf requires a guarded tree")
    nu = _collapsible(sig, t)
    if not nu:
        return t
    return map_graph(t, lambda n: hole() if id(n) in nu else None)


# ---------------------------------------------------------------------------
# The Bohm-like tree normalizer

def bohm_tree(
    sig: Sig,
    t: Node,
    depth: int = 16,
    fuel: int = 10_000,
    order: str = "leftmost",
) -> Approximant:
    """Depth-bounded infinitary normal form, outside in.

    Active subtrees become Hole; stable ones contribute their frozen depth-0
    skeleton, and normalization recurses into the children hanging off
    non-strict edges one depth level down.  Leaves record honesty: Cut at the
    depth bound, Unknown on fuel exhaustion.  The final tree is S-normalized;
    Cut/Unknown block the collapse.
    """
    _check_tree(sig, t)
    flags = {"fuel": False}
    binder_ids = itertools.count()

    def norm(sub: Node, d: int) -> Node:
        if d >= depth:
            return cut()
        v = is_active(sig, sub, fuel, order)
        if v.is_yes:
            return hole()
        if v.is_unknown:
            flags["fuel"] = True
            return unknown()
        return emit(v.witness, d, [])

    def extract(c: Node, local: list[int], d: int) -> Node:
        cc = close_subtree(c, "__t")

        def rename(n: Node) -> Node | None:
            if n.kind == FVAR and n.a.startswith("__t"):
                e = int(n.a[3:])
                if e >= len(local):
                    raise ValueError("a bound variable escapes the input tree")
                return fvar(f"__b{local[-1 - e]}")
            return None

        return norm(map_graph(cc, rename), d + 1)

    def emit(n: Node, d: int, local: list[int]) -> Node:
        if n.kind in (HOLE, BVAR, FVAR):
            return Node(n.kind, n.a)
        if n.kind == LAM:
            b = next(binder_ids)
            if sig[0] == 0:
                body = emit(n.a, d, local + [b])
            else:
                body = extract(n.a, local + [b], d)
            return lam(bind_fvars(body, {f"__b{b}": 0}))
        if n.kind == APP:
            fun = emit(n.a, d, local) if sig[1] == 0 else extract(n.a, local, d)
            arg = emit(n.b, d, local) if sig[2] == 0 else extract(n.b, local, d)
            return app(fun, arg)
        raise TypeError(n.kind)

    assembled = norm(t, 0)
    result = strict_nf(sig, assembled)
    return Approximant(
        result,
        depth=depth,
        fuel_exhausted=flags["fuel"],
        non_canonical=sig not in CANONICAL_SIGS,
    )


# ---------------------------------------------------------------------------
# The m-route: normalization with explicit bottom steps

def m_route_tree(sig: Sig, t: Node, depth: int = 16, fuel: int = 10_000) -> Approximant:
    """Normalize by beta steps plus single bottom-steps on meaningless
    subtrees, then S-normalize.  Closed runs are exact; otherwise the trace's
    p-limit approximates, with Unknown marking the unsettled regions.
    """
    _check_tree(sig, t)
    flags = {"fuel": False}

    def oracle(n: Node) -> bool:
        v = in_bot_instances(sig, n, fuel)
        if v.is_unknown:
            flags["fuel"] = True
        return v.is_yes

    rules = BohmBot(sig, oracle)
    trace = run_strategy(rules, "leftmost-outermost", t, fuel, sig=sig)
    if trace.metadata["stopped"] == "normal_form":
        tree = strict_nf(sig, trace.final)
        return Approximant(tree, fuel_exhausted=flags["fuel"])
    ap = p_limit(trace, depth)
    return Approximant(strict_nf(sig, ap.tree), fuel_exhausted=True)


def clear_caches() -> None:
    _whnf_cache.clear()
    _active_cache.clear()
