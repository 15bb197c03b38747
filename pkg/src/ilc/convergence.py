"""Convergence analysis of reduction traces.

Two limit notions coexist: m-convergence (metric limits with redex depths
tending to infinity) and p-convergence (the limit inferior of the sequence of
reduction contexts).  Lassos represent omega-length reductions exactly, so
both notions are computed exactly on them; fuel-truncated traces get honest
three-valued answers with Unknown markers in the limit tree.
"""

from __future__ import annotations

from dataclasses import dataclass

from .order import glb
from .rewriting import Step, Trace, replace_at
from .terms import Position, Sig, acut, sig_str
from .trees import (
    HOLE,
    Approximant,
    Node,
    child_at,
    hole,
    node_at,
    render_tree,
    unknown,
)


@dataclass(frozen=True)
class MVerdict:
    value: str  # "yes" | "no" | "unknown"
    witness_depth: int | None = None
    diagnostic: str | None = None

    @property
    def is_yes(self) -> bool:
        return self.value == "yes"

    @property
    def is_no(self) -> bool:
        return self.value == "no"


@dataclass(frozen=True)
class ConvergenceReport:
    m_converges: MVerdict
    p_limit: Approximant
    volatile: frozenset[Position]
    outermost_volatile: frozenset[Position]
    destructive: bool

    def to_json(self, ascii_only: bool = True) -> dict:
        doc = {
            "m": self.m_converges.value,
            "p_limit": render_tree(self.p_limit.tree, ascii_only=ascii_only),
            "volatile": sorted(list(p) for p in self.volatile),
            "outermost_volatile": sorted(list(p) for p in self.outermost_volatile),
            "destructive": self.destructive,
        }
        if self.m_converges.witness_depth is not None:
            doc["witness_depth"] = self.m_converges.witness_depth
        if self.m_converges.diagnostic:
            doc["diagnostic"] = self.m_converges.diagnostic
        return doc


def volatile_positions(
    trace: Trace, bound: int = 64
) -> tuple[frozenset[Position], frozenset[Position]]:
    """Volatile and outermost-volatile positions of a lasso.

    A position q is volatile iff some step in the cycle contracts a redex at
    p with acut(p) <= q <= p; since the cycle repeats forever, such steps
    recur cofinally.  Outermost-volatile positions have no volatile proper
    prefix.
    """
    if trace.cycle_at is None:
        raise ValueError("volatile positions are defined for lasso traces only")
    sig = trace.sig
    vol: set[Position] = set()
    for step in trace.cycle_steps:
        p = step.position
        lo = len(acut(sig, p))
        for k in range(lo, len(p) + 1):
            if k <= bound:
                vol.add(p[:k])
    outer = {
        q for q in vol if not any(q[:k] in vol for k in range(len(q)))
    }
    return frozenset(vol), frozenset(outer)


def _poison(g: Node, q: Position) -> Node:
    """Replace the Hole at or above position q by an Unknown leaf."""
    cur: Node = g
    prefix: list[int] = []
    for i in q:
        if cur.kind == HOLE:
            break
        nxt = child_at(cur, i)
        if nxt is None:
            break
        prefix.append(i)
        cur = nxt
    if cur.kind != HOLE:
        return g  # nothing claimed bottom here
    return replace_at(g, tuple(prefix), unknown())


def p_limit(trace: Trace, depth: int = 16) -> Approximant:
    """The p-limit: the limit inferior of the reduction contexts.

    Closed traces converge to their final tree; lassos converge exactly to
    the glb of the cycle's contexts; fuel-truncated traces yield the glb of a
    recent window of contexts with Unknown marking the still-active regions.
    """
    if not trace.steps:
        return Approximant(trace.start)
    if trace.cycle_at is not None:
        ctxs = [s.context for s in trace.cycle_steps]
        return Approximant(glb(trace.sig, ctxs))
    if trace.metadata.get("stopped") == "normal_form":
        return Approximant(trace.final)
    window = min(len(trace.steps), max(2, 2 * depth))
    recent = trace.steps[-window:]
    g = glb(trace.sig, [s.context for s in recent])
    for s in recent:
        g = _poison(g, acut(trace.sig, s.position))
    return Approximant(g, fuel_exhausted=True)


def analyze_m_convergence(trace: Trace) -> MVerdict:
    """m-convergence verdict: do the contraction depths tend to infinity?

    Finite closed traces m-converge trivially.  A lasso repeats its cycle's
    depths cofinally, so the minimum cycle depth witnesses divergence.
    Fuel-truncated traces are undecided; a strictly increasing recent depth
    profile is reported as a diagnostic hint.
    """
    if not trace.steps or trace.metadata.get("stopped") == "normal_form":
        return MVerdict("yes")
    if trace.cycle_at is not None:
        d = min(s.depth for s in trace.cycle_steps)
        return MVerdict("no", witness_depth=d)
    depths = [s.depth for s in trace.steps]
    tail = depths[-16:]
    if len(tail) >= 2 and all(a < b for a, b in zip(tail, tail[1:])):
        diag = "observed contraction depths are strictly increasing"
    else:
        diag = "no cycle detected before fuel ran out"
    return MVerdict("unknown", diagnostic=diag)


def weak_limit(trees, sig: Sig, depth: int = 16, fuel: int = 10_000) -> Approximant:
    """Limit inferior of a sequence of trees (not of reduction contexts)."""
    from .order import liminf_approx

    return liminf_approx(sig, trees, depth, fuel)


def analyze(trace: Trace, depth: int = 16, bound: int = 64) -> ConvergenceReport:
    m = analyze_m_convergence(trace)
    pl = p_limit(trace, depth)
    if trace.cycle_at is not None:
        vol, outer = volatile_positions(trace, bound)
    else:
        vol, outer = frozenset(), frozenset()
    return ConvergenceReport(m, pl, vol, outer, destructive=() in vol)


def context_via_glb(sig: Sig, step: Step) -> Node:
    """The reduction context computed from its order-theoretic definition:
    the greatest lower bound of the step's endpoints with the redex position
    excluded from the domain (removals propagate up through strict edges).
    """
    g = glb(sig, [step.before, step.after])
    p = step.position
    # if the glb already lacks p, it is the wanted context
    cur = g
    for i in p:
        if cur.kind == HOLE:
            return g
        nxt = child_at(cur, i)
        if nxt is None:
            return g
        cur = nxt
    if cur.kind == HOLE:
        return g
    out = replace_at(g, p, hole())
    for k in range(len(p) - 1, -1, -1):
        edge = p[k]
        if sig[edge] == 1:
            break
        # a strict child was deleted: the parent cannot stay either
        if node_at(out, p[: k + 1]).kind == HOLE:
            out = replace_at(out, p[:k], hole())
    return out


def report_json(trace: Trace, depth: int = 16, bound: int = 64) -> dict:
    r = analyze(trace, depth, bound)
    doc = r.to_json()
    doc["sig"] = sig_str(trace.sig)
    doc["stopped"] = trace.metadata.get("stopped")
    return doc
