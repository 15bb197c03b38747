"""Descendants, ancestors, complete developments, path labellings, and
confluence joins.

Descendants follow the classical case table for beta and strictness steps,
extended to omega-length lassos by the stabilization criterion: a position
descends through the whole lasso iff it descends through some finite prefix
and no later contraction reaches up to it.  Complete developments are
computed twice over: operationally (contract residuals until none are left)
and denotationally (path labellings), and the two must agree.
"""

from __future__ import annotations

from dataclasses import dataclass

from .convergence import p_limit
from .meaningless import bohm_tree, strict_nf
from .rewriting import (
    Beta,
    BetaStrict,
    RuleSystem,
    Step,
    Trace,
    _node_redex_tag,
    run_strategy,
    try_step,
)
from .terms import CANONICAL_SIGS, Position, Sig, acut, sig_str
from .trees import (
    APP,
    BVAR,
    CUT,
    FVAR,
    HOLE,
    LAM,
    UNKNOWN,
    Node,
    bisimilar,
    bvar,
    canon,
    children,
    has_kind,
    hole,
    in_dom,
    is_guarded,
    label,
    max_bvar_index,
    node_at,
)

POSITION_BOUND = 64  # matches the redex-search bound


def _is_prefix(p: Position, q: Position) -> bool:
    return q[: len(p)] == p


@dataclass(frozen=True)
class RedexSet:
    """A tree together with a finite set of redex occurrences in it."""

    tree: Node
    positions: frozenset[Position]

    def __init__(self, tree: Node, positions):
        object.__setattr__(self, "tree", tree)
        object.__setattr__(self, "positions", frozenset(tuple(p) for p in positions))


def _check_development_sig(sig: Sig) -> None:
    if not (sig[0] == 1 or sig[1] == 0):
        raise ValueError(
            f"developments require a signature with a0 = 1 or a1 = 0, got {sig_str(sig)}"
        )


def _validate_redexes(sig: Sig, rs: RedexSet) -> dict[Position, str]:
    rules = BetaStrict(sig)
    tags = {}
    for p in rs.positions:
        tag = _node_redex_tag(rules, node_at(rs.tree, p))
        if tag is None:
            raise ValueError(f"no redex at position {list(p)}")
        tags[p] = tag
    return tags


# ---------------------------------------------------------------------------
# Descendants and ancestors


def _bound_var_positions(body: Node, bound: int = POSITION_BOUND) -> list[Position]:
    """Positions inside the redex body holding the redex's bound variable."""
    out: list[Position] = []
    stack: list[tuple[Position, Node, int]] = [((), body, 0)]
    while stack:
        p, n, d = stack.pop()
        if n.kind == BVAR and n.a == d:
            out.append(p)
        if len(p) >= bound:
            continue
        if n.kind == LAM:
            stack.append((p + (0,), n.a, d + 1))
        elif n.kind == APP:
            stack.append((p + (1,), n.a, d))
            stack.append((p + (2,), n.b, d))
    return out


def _is_bound_var_at(body: Node, w: Position) -> bool:
    n, d = body, 0
    for i in w:
        if n.kind == LAM:
            d += 1
        n = node_at(n, (i,))
    return n.kind == BVAR and n.a == d


def _desc_step(sig: Sig, step: Step, us: set[Position], bound: int = POSITION_BOUND) -> set[Position]:
    """Single-step descendants by the case table."""
    p = step.position
    if step.rule in ("s", "bot"):
        return {u for u in us if not _is_prefix(p, u)}
    if step.rule != "beta":
        raise ValueError(f"descendants undefined for rule {step.rule!r}")
    out: set[Position] = set()
    var_occs: list[Position] | None = None
    body = None
    for u in us:
        if not _is_prefix(p, u):
            out.add(u)
            continue
        rest = u[len(p):]
        if rest == () or rest == (1,):
            continue  # the redex node and its lambda vanish
        if body is None:
            body = node_at(step.before, p + (1, 0))
        if rest[0] == 2:
            w = rest[1:]
            if var_occs is None:
                var_occs = _bound_var_positions(body, bound)
            for q in var_occs:
                if len(p) + len(q) + len(w) <= bound:
                    out.add(p + q + w)
        elif rest[:2] == (1, 0):
            w = rest[2:]
            if not _is_bound_var_at(body, w):
                out.add(p + w)
        # rest starting ⟨1,1⟩/⟨1,2⟩ cannot occur: ⟨1⟩ holds the lambda
    return out


def descendants(trace: Trace, positions, bound: int = POSITION_BOUND) -> frozenset[Position]:
    """Descendants of a position set through a finite trace or a lasso."""
    sig = trace.sig
    us = {tuple(p) for p in positions}
    for u in us:
        if not in_dom(trace.start, u):
            raise ValueError(f"position {list(u)} is not in the starting tree")
    if trace.cycle_at is None:
        if trace.metadata.get("stopped") == "fuel":
            raise ValueError("descendants through a fuel-truncated trace are undefined")
        cur = us
        for s in trace.steps:
            cur = _desc_step(sig, s, cur, bound)
        return frozenset(cur)
    cur = us
    for s in trace.steps[: trace.cycle_at]:
        cur = _desc_step(sig, s, cur, bound)
    cycle = trace.steps[trace.cycle_at:]
    cuts = [acut(sig, s.position) for s in cycle]
    persisting: set[Position] = set()
    seen: set[frozenset[Position]] = set()
    for _ in range(256):
        persisting |= {
            p for p in cur if all(not _is_prefix(c, p) for c in cuts)
        }
        key = frozenset(cur)
        if key in seen:
            return frozenset(persisting)
        seen.add(key)
        for s in cycle:
            cur = _desc_step(sig, s, cur, bound)
    raise RuntimeError("descendant sets did not stabilize over the lasso")


def ancestor(trace: Trace, p: Position) -> Position:
    """The unique position the final-tree position p descends from."""
    if trace.cycle_at is not None:
        raise ValueError("ancestors are defined for finite traces only")
    if not in_dom(trace.final, p):
        raise ValueError(f"position {list(p)} is not in the final tree")
    v = tuple(p)
    for step in reversed(trace.steps):
        v = _ancestor_step(step, v)
    return v


def _ancestor_step(step: Step, v: Position) -> Position:
    q = step.position
    if step.rule in ("s", "bot"):
        return v
    if step.rule != "beta":
        raise ValueError(f"ancestors undefined for rule {step.rule!r}")
    if not _is_prefix(q, v):
        return v
    w = v[len(q):]
    body = node_at(step.before, q + (1, 0))
    for o in _bound_var_positions(body):
        if _is_prefix(o, w):
            return q + (2,) + w[len(o):]
    return q + (1, 0) + w


# ---------------------------------------------------------------------------
# Complete developments, operational route


def _develop_raw(
    sig: Sig, tree: Node, positions: set[Position], fuel: int
) -> tuple[Trace, Node]:
    """Contract residuals outermost-first; no final S-normalization."""
    rules = BetaStrict(sig)
    cur = tree
    us = {tuple(p) for p in positions}
    steps: list[Step] = []
    seen: dict[tuple, int] = {}
    while us:
        if len(steps) >= fuel:
            raise RuntimeError("development did not finish within fuel")
        key = (canon(cur), frozenset(us))
        if key in seen:
            tr = Trace(sig, rules, steps, cycle_at=seen[key],
                       metadata={"stopped": "cycle"})
            return tr, p_limit(tr).tree
        seen[key] = len(steps)
        p = min(us, key=lambda q: (len(q), q))
        tag = _node_redex_tag(rules, node_at(cur, p))
        if tag is None:
            raise RuntimeError(f"residual at {list(p)} stopped being a redex")
        st = try_step(rules, cur, p, tag, sig=sig)
        steps.append(st)
        us = _desc_step(sig, st, us - {p})
        cur = st.after
    tr = Trace(sig, rules, steps, metadata={"stopped": "normal_form", "start": tree})
    return tr, cur


def develop(sig: Sig, rs: RedexSet, fuel: int = 10_000) -> tuple[Trace, Node]:
    """Complete development of a redex set, then S-normalization."""
    _check_development_sig(sig)
    _validate_redexes(sig, rs)
    if not is_guarded(sig, rs.tree):
        raise ValueError("development requires a guarded tree")
    trace, raw = _develop_raw(sig, rs.tree, set(rs.positions), fuel)
    return trace, strict_nf(sig, raw)


# ---------------------------------------------------------------------------
# Complete developments, denotational route (path labellings)


def path_labels(sig: Sig, rs: RedexSet, state_limit: int = 100_000) -> Node:
    """The development result read off from paths, without rewriting.

    A path state is (node, environment, relative redex set).  Entering a
    marked redex silently jumps into the lambda body, remembering the
    argument state; reading the bound variable of a consumed redex silently
    jumps to that argument state.  Real lambdas push a plain binder entry.
    Silent cycles mean a diverging path and produce bottom, as do result
    cycles that never cross a non-strict edge.
    """
    _check_development_sig(sig)
    tags = _validate_redexes(sig, rs)
    if not is_guarded(sig, rs.tree):
        raise ValueError("path labelling requires a guarded tree")
    # strictness redexes in the set are equivalent to leaving them alone and
    # S-normalizing at the end, which happens anyway
    us = frozenset(p for p in rs.positions if tags[p] == "beta")

    maxidx: dict[int, int] = {}

    def env_cap(n: Node) -> int:
        if id(n) not in maxidx:
            maxidx[id(n)] = max_bvar_index(n) + 1
        return maxidx[id(n)]

    def mk_state(n: Node, env: tuple, rel: frozenset) -> tuple:
        # keep just enough entries to cover the subtree's variable indices;
        # offset entries occupy no index position and ride along for free
        cap = env_cap(n)
        kept: list = []
        count = 0
        for e in reversed(env):
            if e[0] != "o":
                if count == cap:
                    break
                count += 1
            kept.append(e)
        if len(kept) < len(env):
            env = tuple(reversed(kept))
        return (n, env, rel)

    def suffixes(rel: frozenset, i: int) -> frozenset:
        return frozenset(u[1:] for u in rel if u and u[0] == i)

    def key(st: tuple) -> tuple:
        n, env, rel = st
        ek = tuple(
            e if e[0] != "s" else ("s", key(e[1])) for e in env
        )
        return (id(n), ek, rel)

    def resolve(st: tuple):
        """Follow silent edges; returns ('leaf', node) | ('emit', state) | ('div',).

        An environment holds binder entries ('b',), suspended argument states
        ('s', state), and offsets ('o', k): jumping into an argument plugs its
        result in under k output binders the argument's environment has never
        seen, so escaping indices are raised past them.
        """
        n, env, rel = st
        seen: set[tuple] = set()
        while True:
            k = key(mk_state(n, env, rel))
            if k in seen:
                return ("div",)
            seen.add(k)
            if () in rel and n.kind == APP and n.a.kind == LAM:
                arg_state = mk_state(n.b, env, suffixes(rel, 2))
                env = env + (("s", arg_state),)
                rel = suffixes(suffixes(rel, 1), 0)
                n = n.a.a
                continue
            if n.kind == BVAR:
                i = n.a
                above = 0  # output binders between here and the entry sought
                entry = None
                pos = len(env) - 1
                while pos >= 0:
                    e = env[pos]
                    if e[0] == "o":
                        above += e[1]
                    elif i == 0:
                        entry = e
                        break
                    else:
                        i -= 1
                        if e[0] == "b":
                            above += 1
                    pos -= 1
                if entry is None:
                    return ("leaf", bvar(above + i))  # escapes the whole tree
                if entry[0] == "s":
                    n, env, rel = entry[1]
                    if above:
                        if env and env[-1][0] == "o":
                            env = env[:-1] + (("o", env[-1][1] + above),)
                        else:
                            env = env + (("o", above),)
                    continue
                return ("leaf", bvar(above))
            return ("emit", mk_state(n, env, rel))

    memo: dict[tuple, Node] = {}

    def build(st: tuple) -> Node:
        st = mk_state(*st)
        k = key(st)
        if k in memo:
            return memo[k]
        if len(memo) > state_limit:
            raise RuntimeError("path-state graph exceeded its size limit")
        out = Node(HOLE)
        memo[k] = out
        r = resolve(st)
        if r[0] == "div":
            return out  # a diverging silent cycle: bottom
        if r[0] == "leaf":
            leaf = r[1]
            out.kind, out.a, out.b = leaf.kind, leaf.a, leaf.b
            return out
        n, env, rel = r[1]
        if n.kind in (FVAR, HOLE, BVAR):
            out.kind, out.a, out.b = n.kind, n.a, n.b
        elif n.kind == LAM:
            out.kind = LAM
            out.a = build((n.a, env + (("b",),), suffixes(rel, 0)))
        elif n.kind == APP:
            out.kind = APP
            out.a = build((n.a, env, suffixes(rel, 1)))
            out.b = build((n.b, env, suffixes(rel, 2)))
        else:
            raise TypeError(n.kind)
        return out

    result = build((rs.tree, (), us))
    result = _unguarded_to_hole(sig, result)
    return strict_nf(sig, result)


def _unguarded_to_hole(sig: Sig, t: Node) -> Node:
    """Replace nodes on strict-edge-only cycles by bottom (paths that extend
    forever without crossing a non-strict edge diverge)."""
    from .trees import map_graph, reachable

    bad: set[int] = set()
    for n in reachable(t):
        # can n reach itself through a nonempty chain of strict edges?
        frontier = [c for i, c in children(n) if sig[i] == 0]
        seen: set[int] = set()
        while frontier:
            c = frontier.pop()
            if c is n:
                bad.add(id(n))
                break
            if id(c) in seen:
                continue
            seen.add(id(c))
            frontier.extend(cc for i, cc in children(c) if sig[i] == 0)
    if not bad:
        return t
    return map_graph(t, lambda n: hole() if id(n) in bad else None)


# ---------------------------------------------------------------------------
# Strip-lemma joins


def strip_join(
    sig: Sig, long: Trace, single: Step, fuel: int = 10_000
) -> tuple[Trace, Trace, Node]:
    """Project a single step over a (possibly omega-length) reduction.

    Returns the joining reductions from both ends and the common tree; the
    projection is built tile by tile from complete developments of residuals.
    """
    if sig not in CANONICAL_SIGS:
        raise ValueError(
            "the strip lemma is only available for signatures 001, 101, 111; "
            "others admit unjoinable peaks"
        )
    if not bisimilar(long.start, single.before):
        raise ValueError("the two reductions must start from the same tree")
    rules = BetaStrict(sig)
    u0 = frozenset({single.position})

    def tile(t_cur: Node, us: set[Position], step: Step, u_cur: Node):
        tr_u, _ = _develop_raw(sig, t_cur, us, fuel)
        if tr_u.cycle_at is not None:
            raise RuntimeError("a tile development diverged")
        vs = {step.position}
        for s in tr_u.steps:
            vs = _desc_step(sig, s, vs)
        tr_v, u_next = _develop_raw(sig, u_cur, vs, fuel)
        if tr_v.cycle_at is not None:
            raise RuntimeError("a tile projection diverged")
        return _desc_step(sig, step, us), tr_v.steps, u_next

    t_cur = long.start
    us: set[Position] = set(u0)
    u_cur = single.after
    top_steps: list[Step] = []

    for step in long.steps[: long.cycle_at] if long.cycle_at is not None else long.steps:
        us, seg, u_cur = tile(t_cur, us, step, u_cur)
        top_steps.extend(seg)
        t_cur = step.after

    if long.cycle_at is None:
        if long.metadata.get("stopped") == "fuel":
            raise ValueError("cannot join over a fuel-truncated reduction")
        bottom_tr, bottom_raw = _develop_raw(sig, t_cur, us, fuel)
        common = strict_nf(sig, bottom_raw)
        top_tr = Trace(sig, rules, top_steps,
                       metadata={"stopped": "normal_form", "start": single.after})
        top_end = strict_nf(sig, u_cur)
        if not bisimilar(common, top_end):
            raise AssertionError("the two sides of the strip diagram disagree")
        return bottom_tr, top_tr, common

    # lasso: unroll the cycle until the whole tile row repeats
    cycle = long.steps[long.cycle_at:]
    boundaries: dict[tuple, int] = {}
    top_cycle_at: int | None = None
    for _ in range(256):
        bkey = (canon(t_cur), frozenset(us), canon(u_cur))
        if bkey in boundaries:
            top_cycle_at = boundaries[bkey]
            break
        boundaries[bkey] = len(top_steps)
        for step in cycle:
            us, seg, u_cur = tile(t_cur, us, step, u_cur)
            top_steps.extend(seg)
            t_cur = step.after
    if top_cycle_at is None:
        raise RuntimeError("the strip tiling over the lasso did not stabilize")

    if top_cycle_at == len(top_steps):
        # the projected side stopped producing steps: it is already settled
        top_tr = Trace(sig, rules, top_steps,
                       metadata={"stopped": "normal_form", "start": single.after})
        common = strict_nf(sig, u_cur)
    else:
        top_tr = Trace(sig, rules, top_steps, cycle_at=top_cycle_at,
                       metadata={"stopped": "cycle", "start": single.after})
        common = strict_nf(sig, p_limit(top_tr).tree)

    long_end = p_limit(long).tree
    u_omega = descendants(long, u0)
    bottom_tr, bottom_raw = _develop_raw(sig, long_end, set(u_omega), fuel)
    if bottom_tr.cycle_at is not None:
        bottom_end = strict_nf(sig, bottom_raw)
    else:
        bottom_end = strict_nf(sig, bottom_raw)
    if not bisimilar(common, bottom_end):
        raise AssertionError("the two sides of the strip diagram disagree")
    return bottom_tr, top_tr, common


# ---------------------------------------------------------------------------
# Joinability of peaks


@dataclass(frozen=True)
class JoinResult:
    status: str  # "joined" | "failed" | "unknown"
    tree: Node | None = None
    detail: str = ""

    @property
    def joined(self) -> bool:
        return self.status == "joined"


def _endpoint(trace: Trace, depth: int) -> Node:
    if trace.cycle_at is not None:
        return p_limit(trace, depth).tree
    if trace.metadata.get("stopped") == "fuel":
        return p_limit(trace, depth).tree
    return trace.final


def _beta_normalize(sig: Sig, tree: Node, fuel: int, depth: int) -> Node:
    cur = tree
    for _ in range(32):
        if has_kind(cur, UNKNOWN, CUT):
            return cur
        tr = run_strategy(Beta(), "leftmost-outermost", cur, fuel, sig=sig)
        if tr.metadata["stopped"] == "normal_form":
            return tr.final
        nxt = p_limit(tr, depth).tree
        if canon(nxt) == canon(cur):
            return nxt
        cur = nxt
    return cur


def _compare(a: Node, b: Node) -> JoinResult:
    incomplete = False
    seen: set[tuple[int, int]] = set()
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if (id(x), id(y)) in seen:
            continue
        seen.add((id(x), id(y)))
        if x.kind in (CUT, UNKNOWN) or y.kind in (CUT, UNKNOWN):
            incomplete = True
            continue
        if label(x) != label(y):
            return JoinResult("failed", detail="the normal forms disagree")
        for (_, cx), (_, cy) in zip(children(x), children(y)):
            stack.append((cx, cy))
    if incomplete:
        return JoinResult("unknown", detail="undetermined leaves prevent a verdict")
    return JoinResult("joined", a)


def joinability(
    sig: Sig,
    t: Node,
    trace1: Trace,
    trace2: Trace,
    fuel: int = 10_000,
    depth: int = 16,
) -> JoinResult:
    """Do the two reductions from t reach a common tree?

    Both endpoints are normalized under the traces' own rule discipline:
    plain beta traces get iterated beta normalization (no bottom rules), any
    other discipline gets the full infinitary normal form.
    """
    for tr in (trace1, trace2):
        if not bisimilar(tr.start, t):
            raise ValueError("both reductions must start at the given tree")
    pure_beta = isinstance(trace1.rules, Beta) and isinstance(trace2.rules, Beta)
    norms = []
    for tr in (trace1, trace2):
        end = _endpoint(tr, depth)
        if pure_beta:
            norms.append(_beta_normalize(sig, end, fuel, depth))
        else:
            if has_kind(end, UNKNOWN, CUT):
                return JoinResult("unknown", detail="an endpoint limit is undetermined")
            ap = bohm_tree(sig, end, depth, fuel)
            norms.append(ap.tree)
    return _compare(norms[0], norms[1])
