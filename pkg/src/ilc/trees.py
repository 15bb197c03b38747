"""Positional lambda trees, including infinite regular trees.

A tree is a finite rooted node graph whose edges may form cycles; unfolding
the graph yields a (possibly infinite) partial function from positions to
labels.  Bound variables are stored as de Bruijn indices; the positional
binder labels of the unfolded tree are derived on demand.  ``Hole`` nodes
represent positions outside the domain (the tree ``⊥`` is a single Hole), and
the analysis-only leaves ``Cut`` and ``Unknown`` mark depth-bounded and
fuel-exhausted verdicts.  They never occur in trees handed to the order,
metric, or rewrite operations.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .terms import (
    Abs,
    App,
    Bot,
    ParseError,
    Position,
    Sig,
    Term,
    Var,
    adepth,
    tokenize,
)

LAM = "lam"
APP = "app"
BVAR = "bvar"
FVAR = "fvar"
HOLE = "hole"
CUT = "cut"
UNKNOWN = "unknown"


class Node:
    """One graph node.  ``a``/``b`` hold children or the payload."""

    __slots__ = ("kind", "a", "b", "__weakref__")

    def __init__(self, kind: str, a=None, b=None):
        self.kind = kind
        self.a = a
        self.b = b

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"Node({self.kind})"


LambdaTree = Node  # trees are identified with their root node


def lam(child: Node) -> Node:
    return Node(LAM, child)


def app(left: Node, right: Node) -> Node:
    return Node(APP, left, right)


def bvar(index: int) -> Node:
    return Node(BVAR, index)


def fvar(name: str) -> Node:
    return Node(FVAR, name)


def hole() -> Node:
    return Node(HOLE)


def cut() -> Node:
    return Node(CUT)


def unknown() -> Node:
    return Node(UNKNOWN)


def label(n: Node) -> tuple:
    """Path-independent label used by order/metric comparisons."""
    if n.kind in (BVAR, FVAR):
        return (n.kind, n.a)
    return (n.kind,)


def children(n: Node) -> tuple[tuple[int, Node], ...]:
    """(edge index, child) pairs; edge 0 under lam, 1/2 under app."""
    if n.kind == LAM:
        return ((0, n.a),)
    if n.kind == APP:
        return ((1, n.a), (2, n.b))
    return ()


def child_at(n: Node, i: int) -> Node | None:
    if n.kind == LAM and i == 0:
        return n.a
    if n.kind == APP and i == 1:
        return n.a
    if n.kind == APP and i == 2:
        return n.b
    return None


def reachable(root: Node) -> list[Node]:
    """All nodes reachable from the root, in DFS preorder."""
    seen: dict[int, Node] = {}
    order: list[Node] = []
    stack = [root]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen[id(n)] = n
        order.append(n)
        for _, c in reversed(children(n)):
            stack.append(c)
    return order


def is_finite(root: Node) -> bool:
    """True iff the unfolding is a finite tree (no reachable cycle)."""
    state: dict[int, int] = {}  # 1 = on stack, 2 = done

    def visit(n: Node) -> bool:
        if state.get(id(n)) == 1:
            return False
        if state.get(id(n)) == 2:
            return True
        state[id(n)] = 1
        for _, c in children(n):
            if not visit(c):
                return False
        state[id(n)] = 2
        return True

    return visit(root)


def has_kind(root: Node, *kinds: str) -> bool:
    return any(n.kind in kinds for n in reachable(root))


def max_bvar_index(root: Node) -> int:
    """Largest de Bruijn index reachable anywhere, or -1."""
    idx = -1
    for n in reachable(root):
        if n.kind == BVAR:
            idx = max(idx, n.a)
    return idx


# ---------------------------------------------------------------------------
# Canonical forms and bisimulation


def canon(root: Node) -> tuple:
    """A canonical key: two trees get equal keys iff they are bisimilar.

    Computed by partition refinement (merging bisimilar nodes) followed by a
    canonical preorder serialization of the minimized graph.
    """
    nodes = reachable(root)
    block: dict[int, int] = {}
    # initial partition by label
    key_ids: dict[tuple, int] = {}
    for n in nodes:
        k = label(n)
        block[id(n)] = key_ids.setdefault(k, len(key_ids))
    while True:
        key_ids = {}
        new: dict[int, int] = {}
        for n in nodes:
            k = (block[id(n)], tuple(block[id(c)] for _, c in children(n)))
            new[id(n)] = key_ids.setdefault(k, len(key_ids))
        stable = len(key_ids) == len(set(block.values()))
        block = new
        if stable:  # refinement only ever splits blocks
            break
    # canonical serialization: visit representative graph in preorder
    reps: dict[int, Node] = {}
    for n in nodes:
        reps.setdefault(block[id(n)], n)
    serial: dict[int, int] = {}
    out: list[tuple] = []

    def visit(b: int):
        if b in serial:
            out.append(("ref", serial[b]))
            return
        serial[b] = len(serial)
        n = reps[b]
        out.append(("node", label(n)))
        for _, c in children(n):
            visit(block[id(c)])

    visit(block[id(root)])
    return tuple(out)


def bisimilar(s: Node, t: Node) -> bool:
    """Graph bisimulation; equality of the unfolded trees."""
    seen: set[tuple[int, int]] = set()
    stack = [(s, t)]
    while stack:
        x, y = stack.pop()
        if (id(x), id(y)) in seen:
            continue
        seen.add((id(x), id(y)))
        if label(x) != label(y):
            return False
        cx, cy = children(x), children(y)
        for (_, a), (_, b) in zip(cx, cy):
            stack.append((a, b))
    return True


# ---------------------------------------------------------------------------
# Conversions to and from terms


def tree_of_term(m: Term) -> Node:
    def go(t: Term, env: dict[str, int], depth: int) -> Node:
        match t:
            case Bot():
                return hole()
            case Var(name):
                if name in env:
                    return bvar(depth - 1 - env[name])
                return fvar(name)
            case Abs(binder, body):
                saved = env.get(binder)
                env[binder] = depth
                child = go(body, env, depth + 1)
                if saved is None:
                    env.pop(binder, None)
                else:
                    env[binder] = saved
                return lam(child)
            case App(fun, arg):
                return app(go(fun, env, depth), go(arg, env, depth))
        raise TypeError(f"not a term: {t!r}")

    return go(m, {}, 0)


def term_of_tree(t: Node) -> Term:
    """Inverse of tree_of_term on finite trees; binders named x0, x1, ..."""
    if not is_finite(t):
        raise ValueError("cannot convert an infinite (cyclic) tree to a term")
    counter = [0]

    def go(n: Node, binders: list[str]) -> Term:
        if n.kind == HOLE:
            return Bot()
        if n.kind in (CUT, UNKNOWN):
            raise ValueError(f"tree contains a {n.kind} leaf")
        if n.kind == BVAR:
            if n.a >= len(binders):
                raise ValueError("de Bruijn index escapes the tree")
            return Var(binders[-1 - n.a])
        if n.kind == FVAR:
            return Var(n.a)
        if n.kind == LAM:
            name = f"x{counter[0]}"
            counter[0] += 1
            return Abs(name, go(n.a, binders + [name]))
        if n.kind == APP:
            return App(go(n.a, binders), go(n.b, binders))
        raise TypeError(n.kind)

    return go(t, [])


def tree_of_source(text: str) -> Node:
    """Parse either a plain term or a ``rec`` tree literal."""
    return parse_tree(text)


# ---------------------------------------------------------------------------
# Positions


def node_at(t: Node, p: Position) -> Node:
    n = t
    for i in p:
        c = child_at(n, i)
        if c is None:
            raise KeyError(f"position {list(p)} leaves the tree at edge {i}")
        n = c
    return n


def in_dom(t: Node, p: Position) -> bool:
    try:
        n = node_at(t, p)
    except KeyError:
        return False
    return n.kind != HOLE


def label_at(t: Node, p: Position):
    """The label of the unfolded tree at p: 'lam', 'app', a free-variable
    label, or the position of the binder for bound variables."""
    n = t
    binders: list[Position] = []
    for k, i in enumerate(p):
        if n.kind == LAM:
            binders.append(p[:k])
        c = child_at(n, i)
        if c is None:
            raise KeyError(f"position {list(p)} not in the tree")
        n = c
    if n.kind == HOLE:
        raise KeyError(f"position {list(p)} not in the domain")
    if n.kind == BVAR:
        if n.a >= len(binders):
            raise ValueError("de Bruijn index escapes the tree")
        return binders[-1 - n.a]
    if n.kind == FVAR:
        return ("fvar", n.a)
    return n.kind


def bot_positions(t: Node, max_depth: int) -> set[Position]:
    """Positions of Hole leaves with plain length <= max_depth."""
    out: set[Position] = set()
    queue: deque[tuple[Node, Position]] = deque([(t, ())])
    while queue:
        n, p = queue.popleft()
        if n.kind == HOLE:
            out.add(p)
            continue
        if len(p) >= max_depth:
            continue
        for i, c in children(n):
            queue.append((c, p + (i,)))
    return out


def dom_positions(t: Node, max_len: int) -> list[Position]:
    """All domain positions of length <= max_len, in shortlex order."""
    out: list[Position] = []
    queue: deque[tuple[Node, Position]] = deque([(t, ())])
    while queue:
        n, p = queue.popleft()
        if n.kind == HOLE:
            continue
        out.append(p)
        if len(p) >= max_len:
            continue
        for i, c in children(n):
            queue.append((c, p + (i,)))
    return out


# ---------------------------------------------------------------------------
# Graph transformations


def map_graph(root: Node, leaf_fn) -> Node:
    """Copy the graph, letting ``leaf_fn(node)`` replace leaves (or return
    None to keep them).  Interior structure and cycles are preserved."""
    memo: dict[int, Node] = {}

    def go(n: Node) -> Node:
        if id(n) in memo:
            return memo[id(n)]
        r = leaf_fn(n)
        if r is not None:
            memo[id(n)] = r
            return r
        new = Node(n.kind)
        memo[id(n)] = new
        if n.kind == LAM:
            new.a = go(n.a)
        elif n.kind == APP:
            new.a = go(n.a)
            new.b = go(n.b)
        else:
            new.a, new.b = n.a, n.b
        return new

    return go(root)


def subtree_at(t: Node, p: Position, escape_prefix: str = "_e") -> Node:
    """The subtree at p; bound variables escaping it become free variables
    named ``_e0`` (innermost escaped binder), ``_e1``, ..."""
    n = node_at(t, p)
    return close_subtree(n, escape_prefix)


def close_subtree(n: Node, escape_prefix: str = "_e") -> Node:
    """Replace de Bruijn indices escaping ``n`` by fresh free variables."""
    cap = max_bvar_index(n) + 1
    memo: dict[tuple[int, int], Node] = {}

    def go(m: Node, d: int) -> Node:
        d = min(d, cap)
        key = (id(m), d)
        if key in memo:
            return memo[key]
        if m.kind == BVAR:
            out = m if m.a < d else fvar(f"{escape_prefix}{m.a - d}")
            memo[key] = out
            return out
        if m.kind == LAM:
            new = Node(LAM)
            memo[key] = new
            new.a = go(m.a, d + 1)
            return new
        if m.kind == APP:
            new = Node(APP)
            memo[key] = new
            new.a = go(m.a, d)
            new.b = go(m.b, d)
            return new
        memo[key] = m
        return m

    return go(n, 0)


def bind_fvars(root: Node, mapping: dict[str, int]) -> Node:
    """Turn free variables back into de Bruijn indices: a free variable in
    ``mapping`` at lambda-crossing depth d becomes BVar(mapping[name] + d)."""
    if not mapping:
        return root
    # nodes that cannot reach a mapped free variable are shared untouched
    relevant: set[int] = set()
    changed = True
    nodes = reachable(root)
    while changed:
        changed = False
        for n in nodes:
            if id(n) in relevant:
                continue
            if (n.kind == FVAR and n.a in mapping) or any(
                id(c) in relevant for _, c in children(n)
            ):
                relevant.add(id(n))
                changed = True
    memo: dict[tuple[int, int], Node] = {}
    limit = 4 * len(nodes) + max(mapping.values(), default=0) + 8

    def go(m: Node, d: int) -> Node:
        if id(m) not in relevant:
            return m
        if d > limit:
            raise ValueError("cannot rebind a variable occurring at unbounded depth")
        key = (id(m), d)
        if key in memo:
            return memo[key]
        if m.kind == FVAR:
            out = bvar(mapping[m.a] + d) if m.a in mapping else m
            memo[key] = out
            return out
        new = Node(m.kind, m.a, m.b)
        memo[key] = new
        if m.kind == LAM:
            new.a = go(m.a, d + 1)
        elif m.kind == APP:
            new.a = go(m.a, d)
            new.b = go(m.b, d)
        return new

    return go(root, 0)


# ---------------------------------------------------------------------------
# Guardedness, truncation, metric


def is_guarded(sig: Sig, t: Node) -> bool:
    """True iff every cycle in the graph crosses a non-strict edge;
    equivalently, no infinite branch of bounded depth exists."""
    if has_kind(t, CUT, UNKNOWN):
        raise ValueError("guardedness is undefined for Cut/Unknown leaves")
    # cycle search in the subgraph of strict edges
    state: dict[int, int] = {}

    def visit(n: Node) -> bool:
        st = state.get(id(n))
        if st == 1:
            return False
        if st == 2:
            return True
        state[id(n)] = 1
        for i, c in children(n):
            if sig[i] == 0 and not visit(c):
                return False
        state[id(n)] = 2
        return True

    return all(visit(n) for n in reachable(t))


def truncate(sig: Sig, t: Node, d: int) -> Node:
    """Restriction of the tree to positions of depth < d (a finite tree)."""
    if not is_guarded(sig, t):
        raise ValueError("cannot truncate an unguarded tree")

    def go(n: Node, depth: int) -> Node:
        if depth >= d:
            return hole()
        if n.kind == LAM:
            return lam(go(n.a, depth + sig[0]))
        if n.kind == APP:
            return app(go(n.a, depth + sig[1]), go(n.b, depth + sig[2]))
        return Node(n.kind, n.a, n.b)

    return go(t, 0)


def tree_distance(sig: Sig, s: Node, t: Node) -> Fraction:
    """2^(-d) with d the least depth of a disagreeing position; 0 if equal."""
    for x in (s, t):
        if not is_guarded(sig, x):
            raise ValueError("tree_distance requires guarded trees")
    # 0-1 BFS over the product graph: find the least depth of a disagreement
    best: dict[tuple[int, int], int] = {}
    queue: deque[tuple[Node, Node, int]] = deque([(s, t, 0)])
    result: int | None = None
    while queue:
        x, y, d = queue.popleft()
        if result is not None and d >= result:
            continue
        key = (id(x), id(y))
        if best.get(key, 1 << 60) <= d:
            continue
        best[key] = d
        if label(x) != label(y):
            result = d if result is None else min(result, d)
            continue
        for (i, a), (_, b) in zip(children(x), children(y)):
            nd = d + sig[i]
            if sig[i] == 0:
                queue.appendleft((a, b, nd))
            else:
                queue.append((a, b, nd))
    if result is None:
        return Fraction(0)
    return Fraction(1, 2 ** result)


# ---------------------------------------------------------------------------
# Tree literals: rec X. TERM


class _TreeParser:
    def __init__(self, toks):
        self.toks = toks
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def next(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, kind, value=None):
        t = self.next()
        if t[0] != kind or (value is not None and t[1] != value):
            raise ParseError(f"expected {value or kind}, found {t[1] or 'end of input'}", t[2])
        return t

    def term(self, binders: list[str], recs: dict[str, Node]) -> Node:
        kind, value, off = self.peek()
        if kind == "punct" and value == "\\":
            self.next()
            name = self.expect("ident")[1]
            self.expect("punct", ".")
            return lam(self.term(binders + [name], recs))
        if kind == "rec":
            self.next()
            name = self.expect("ident")[1]
            self.expect("punct", ".")
            placeholder = Node(HOLE)
            body = self.term(binders, recs | {name: placeholder})
            if body is placeholder:
                raise ParseError(f"unproductive rec binding {name!r}", off)
            placeholder.kind, placeholder.a, placeholder.b = body.kind, body.a, body.b
            return placeholder
        return self.app(binders, recs)

    def app(self, binders, recs) -> Node:
        t = self.atom(binders, recs)
        if t is None:
            kind, value, off = self.peek()
            raise ParseError(f"expected a term, found {value or 'end of input'}", off)
        while True:
            u = self.atom(binders, recs)
            if u is None:
                return t
            t = app(t, u)

    def atom(self, binders, recs) -> Node | None:
        kind, value, off = self.peek()
        if kind == "ident":
            self.next()
            if value in recs:
                return recs[value]
            # innermost binding wins for shadowed names
            for d, name in enumerate(reversed(binders)):
                if name == value:
                    return bvar(d)
            return fvar(value)
        if kind == "bot":
            self.next()
            return hole()
        if kind == "punct" and value == "(":
            self.next()
            t = self.term(binders, recs)
            self.expect("punct", ")")
            return t
        return None


def parse_tree(text: str) -> Node:
    """Parse a term or a regular-tree literal with ``rec X. TERM`` bindings."""
    toks = tokenize(text)
    p = _TreeParser(toks)
    t = p.term([], {})
    kind, value, off = p.peek()
    if kind != "eof":
        raise ParseError(f"trailing input {value!r}", off)
    return t


def render_tree(t: Node, ascii_only: bool = False, unfold: int | None = None) -> str:
    """Print a tree.  Cyclic trees print as ``rec`` literals; with ``unfold``
    set, cycles are unrolled that many times and then marked ``NAME...``."""
    bot = "bot" if ascii_only else "⊥"
    cut_s = "..." if ascii_only else "…"
    unk_s = "?"

    # nodes that are entered twice on some path (back-edge targets)
    loops: set[int] = set()
    state: dict[int, int] = {}

    def find(n: Node):
        st = state.get(id(n))
        if st == 1:
            loops.add(id(n))
            return
        if st == 2:
            return
        state[id(n)] = 1
        for _, c in children(n):
            find(c)
        state[id(n)] = 2

    find(t)
    rec_names: dict[int, str] = {}
    counter = [0]

    def go(n: Node, binders: list[str], ctx: str, budget: dict[int, int]) -> str:
        if id(n) in rec_names:
            if unfold is None:
                return rec_names[id(n)]
            if budget.get(id(n), 0) <= 0:
                return rec_names[id(n)] + cut_s
            budget = dict(budget)
            budget[id(n)] -= 1
            return body(n, binders, ctx, budget, named=False)
        if id(n) in loops:
            name = f"M{counter[0]}"
            counter[0] += 1
            rec_names[id(n)] = name
            if unfold is not None:
                budget = dict(budget)
                budget[id(n)] = unfold
                s = body(n, binders, "top", budget, named=False)
                del rec_names[id(n)]
                return s if ctx == "top" else f"({s})"
            s = f"rec {name}. {body(n, binders, 'top', budget, named=True)}"
            del rec_names[id(n)]
            return s if ctx == "top" else f"({s})"
        return body(n, binders, ctx, budget, named=False)

    def body(n: Node, binders: list[str], ctx: str, budget, named: bool) -> str:
        if n.kind == HOLE:
            return bot
        if n.kind == CUT:
            return cut_s
        if n.kind == UNKNOWN:
            return unk_s
        if n.kind == FVAR:
            return n.a
        if n.kind == BVAR:
            if n.a < len(binders):
                return binders[-1 - n.a]
            return f"_e{n.a - len(binders)}"
        if n.kind == LAM:
            name = f"x{len(binders)}"
            s = f"\\{name}.{go(n.a, binders + [name], 'top', budget)}"
            return s if ctx == "top" else f"({s})"
        if n.kind == APP:
            s = f"{go(n.a, binders, 'fun', budget)} {go(n.b, binders, 'arg', budget)}"
            return s if ctx in ("top", "fun") else f"({s})"
        raise TypeError(n.kind)

    return go(t, [], "top", {})


# ---------------------------------------------------------------------------
# Approximants


@dataclass(frozen=True)
class Approximant:
    """A depth-bounded tree whose leaves distinguish proven-bottom (Hole),
    depth-limit (Cut), and fuel-exhaustion (Unknown)."""

    tree: Node
    depth: int | None = None
    fuel_exhausted: bool = False
    non_canonical: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def has_unknown(self) -> bool:
        return has_kind(self.tree, UNKNOWN)

    @property
    def has_cut(self) -> bool:
        return has_kind(self.tree, CUT)

    def render(self, ascii_only: bool = False) -> str:
        return render_tree(self.tree, ascii_only=ascii_only)
