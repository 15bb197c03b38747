"""Finite lambda terms with an explicit bottom element.

Terms are the surface syntax of the library: named variables, abstraction,
application, and the least element ``⊥``.  This module provides parsing and
printing, the conflict relation (whose emptiness is alpha-equivalence), the
depth-weighted ultrametric, the approximation order, and the height function.
All of these are parametrised by a strictness signature ``(a0, a1, a2)``
marking the lambda-body, function, and argument edges as strict (0) or
non-strict (1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

Sig = tuple[int, int, int]
Position = tuple[int, ...]

ALL_SIGS: tuple[Sig, ...] = tuple(
    (a0, a1, a2) for a0 in (0, 1) for a1 in (0, 1) for a2 in (0, 1)
)

#: the three signatures with unique infinitary normal forms
CANONICAL_SIGS: tuple[Sig, ...] = ((0, 0, 1), (1, 0, 1), (1, 1, 1))


def parse_sig(text: str) -> Sig:
    if len(text) != 3 or any(c not in "01" for c in text):
        raise ValueError(f"strictness signature must be three digits in {{0,1}}: {text!r}")
    return (int(text[0]), int(text[1]), int(text[2]))


def sig_str(sig: Sig) -> str:
    return "".join(str(b) for b in sig)


def adepth(sig: Sig, p: Position) -> int:
    """Depth of a position: the number of non-strict edges along it."""
    return sum(sig[i] for i in p)


def acut(sig: Sig, p: Position) -> Position:
    """The longest prefix of ``p`` ending in a non-strict edge."""
    for k in range(len(p), 0, -1):
        if sig[p[k - 1]] == 1:
            return p[:k]
    return ()


# ---------------------------------------------------------------------------
# Term syntax


class Term:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Bot(Term):
    pass


@dataclass(frozen=True, slots=True)
class Var(Term):
    name: str


@dataclass(frozen=True, slots=True)
class Abs(Term):
    binder: str
    body: Term


@dataclass(frozen=True, slots=True)
class App(Term):
    fun: Term
    arg: Term


BOT = Bot()

KEYWORDS = frozenset({"bot", "rec"})


def fresh_names(prefix: str = "_c"):
    """A deterministic supply of identifiers: _c0, _c1, ..."""
    return (f"{prefix}{i}" for i in itertools.count())


# ---------------------------------------------------------------------------
# Parsing


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


def tokenize(text: str) -> list[tuple[str, str, int]]:
    """Split into (kind, value, offset) triples; kinds: ident, bot, rec, punct."""
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "\\.()":
            toks.append(("punct", c, i))
            i += 1
            continue
        if c == "λ":  # λ behaves like backslash
            toks.append(("punct", "\\", i))
            i += 1
            continue
        if c == "⊥":  # ⊥
            toks.append(("bot", c, i))
            i += 1
            continue
        if c.isalpha():
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word == "bot":
                toks.append(("bot", word, i))
            elif word == "rec":
                toks.append(("rec", word, i))
            else:
                toks.append(("ident", word, i))
            i = j
            continue
        if c == "_":
            # internal identifiers (fresh names) are accepted on input too
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("ident", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    toks.append(("eof", "", n))
    return toks


class _TermParser:
    """Recursive descent for TERM ::= '\\' IDENT '.' TERM | APP."""

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

    def term(self) -> Term:
        kind, value, off = self.peek()
        if kind == "punct" and value == "\\":
            self.next()
            name = self.expect("ident")[1]
            self.expect("punct", ".")
            return Abs(name, self.term())
        return self.app()

    def app(self) -> Term:
        t = self.atom()
        if t is None:
            kind, value, off = self.peek()
            raise ParseError(f"expected a term, found {value or 'end of input'}", off)
        while True:
            u = self.atom()
            if u is None:
                return t
            t = App(t, u)

    def atom(self) -> Term | None:
        kind, value, off = self.peek()
        if kind == "ident":
            self.next()
            return Var(value)
        if kind == "bot":
            self.next()
            return BOT
        if kind == "punct" and value == "(":
            self.next()
            t = self.term()
            self.expect("punct", ")")
            return t
        if kind == "punct" and value == "\\":
            return None
        return None


def parse_term(text: str) -> Term:
    """Parse a term; application is left-associative, lambda scopes right."""
    toks = tokenize(text)
    p = _TermParser(toks)
    kind, value, off = p.peek()
    if kind == "rec":
        raise ParseError("'rec' literals denote trees, not terms", off)
    t = p.term()
    kind, value, off = p.peek()
    if kind != "eof":
        raise ParseError(f"trailing input {value!r}", off)
    return t


def render_term(t: Term, ascii_only: bool = False) -> str:
    """Print with minimal parentheses; inverse of parse_term up to alpha."""
    bot = "bot" if ascii_only else "⊥"
    lam = "\\"

    def go(t: Term, ctx: str) -> str:
        # ctx: 'top' (no parens needed), 'fun' (function side of app),
        # 'arg' (argument side of app)
        match t:
            case Bot():
                return bot
            case Var(name):
                return name
            case Abs(binder, body):
                s = f"{lam}{binder}.{go(body, 'top')}"
                return s if ctx == "top" else f"({s})"
            case App(fun, arg):
                s = f"{go(fun, 'fun')} {go(arg, 'arg')}"
                return s if ctx in ("top", "fun") else f"({s})"
        raise TypeError(f"not a term: {t!r}")

    return go(t, "top")


# ---------------------------------------------------------------------------
# Positions, conflicts, metric, order, height


def positions(t: Term) -> set[Position]:
    """All positions of subterms; bottom contributes none."""
    match t:
        case Bot():
            return set()
        case Var(_):
            return {()}
        case Abs(_, body):
            return {()} | {(0,) + p for p in positions(body)}
        case App(fun, arg):
            return {()} | {(1,) + p for p in positions(fun)} | {(2,) + p for p in positions(arg)}
    raise TypeError(f"not a term: {t!r}")


def _rename_free(t: Term, old: str, new: str) -> Term:
    match t:
        case Var(name):
            return Var(new) if name == old else t
        case Abs(binder, body):
            if binder == old:
                return t
            return Abs(binder, _rename_free(body, old, new))
        case App(fun, arg):
            return App(_rename_free(fun, old, new), _rename_free(arg, old, new))
        case _:
            return t


def conflicts(m: Term, n: Term) -> set[Position]:
    """Positions where the two terms structurally disagree.

    Abstractions are compared after renaming both binders to the same fresh
    variable, so the result is stable under alpha-conversion of bound
    variables.  Free variables are compared by name.
    """
    fresh = fresh_names()

    def go(m: Term, n: Term) -> set[Position]:
        match (m, n):
            case (Bot(), Bot()):
                return set()
            case (Var(a), Var(b)) if a == b:
                return set()
            case (App(f1, a1), App(f2, a2)):
                return {(1,) + p for p in go(f1, f2)} | {(2,) + p for p in go(a1, a2)}
            case (Abs(x, b1), Abs(y, b2)):
                z = next(fresh)
                return {(0,) + p for p in go(_rename_free(b1, x, z), _rename_free(b2, y, z))}
            case _:
                return {()}

    return go(m, n)


def alpha_eq(m: Term, n: Term) -> bool:
    return not conflicts(m, n)


def term_distance(sig: Sig, m: Term, n: Term) -> Fraction:
    """2^(-d) where d is the least depth of a conflict; 0 if alpha-equal."""
    cs = conflicts(m, n)
    if not cs:
        return Fraction(0)
    d = min(adepth(sig, p) for p in cs)
    return Fraction(1, 2 ** d)


def term_leq(sig: Sig, m: Term, n: Term) -> bool:
    """The approximation order: bottom may only grow at non-strict edges."""
    a0, a1, a2 = sig
    fresh = fresh_names()

    def grow_ok(a: int, child_m: Term, child_n: Term) -> bool:
        # at a strict edge, a bottom child may not become defined
        return a == 1 or not isinstance(child_m, Bot) or isinstance(child_n, Bot)

    def go(m: Term, n: Term) -> bool:
        if isinstance(m, Bot):
            return True
        match (m, n):
            case (Var(a), Var(b)):
                return a == b
            case (Abs(x, b1), Abs(y, b2)):
                if not grow_ok(a0, b1, b2):
                    return False
                z = next(fresh)
                return go(_rename_free(b1, x, z), _rename_free(b2, y, z))
            case (App(f1, u1), App(f2, u2)):
                return (
                    grow_ok(a1, f1, f2)
                    and grow_ok(a2, u1, u2)
                    and go(f1, f2)
                    and go(u1, u2)
                )
            case _:
                return False

    return go(m, n)


def term_height(sig: Sig, m: Term) -> int:
    a0, a1, a2 = sig
    match m:
        case Bot():
            return 0
        case Var(_):
            return 1
        case Abs(_, body):
            return max(1, term_height(sig, body) + a0)
        case App(fun, arg):
            return max(1, term_height(sig, fun) + a1, term_height(sig, arg) + a2)
    raise TypeError(f"not a term: {m!r}")
