"""Command-line front end.

Subcommands: tree (infinitary normal form), trace (run a strategy and report
convergence), dist (tree metric), order (comparison and glb), join
(confluence check for a peak), dev (complete development, both routes).
Exit codes: 0 success, 1 parse error, 2 an Unknown or Cut leaf in the
output, 3 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import convergence, developments, meaningless
from .order import glb, tree_leq
from .rewriting import (
    Beta,
    BetaStrict,
    BohmBot,
    Eta,
    Strict,
    redexes,
    run_strategy,
    trace_export,
)
from .terms import ParseError, parse_sig, sig_str
from .trees import (
    CUT,
    UNKNOWN,
    bisimilar,
    has_kind,
    is_guarded,
    parse_tree,
    render_tree,
    tree_distance,
)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_UNKNOWN = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common_flags(p: _Parser) -> None:
    p.add_argument("--sig", default="111", help="strictness signature, three digits (default 111)")
    p.add_argument("--depth", type=int, default=16, help="depth bound (default 16)")
    p.add_argument("--fuel", type=int, default=10_000, help="step budget (default 10000)")
    p.add_argument("--format", choices=["text", "json"], default="text")
    enc = p.add_mutually_exclusive_group()
    enc.add_argument("--ascii", dest="ascii_only", action="store_true", default=None)
    enc.add_argument("--unicode", dest="ascii_only", action="store_false")


def _build_parser() -> _Parser:
    p = _Parser(prog="ilc", description="partial-order infinitary lambda calculi")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tree", parents=[], help="infinitary normal form")
    _common_flags(t)
    t.add_argument("term")

    tr = sub.add_parser("trace", help="run a reduction strategy")
    _common_flags(tr)
    tr.add_argument("--rules", choices=["beta", "eta", "strict", "betas", "bohm"], default="beta")
    tr.add_argument("--strategy", choices=["lmo", "po", "d0"], default="lmo")
    tr.add_argument("term")

    d = sub.add_parser("dist", help="tree distance")
    _common_flags(d)
    d.add_argument("left")
    d.add_argument("right")

    o = sub.add_parser("order", help="order comparison and glb")
    _common_flags(o)
    o.add_argument("left")
    o.add_argument("right")

    j = sub.add_parser("join", help="joinability of two strategies' reductions")
    _common_flags(j)
    j.add_argument("--rules", choices=["beta", "betas"], default="betas")
    j.add_argument("term")

    dv = sub.add_parser("dev", help="complete development of a redex set")
    _common_flags(dv)
    dv.add_argument(
        "--redexes",
        default="",
        help="positions as digit strings joined by commas, e.g. 'e' for the root, '1,102'",
    )
    dv.add_argument("--all", action="store_true", help="develop every beta redex")
    dv.add_argument("term")
    return p


def _rules_for(name: str, sig):
    if name == "beta":
        return Beta()
    if name == "eta":
        return Eta()
    if name == "strict":
        return Strict(sig)
    if name == "betas":
        return BetaStrict(sig)
    if name == "bohm":
        return BohmBot(sig, lambda n: meaningless.in_bot_instances(sig, n, 10_000).is_yes)
    raise ValueError(name)


def _ascii_only(args) -> bool:
    if args.ascii_only is not None:
        return args.ascii_only
    enc = getattr(sys.stdout, "encoding", None) or ""
    return enc.lower() not in ("utf-8", "utf8")


def _parse_positions(text: str) -> list[tuple[int, ...]]:
    if text == "":
        return []
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if chunk in ("", "e", "root"):
            out.append(())
        else:
            if not all(c in "012" for c in chunk):
                raise ValueError(f"bad position {chunk!r}")
            out.append(tuple(int(c) for c in chunk))
    return out


def _emit(doc, args, out) -> int:
    """Print a result and derive the exit code from its honesty markers."""
    code = EXIT_OK
    if args.format == "json":
        print(json.dumps(doc["json"], ensure_ascii=True, sort_keys=True), file=out)
    else:
        print(doc["text"], file=out)
    if doc.get("unknown"):
        code = EXIT_UNKNOWN
    return code


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        sig = parse_sig(args.sig)
    except ValueError as e:
        print(f"ilc: {e}", file=err)
        return EXIT_CONFIG
    if args.depth < 0 or args.fuel < 0:
        print("ilc: depth and fuel must be nonnegative", file=err)
        return EXIT_CONFIG
    ascii_only = _ascii_only(args)

    def load(text):
        t = parse_tree(text)
        if not is_guarded(sig, t):
            raise ParseError("the tree is not guarded for this signature", 0)
        return t

    try:
        if args.command == "tree":
            t = load(args.term)
            ap = meaningless.bohm_tree(sig, t, args.depth, args.fuel)
            rendered = render_tree(ap.tree, ascii_only=ascii_only)
            doc = {
                "text": rendered,
                "json": {
                    "sig": sig_str(sig),
                    "tree": render_tree(ap.tree, ascii_only=True),
                    "fuel_exhausted": ap.fuel_exhausted,
                    "non_canonical": ap.non_canonical,
                },
                "unknown": ap.has_unknown or ap.has_cut,
            }
            return _emit(doc, args, out)

        if args.command == "trace":
            t = load(args.term)
            rules = _rules_for(args.rules, sig)
            trace = run_strategy(rules, args.strategy, t, args.fuel, sig=sig)
            report = convergence.report_json(trace, args.depth)
            exported = trace_export(trace, report)
            lines = []
            for i, s in enumerate(trace.steps):
                lines.append(
                    f"{i:4d}  {s.rule:4s} at {''.join(map(str, s.position)) or 'e'}"
                    f"  -> {render_tree(s.after, ascii_only=ascii_only)}"
                )
            lines.append(f"stopped: {trace.metadata['stopped']}"
                         + (f" (cycle at {trace.cycle_at})" if trace.cycle_at is not None else ""))
            lines.append(f"m-convergence: {report['m']}")
            lines.append(f"p-limit: {report['p_limit']}")
            unknown = report["m"] == "unknown" or has_kind(
                convergence.p_limit(trace, args.depth).tree, UNKNOWN, CUT
            )
            doc = {"text": "\n".join(lines), "json": exported, "unknown": unknown}
            return _emit(doc, args, out)

        if args.command == "dist":
            a, b = load(args.left), load(args.right)
            d = tree_distance(sig, a, b)
            doc = {"text": str(d), "json": {"distance": str(d)}, "unknown": False}
            return _emit(doc, args, out)

        if args.command == "order":
            a, b = load(args.left), load(args.right)
            ab = tree_leq(sig, a, b)
            ba = tree_leq(sig, b, a)
            g = glb(sig, [a, b])
            gs = render_tree(g, ascii_only=ascii_only)
            text = (
                f"left <= right: {bool(ab)}\n"
                f"right <= left: {bool(ba)}\n"
                f"glb: {gs}"
            )
            doc = {
                "text": text,
                "json": {
                    "leq": bool(ab),
                    "geq": bool(ba),
                    "glb": render_tree(g, ascii_only=True),
                },
                "unknown": False,
            }
            return _emit(doc, args, out)

        if args.command == "join":
            t = load(args.term)
            rules = _rules_for(args.rules, sig)
            tr1 = run_strategy(rules, "lmo", t, args.fuel, sig=sig)
            tr2 = run_strategy(rules, "d0", t, args.fuel, sig=sig)
            res = developments.joinability(sig, t, tr1, tr2, args.fuel, args.depth)
            tree_s = (
                render_tree(res.tree, ascii_only=ascii_only) if res.tree is not None else None
            )
            text = res.status + (f": {tree_s}" if tree_s else "")
            doc = {
                "text": text,
                "json": {"status": res.status, "tree": tree_s, "detail": res.detail},
                "unknown": res.status == "unknown",
            }
            return _emit(doc, args, out)

        if args.command == "dev":
            t = load(args.term)
            if args.all:
                found = redexes(BetaStrict(sig), t)
                positions = [p for p, tag in found if tag == "beta"]
            else:
                positions = _parse_positions(args.redexes)
            rs = developments.RedexSet(t, positions)
            _, result = developments.develop(sig, rs, args.fuel)
            labs = developments.path_labels(sig, rs)
            agree = bisimilar(result, labs)
            text = (
                f"develop: {render_tree(result, ascii_only=ascii_only)}\n"
                f"path labels: {render_tree(labs, ascii_only=ascii_only)}\n"
                f"agree: {agree}"
            )
            doc = {
                "text": text,
                "json": {
                    "develop": render_tree(result, ascii_only=True),
                    "path_labels": render_tree(labs, ascii_only=True),
                    "agree": agree,
                },
                "unknown": False,
            }
            return _emit(doc, args, out)

        raise AssertionError(args.command)
    except ParseError as e:
        print(f"ilc: parse error: {e}", file=err)
        return EXIT_PARSE
    except ValueError as e:
        print(f"ilc: {e}", file=err)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
