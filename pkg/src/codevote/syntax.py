"""Subject-language frontend: parse checking, tokens, AST bags, data-flow graphs.

The subject language is the language candidate programs are written in, not
the language of this package. Only Python is bundled; the registry keeps the
interfaces language-parameterized so another grammar can be added later.
"""

from __future__ import annotations

import ast
import io
import keyword
import tokenize as _tok
from collections import Counter
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, NamedTuple

from .model import Candidate, ParseStatus

SUBJECT_LANGUAGES = ("python",)

# Token classes used by the lexical metrics.
KEYWORD = "keyword"
IDENTIFIER = "identifier"
LITERAL = "literal"
OPERATOR = "operator"
PUNCTUATION = "punctuation"

_PUNCT_LEXEMES = {"(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "->", "..."}

DATAFLOW_RELATION = "comesFrom"


class NoViableCandidates(Exception):
    """Every candidate in the pool failed the syntax filter."""


class SubjectParseError(ValueError):
    """Input text does not parse in the subject language."""


def _require_language(subject_language: str) -> None:
    if subject_language not in SUBJECT_LANGUAGES:
        raise ValueError(f"unsupported subject language {subject_language!r}")


class Token(NamedTuple):
    lexeme: str
    klass: str


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def lexemes(self) -> tuple[str, ...]:
        return tuple(t.lexeme for t in self.tokens)


@dataclass(frozen=True)
class SubtreeBag:
    """Multiset of canonical, spelling-free subtree strings."""

    entries: tuple[tuple[str, int], ...]
    total: int

    @classmethod
    def from_counter(cls, counts: Counter) -> "SubtreeBag":
        return cls(entries=tuple(sorted(counts.items())), total=sum(counts.values()))

    def counts(self) -> Counter:
        return Counter(dict(self.entries))


@dataclass(frozen=True)
class DataFlowGraph:
    """Multiset of def→use edges over names normalized as var_0, var_1, ..."""

    edges: tuple[tuple[str, str, str], ...]  # (def_var, use_var, relation) with counts folded out
    var_count: int

    @classmethod
    def from_counter(cls, counts: Counter, var_count: int) -> "DataFlowGraph":
        flat: list[tuple[str, str, str]] = []
        for (d, u), n in sorted(counts.items()):
            flat.extend([(d, u, DATAFLOW_RELATION)] * n)
        return cls(edges=tuple(flat), var_count=var_count)

    def counts(self) -> Counter:
        return Counter((d, u) for d, u, _ in self.edges)

    def edge_count(self) -> int:
        return len(self.edges)


@lru_cache(maxsize=4096)
def parse_module(text: str) -> ast.Module:
    """Parse subject source with the bundled grammar; raises on syntax errors."""
    try:
        return ast.parse(text)
    except (SyntaxError, ValueError) as exc:
        raise SubjectParseError(str(exc)) from exc


def parse_check(candidate: Candidate, subject_language: str = "python") -> Candidate:
    """Return the candidate with ``parse_ok`` settled; parses are cached."""
    _require_language(subject_language)
    try:
        parse_module(candidate.text)
    except SubjectParseError:
        return replace(candidate, parse_ok=ParseStatus.FAILED)
    return replace(candidate, parse_ok=ParseStatus.OK)


def filter_candidates(candidates: Iterable[Candidate]) -> list[Candidate]:
    """Keep the parse_ok subset in order; empty survivor sets are an error."""
    survivors = [c for c in candidates if c.parse_ok is ParseStatus.OK]
    if not survivors:
        raise NoViableCandidates("no candidate survived the syntax filter")
    return survivors


_SKIP_TOKEN_TYPES = {
    _tok.COMMENT,
    _tok.NL,
    _tok.NEWLINE,
    _tok.INDENT,
    _tok.DEDENT,
    _tok.ENCODING,
    _tok.ENDMARKER,
}


def _classify(tok_type: int, lexeme: str) -> str:
    if tok_type == _tok.NAME:
        return KEYWORD if keyword.iskeyword(lexeme) else IDENTIFIER
    if tok_type in (_tok.NUMBER, _tok.STRING):
        return LITERAL
    return PUNCTUATION if lexeme in _PUNCT_LEXEMES else OPERATOR


@lru_cache(maxsize=4096)
def tokenize(text: str) -> TokenStream:
    """Lex subject source into classed tokens, dropping comments and layout."""
    out: list[Token] = []
    try:
        for tok in _tok.generate_tokens(io.StringIO(text).readline):
            if tok.type in _SKIP_TOKEN_TYPES or not tok.string.strip():
                continue
            out.append(Token(tok.string, _classify(tok.type, tok.string)))
    except (_tok.TokenError, IndentationError, SyntaxError) as exc:
        raise SubjectParseError(str(exc)) from exc
    return TokenStream(tokens=tuple(out))


def _canonical(node: ast.AST, height: int) -> str:
    kind = type(node).__name__
    children = list(ast.iter_child_nodes(node))
    if height <= 0 or not children:
        return kind
    return kind + "(" + ",".join(_canonical(c, height - 1) for c in children) + ")"


@lru_cache(maxsize=4096)
def ast_subtrees(text: str, max_depth: int = 3) -> SubtreeBag:
    """Collect canonical subtree strings of height 1..max_depth per internal node.

    Identifier and literal spellings never appear in the canonical strings, so
    the bag is invariant under consistent renaming and reformatting.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    tree = parse_module(text)
    counts: Counter = Counter()
    for node in ast.walk(tree):
        if not list(ast.iter_child_nodes(node)):
            continue
        for h in range(1, max_depth + 1):
            counts[_canonical(node, h)] += 1
    return SubtreeBag.from_counter(counts)


# ---------------------------------------------------------------------------
# Data-flow extraction
#
# Definitions are parameters, assignment/loop/with/walrus targets, and import
# aliases. Reaching definitions are approximated flow-insensitively within a
# body: every textual definition of a name reaches every use of it in the
# same body. A use that feeds an assignment is recorded against the assigned
# name; any other use is recorded against its own name.
# ---------------------------------------------------------------------------


class _Body:
    def __init__(self) -> None:
        self.defs: Counter = Counter()  # name -> number of textual definitions
        self.events: list[tuple[tuple[int, int], str]] = []  # (pos, name) defs + uses
        self.uses: list[tuple[tuple[int, int], str, tuple[str, ...]]] = []  # pos, name, receivers


def _target_names(node: ast.AST) -> list[ast.Name]:
    """Plain names bound by an assignment target (nested tuples flattened)."""
    if isinstance(node, ast.Name):
        return [node]
    if isinstance(node, (ast.Tuple, ast.List)):
        out: list[ast.Name] = []
        for elt in node.elts:
            out.extend(_target_names(elt))
        return out
    if isinstance(node, ast.Starred):
        return _target_names(node.value)
    return []  # attribute/subscript targets bind no local name


def _pos(node: ast.AST) -> tuple[int, int]:
    return (getattr(node, "lineno", 0), getattr(node, "col_offset", 0))


class _BodyWalker:
    """Collects defs and receiver-tagged uses for one function or module body."""

    def __init__(self) -> None:
        self.body = _Body()

    def _define(self, name: str, pos: tuple[int, int]) -> None:
        self.body.defs[name] += 1
        self.body.events.append((pos, name))

    def _define_targets(self, target: ast.AST) -> list[str]:
        names = []
        for n in _target_names(target):
            self._define(n.id, _pos(n))
            names.append(n.id)
        return names

    def _expr(self, node: ast.AST | None, receivers: tuple[str, ...]) -> None:
        if node is None:
            return
        if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Load):
            recv = receivers if receivers else (node.id,)
            self.body.uses.append((_pos(node), node.id, recv))
            return
        if isinstance(node, ast.NamedExpr):
            names = self._define_targets(node.target)
            self._expr(node.value, tuple(names))
            return
        if isinstance(node, (ast.ListComp, ast.SetComp, ast.GeneratorExp, ast.DictComp)):
            for comp in node.generators:
                names = self._define_targets(comp.target)
                self._expr(comp.iter, tuple(names))
                for cond in comp.ifs:
                    self._expr(cond, receivers)
            if isinstance(node, ast.DictComp):
                self._expr(node.key, receivers)
                self._expr(node.value, receivers)
            else:
                self._expr(node.elt, receivers)
            return
        if isinstance(node, ast.Lambda):
            return  # separate body, walked on its own
        for child in ast.iter_child_nodes(node):
            self._expr(child, receivers)

    def statement(self, stmt: ast.stmt) -> None:
        if isinstance(stmt, ast.Assign):
            names: list[str] = []
            for target in stmt.targets:
                names.extend(self._define_targets(target))
            single = stmt.targets[0] if len(stmt.targets) == 1 else None
            if (
                isinstance(single, (ast.Tuple, ast.List))
                and isinstance(stmt.value, (ast.Tuple, ast.List))
                and len(single.elts) == len(stmt.value.elts)
            ):
                # element-wise value flow for positional unpacking
                for tgt, val in zip(single.elts, stmt.value.elts):
                    recv = tuple(n.id for n in _target_names(tgt))
                    self._expr(val, recv)
            else:
                self._expr(stmt.value, tuple(names))
        elif isinstance(stmt, ast.AnnAssign):
            names = self._define_targets(stmt.target) if stmt.value is not None else []
            if stmt.value is not None:
                self._expr(stmt.value, tuple(names))
        elif isinstance(stmt, ast.AugAssign):
            names = self._define_targets(stmt.target)
            if isinstance(stmt.target, ast.Name):
                # augmented target is read as well as written
                self.body.uses.append((_pos(stmt.target), stmt.target.id, tuple(names)))
            self._expr(stmt.value, tuple(names))
        elif isinstance(stmt, (ast.For, ast.AsyncFor)):
            names = self._define_targets(stmt.target)
            self._expr(stmt.iter, tuple(names))
            for sub in stmt.body + stmt.orelse:
                self.statement(sub)
        elif isinstance(stmt, (ast.While, ast.If)):
            self._expr(stmt.test, ())
            for sub in stmt.body + stmt.orelse:
                self.statement(sub)
        elif isinstance(stmt, (ast.With, ast.AsyncWith)):
            for item in stmt.items:
                names = self._define_targets(item.optional_vars) if item.optional_vars else []
                self._expr(item.context_expr, tuple(names))
            for sub in stmt.body:
                self.statement(sub)
        elif isinstance(stmt, ast.Try):
            for sub in stmt.body + stmt.orelse + stmt.finalbody:
                self.statement(sub)
            for handler in stmt.handlers:
                self._expr(handler.type, ())
                if handler.name:
                    self._define(handler.name, _pos(handler))
                for sub in handler.body:
                    self.statement(sub)
        elif isinstance(stmt, (ast.Import, ast.ImportFrom)):
            for alias in stmt.names:
                bound = alias.asname or alias.name.split(".")[0]
                if bound != "*":
                    self._define(bound, _pos(stmt))
        elif isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            for dec in stmt.decorator_list:
                self._expr(dec, ())
            # nested definitions are separate bodies; the bound name is not a variable
        elif isinstance(stmt, (ast.Return, ast.Expr, ast.Raise, ast.Assert, ast.Delete)):
            for child in ast.iter_child_nodes(stmt):
                self._expr(child, ())
        elif isinstance(stmt, (ast.Global, ast.Nonlocal, ast.Pass, ast.Break, ast.Continue)):
            pass
        else:
            for child in ast.iter_child_nodes(stmt):
                self._expr(child, ())


def _all_params(args: ast.arguments) -> list[ast.arg]:
    params = list(args.posonlyargs) + list(args.args) + list(args.kwonlyargs)
    if args.vararg:
        params.append(args.vararg)
    if args.kwarg:
        params.append(args.kwarg)
    return params


@lru_cache(maxsize=4096)
def dataflow_graph(text: str) -> DataFlowGraph:
    """Extract the def→use edge multiset with names normalized by first occurrence."""
    tree = parse_module(text)
    bodies = _top_level_bodies(tree)

    numbering: dict[str, str] = {}
    events: list[tuple[tuple[int, int], str]] = []
    for body in bodies:
        events.extend(body.events)
        for pos, name, _ in body.uses:
            if body.defs.get(name):
                events.append((pos, name))
    for _, name in sorted(events):
        if name not in numbering:
            numbering[name] = f"var_{len(numbering)}"

    edges: Counter = Counter()
    for body in bodies:
        for _, name, receivers in body.uses:
            reach = body.defs.get(name, 0)
            if not reach:
                continue
            for recv in receivers:
                recv_norm = numbering.get(recv)
                if recv_norm is None:
                    recv_norm = numbering[name]  # receiver never defined: anchor on the use
                edges[(numbering[name], recv_norm)] += reach
    return DataFlowGraph.from_counter(edges, var_count=len(numbering))


def _top_level_bodies(tree: ast.Module) -> list[_Body]:
    """One body per function/lambda plus the module body, each walked shallowly."""
    bodies: list[_Body] = []

    def shallow(stmts: list[ast.stmt], params: list[ast.arg]) -> _Body:
        walker = _BodyWalker()
        for param in params:
            walker._define(param.arg, _pos(param))
        for stmt in stmts:
            walker.statement(stmt)
        return walker.body

    def descend(stmts: list[ast.stmt]) -> None:
        for stmt in stmts:
            if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
                bodies.append(shallow(stmt.body, _all_params(stmt.args)))
                descend(stmt.body)
            elif isinstance(stmt, ast.ClassDef):
                bodies.append(shallow(stmt.body, []))
                descend(stmt.body)
            elif isinstance(stmt, (ast.If, ast.While, ast.For, ast.AsyncFor)):
                descend(stmt.body + stmt.orelse)
            elif isinstance(stmt, (ast.With, ast.AsyncWith)):
                descend(stmt.body)
            elif isinstance(stmt, ast.Try):
                descend(stmt.body + stmt.orelse + stmt.finalbody)
                for handler in stmt.handlers:
                    descend(handler.body)

    bodies.append(shallow(tree.body, []))
    descend(tree.body)

    for node in ast.walk(tree):
        if isinstance(node, ast.Lambda):
            walker = _BodyWalker()
            for param in _all_params(node.args):
                walker._define(param.arg, _pos(param))
            walker._expr(node.body, ())
            bodies.append(walker.body)
    return bodies
