"""Gough-James circuit terms: construction, arity calculus, printing, parsing.

Text format (Unicode / ASCII alias)::

    B ◁ A        B <| A        all outputs of A feed the inputs of B
    B ⊞ A        B [+] A       side by side, no connections
    [M]_{i→j}    fb{i,j}(M)    output i of M fed back into input j
    I_n                         n pass-through lines
    P_{(2,1,3)}                 input k is routed to output sigma(k)

◁ binds tighter than ⊞; both print right-nested chains without parentheses.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

__all__ = [
    "ArityError",
    "TermSyntaxError",
    "Arity",
    "CircuitTerm",
    "ComponentRef",
    "Series",
    "Concat",
    "Feedback",
    "Perm",
    "Identity",
    "arity",
    "pretty_print",
    "parse_term",
    "series_chain",
    "concat_chain",
    "components",
]


class ArityError(ValueError):
    pass


class TermSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int | None = None):
        super().__init__(msg if pos is None else f"{msg} (at offset {pos})")
        self.pos = pos


@dataclass(frozen=True)
class Arity:
    n_in: int
    n_out: int

    def __add__(self, other: "Arity") -> "Arity":
        return Arity(self.n_in + other.n_in, self.n_out + other.n_out)

    def __sub__(self, other: "Arity") -> "Arity":
        return Arity(self.n_in - other.n_in, self.n_out - other.n_out)


class CircuitTerm:
    n_in: int
    n_out: int

    def __str__(self):
        return pretty_print(self)


@dataclass(frozen=True)
class ComponentRef(CircuitTerm):
    instance: str
    n_in: int
    n_out: int

    def __post_init__(self):
        if self.n_in < 0 or self.n_out < 0:
            raise ArityError("negative arity")


@dataclass(frozen=True)
class Identity(CircuitTerm):
    n: int
    n_in: int = field(init=False, repr=False, compare=False)
    n_out: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 0:
            raise ArityError("identity size must be nonnegative")
        object.__setattr__(self, "n_in", self.n)
        object.__setattr__(self, "n_out", self.n)


@dataclass(frozen=True)
class Perm(CircuitTerm):
    sigma: tuple[int, ...]
    n_in: int = field(init=False, repr=False, compare=False)
    n_out: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        if sorted(sigma) != list(range(1, len(sigma) + 1)):
            raise ArityError(f"{sigma} is not a permutation of 1..{len(sigma)}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "n_in", len(sigma))
        object.__setattr__(self, "n_out", len(sigma))

    @property
    def is_identity(self) -> bool:
        return all(s == k + 1 for k, s in enumerate(self.sigma))


@dataclass(frozen=True)
class Series(CircuitTerm):
    """``left ◁ right``: outputs of ``right`` feed inputs of ``left``."""

    left: CircuitTerm
    right: CircuitTerm
    n_in: int = field(init=False, repr=False, compare=False)
    n_out: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.right.n_out != self.left.n_in:
            raise ArityError(
                f"series arity mismatch: {self.right.n_out} outputs into {self.left.n_in} inputs"
            )
        object.__setattr__(self, "n_in", self.right.n_in)
        object.__setattr__(self, "n_out", self.left.n_out)


@dataclass(frozen=True)
class Concat(CircuitTerm):
    left: CircuitTerm
    right: CircuitTerm
    n_in: int = field(init=False, repr=False, compare=False)
    n_out: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "n_in", self.left.n_in + self.right.n_in)
        object.__setattr__(self, "n_out", self.left.n_out + self.right.n_out)


@dataclass(frozen=True)
class Feedback(CircuitTerm):
    """``[inner]_{out_index → in_index}`` with 1-based port indices."""

    inner: CircuitTerm
    out_index: int
    in_index: int
    n_in: int = field(init=False, repr=False, compare=False)
    n_out: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.out_index <= self.inner.n_out:
            raise ArityError(f"feedback output index {self.out_index} out of range 1..{self.inner.n_out}")
        if not 1 <= self.in_index <= self.inner.n_in:
            raise ArityError(f"feedback input index {self.in_index} out of range 1..{self.inner.n_in}")
        object.__setattr__(self, "n_in", self.inner.n_in - 1)
        object.__setattr__(self, "n_out", self.inner.n_out - 1)


def arity(t: CircuitTerm) -> Arity:
    return Arity(t.n_in, t.n_out)


def series_chain(*terms: CircuitTerm) -> CircuitTerm:
    """``series_chain(C, B, A)`` is ``C ◁ B ◁ A`` (right nested)."""
    out = terms[-1]
    for t in reversed(terms[:-1]):
        out = Series(t, out)
    return out


def concat_chain(*terms: CircuitTerm) -> CircuitTerm:
    if not terms:
        return Identity(0)
    out = terms[-1]
    for t in reversed(terms[:-1]):
        out = Concat(t, out)
    return out


def components(t: CircuitTerm) -> list[ComponentRef]:
    """Component references in left-to-right textual order."""
    if isinstance(t, ComponentRef):
        return [t]
    if isinstance(t, (Series, Concat)):
        return components(t.left) + components(t.right)
    if isinstance(t, Feedback):
        return components(t.inner)
    return []


# ---------------------------------------------------------------------------
# printing

_SYMS = {
    False: {"series": " ◁ ", "concat": " ⊞ "},
    True: {"series": " <| ", "concat": " [+] "},
}


def pretty_print(t: CircuitTerm, ascii: bool = False) -> str:
    s = _SYMS[ascii]
    if isinstance(t, ComponentRef):
        return t.instance
    if isinstance(t, Identity):
        return f"I_{t.n}"
    if isinstance(t, Perm):
        return "P_{(" + ",".join(map(str, t.sigma)) + ")}"
    if isinstance(t, Feedback):
        inner = pretty_print(t.inner, ascii)
        if ascii:
            return f"fb{{{t.out_index},{t.in_index}}}({inner})"
        return f"[{inner}]_{{{t.out_index}→{t.in_index}}}"
    if isinstance(t, Series):
        left = pretty_print(t.left, ascii)
        if isinstance(t.left, (Series, Concat)):
            left = f"({left})"
        right = pretty_print(t.right, ascii)
        if isinstance(t.right, Concat):
            right = f"({right})"
        return left + s["series"] + right
    if isinstance(t, Concat):
        left = pretty_print(t.left, ascii)
        if isinstance(t.left, Concat):
            left = f"({left})"
        return left + s["concat"] + pretty_print(t.right, ascii)
    raise TypeError(f"not a circuit term: {t!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<series>◁|<\|)
  | (?P<concat>⊞|\[\+\])
  | (?P<fbsub>\]_\{\s*(?P<fbi>\d+)\s*(?:→|->)\s*(?P<fbj>\d+)\s*\})
  | (?P<fbascii>fb\{\s*(?P<fai>\d+)\s*,\s*(?P<faj>\d+)\s*\}\s*\()
  | (?P<ident_n>I_(?P<idn>\d+)\b)
  | (?P<perm>P_\{\(\s*(?P<sigma>[\d\s,]*)\)\})
  | (?P<lbrack>\[)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise TermSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind in ("fbi", "fbj", "fai", "faj", "idn", "sigma"):
            kind = next(k for k in ("fbsub", "fbascii", "ident_n", "perm") if m.group(k))
        if kind != "ws":
            out.append((kind, m, pos))
        pos = m.end()
    out.append(("eof", None, pos))
    return out


class _Parser:
    def __init__(self, text: str, arities: Mapping[str, tuple[int, int]]):
        self.toks = _tokenize(text)
        self.i = 0
        self.arities = arities

    def peek(self):
        return self.toks[self.i][0]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise TermSyntaxError(f"expected {kind}, found {tok[0]}", tok[2])
        self.i += 1
        return tok

    def concat(self):
        parts = [self.series()]
        while self.peek() == "concat":
            self.take()
            parts.append(self.series())
        return concat_chain(*parts)

    def series(self):
        parts = [self.atom()]
        while self.peek() == "series":
            self.take()
            parts.append(self.atom())
        return series_chain(*parts)

    def atom(self):
        kind, m, pos = self.take()
        if kind == "lpar":
            t = self.concat()
            self.take("rpar")
            return t
        if kind == "lbrack":
            t = self.concat()
            _, m2, _ = self.take("fbsub")
            return Feedback(t, int(m2.group("fbi")), int(m2.group("fbj")))
        if kind == "fbascii":
            t = self.concat()
            self.take("rpar")
            return Feedback(t, int(m.group("fai")), int(m.group("faj")))
        if kind == "ident_n":
            return Identity(int(m.group("idn")))
        if kind == "perm":
            body = m.group("sigma").strip()
            sigma = tuple(int(x) for x in body.split(",")) if body else ()
            return Perm(sigma)
        if kind == "name":
            name = m.group(0)
            if name not in self.arities:
                raise TermSyntaxError(f"unknown component {name!r}", pos)
            n_in, n_out = self.arities[name]
            return ComponentRef(name, n_in, n_out)
        raise TermSyntaxError(f"unexpected token {kind}", pos)


def parse_term(text: str, arities: Mapping[str, tuple[int, int]]) -> CircuitTerm:
    """Parse either text form; ``arities`` maps component names to (n_in, n_out)."""
    p = _Parser(text, arities)
    t = p.concat()
    if p.peek() != "eof":
        raise TermSyntaxError("trailing input", p.toks[p.i][2])
    return t
