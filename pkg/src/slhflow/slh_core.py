"""Noncommutative operator algebra over labeled tensor-product Hilbert spaces.

Operators are sums of monomials; each monomial carries a sympy scalar
coefficient and at most one reduced factor per space label.  Two kinds of
local space exist:

* two-level (qubits and relays): the canonical factor set is ``{I, Z, sp, sm}``
  with ``sp = |1><0|`` raising the level and ``Z|0> = +|0>``.  ``X``, ``Y``,
  ``Pi0`` and ``Pi1`` are accepted as input atoms and expanded into that set.
* boson: monomials are normal ordered, ``ad**m * a**n``.

Expressions built with :meth:`OperatorExpr.word` (or parsed with
``normalize=False``)
keep their literal word order so that :func:`normalize` has something to do;
the numeric route in :mod:`slhflow.master_eq` evaluates those words atom by
atom and never consults the rewrite tables.
"""
from __future__ import annotations

import random
import re
import zlib
from math import comb, factorial
from typing import Iterable, Iterator, Mapping

import sympy as sp

__all__ = [
    "OperatorExpr",
    "LocalOp",
    "OperatorError",
    "TWO_LEVEL_ATOMS",
    "BOSON_ATOMS",
    "normalize",
    "adjoint",
    "im_part",
    "equal_numeric",
    "parse_operator",
    "op",
    "identity",
    "scalar",
    "symbol",
    "label_key",
    "is_zero_scalar",
]

TWO_LEVEL_ATOMS = ("I", "X", "Y", "Z", "sp", "sm", "Pi0", "Pi1")
BOSON_ATOMS = ("a", "ad")

ONE = sp.Integer(1)
HALF = sp.Rational(1, 2)

# chop threshold for purely numeric coefficients (float round-off)
NUMERIC_ZERO = 1e-14


class OperatorError(ValueError):
    pass


def label_key(label: str):
    """Natural sort key so that Q2 < Q10."""
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", label))


def symbol(name: str, real: bool = True) -> sp.Symbol:
    return sp.Symbol(name, real=True) if real else sp.Symbol(name)


def scalar(value) -> sp.Expr:
    if isinstance(value, sp.Basic):
        return value
    if isinstance(value, str):
        return _sympify_scalar(value)
    if isinstance(value, complex):
        return scalar(value.real) + sp.I * scalar(value.imag)
    if isinstance(value, float) and value.is_integer():
        return sp.Integer(int(value))
    return sp.sympify(value)


def _has_nonpolynomial(c: sp.Expr) -> bool:
    if c.atoms(sp.Function):
        return True
    for p in c.atoms(sp.Pow):
        if not (p.exp.is_Integer and p.exp > 0):
            return True
    return False


def is_zero_scalar(c) -> bool:
    """Decide ``c == 0``; falls back to random numeric sampling when the
    expanded form still contains functions or denominators."""
    if c == 0:
        return True
    c = sp.expand(c)
    if c == 0:
        return True
    free = c.free_symbols
    if not free:
        try:
            return abs(complex(c)) < NUMERIC_ZERO
        except TypeError:
            return False
    if not _has_nonpolynomial(c):
        return False
    rng = random.Random(zlib.crc32(sp.srepr(c).encode()))
    syms = sorted(free, key=lambda s: s.name)
    for _ in range(4):
        vals = {}
        for s in syms:
            x = rng.uniform(-2.0, 2.0)
            if not s.is_real:
                x = complex(x, rng.uniform(-2.0, 2.0))
            vals[s] = x
        try:
            v = complex(c.xreplace(vals).evalf())
        except (TypeError, ZeroDivisionError):
            return False
        if not abs(v) < 1e-10:
            return False
    return True


def _clean(c: sp.Expr) -> sp.Expr:
    c = sp.expand(c)
    if not c.free_symbols and _has_nonpolynomial(c):
        if c.has(sp.Float):
            # inexact already; collapse to one complex number
            return sp.expand(sp.N(c))
        # constant radicals in denominators, e.g. from feedback with S_ij = 1/sqrt(2)
        c = sp.expand(sp.radsimp(c))
    return c


# ---------------------------------------------------------------------------
# local factor tables

# two-level canonical factors: None (identity), "Z", "+", "-"
_TL_EXPAND = {
    "I": ((ONE, None),),
    "X": ((ONE, "+"), (ONE, "-")),
    "Y": ((sp.I, "+"), (-sp.I, "-")),
    "Z": ((ONE, "Z"),),
    "sp": ((ONE, "+"),),
    "sm": ((ONE, "-"),),
    "Pi0": ((HALF, None), (HALF, "Z")),
    "Pi1": ((HALF, None), (-HALF, "Z")),
}

_TL_PRODUCT = {
    ("Z", "Z"): ((ONE, None),),
    ("Z", "+"): ((-ONE, "+"),),
    ("Z", "-"): ((ONE, "-"),),
    ("+", "Z"): ((ONE, "+"),),
    ("-", "Z"): ((-ONE, "-"),),
    ("+", "+"): (),
    ("-", "-"): (),
    ("+", "-"): ((HALF, None), (-HALF, "Z")),
    ("-", "+"): ((HALF, None), (HALF, "Z")),
}

_BOSON_FACTOR = {"a": (0, 1), "ad": (1, 0)}


def _local_product(f, g):
    fb, gb = isinstance(f, tuple), isinstance(g, tuple)
    if fb != gb:
        raise OperatorError("label used both as a two-level and a boson space")
    if not fb:
        return _TL_PRODUCT[(f, g)]
    (m, n), (p, q) = f, g
    out = []
    for k in range(min(n, p) + 1):
        c = comb(n, k) * comb(p, k) * factorial(k)
        fac = (m + p - k, n + q - k)
        out.append((sp.Integer(c), None if fac == (0, 0) else fac))
    return tuple(out)


def _mono_mul(m1: tuple, m2: tuple):
    if not m1:
        return [(ONE, m2)]
    if not m2:
        return [(ONE, m1)]
    d1, d2 = dict(m1), dict(m2)
    results = [(ONE, ())]
    for lab in sorted(d1.keys() | d2.keys(), key=label_key):
        f, g = d1.get(lab), d2.get(lab)
        if f is None:
            opts = ((ONE, g),)
        elif g is None:
            opts = ((ONE, f),)
        else:
            opts = _local_product(f, g)
        if not opts:
            return []
        results = [
            (c * c2, facs + ((lab, f2),) if f2 is not None else facs)
            for c, facs in results
            for c2, f2 in opts
        ]
    return results


def _atom_terms(label: str, atom: str):
    if atom in _TL_EXPAND:
        if atom == "I":
            return ((ONE, ()),)
        return tuple(
            (c, () if f is None else ((label, f),)) for c, f in _TL_EXPAND[atom]
        )
    if atom in _BOSON_FACTOR:
        return ((ONE, ((label, _BOSON_FACTOR[atom]),)),)
    raise OperatorError(f"unknown atom {atom!r}")


def _factor_word(label: str, f) -> tuple:
    if isinstance(f, tuple):
        m, n = f
        return ((label, "ad"),) * m + ((label, "a"),) * n
    return ((label, {"Z": "Z", "+": "sp", "-": "sm"}[f]),)


def _mono_word(mono: tuple) -> tuple:
    word = ()
    for lab, f in mono:
        word += _factor_word(lab, f)
    return word


def _mono_adjoint(mono: tuple) -> tuple:
    out = []
    for lab, f in mono:
        if isinstance(f, tuple):
            out.append((lab, (f[1], f[0])))
        else:
            out.append((lab, {"Z": "Z", "+": "-", "-": "+"}[f]))
    return tuple(out)


def _mono_sort_key(mono: tuple):
    return (
        len(mono),
        tuple(
            (label_key(lab), (1, f) if isinstance(f, tuple) else (0, "Z+-".index(f)))
            for lab, f in mono
        ),
    )


class LocalOp:
    """A single atom acting on one labeled space, e.g. ``LocalOp("Q1", "Z")``."""

    __slots__ = ("label", "atom")

    def __init__(self, label: str, atom: str):
        if atom not in TWO_LEVEL_ATOMS and atom not in BOSON_ATOMS:
            raise OperatorError(f"unknown atom {atom!r}")
        self.label = label
        self.atom = atom

    def __repr__(self):
        return f"LocalOp({self.label!r}, {self.atom!r})"

    def __eq__(self, other):
        return isinstance(other, LocalOp) and (self.label, self.atom) == (other.label, other.atom)

    def __hash__(self):
        return hash((self.label, self.atom))


class OperatorExpr:
    """Sum of scalar-weighted operator words.

    A normal expression stores ``{monomial: coefficient}``; a raw one stores
    ``((coefficient, word), ...)`` where a word is a tuple of
    ``(label, atom)`` pairs in multiplication order.
    """

    __slots__ = ("_data", "_raw")

    def __init__(self, data: Mapping | None = None, *, raw: Iterable | None = None):
        if raw is not None:
            self._data = None
            self._raw = tuple((scalar(c), tuple(w)) for c, w in raw)
        else:
            self._raw = None
            clean = {}
            for mono, c in (data or {}).items():
                c = _clean(c)
                if not is_zero_scalar(c):
                    clean[mono] = c
            self._data = clean

    # -- construction -----------------------------------------------------
    @classmethod
    def _from_pairs(cls, pairs):
        acc: dict = {}
        for c, mono in pairs:
            acc.setdefault(mono, []).append(c)
        return cls({m: sp.Add(*cs) for m, cs in acc.items()})

    @classmethod
    def from_scalar(cls, c) -> "OperatorExpr":
        return cls({(): scalar(c)})

    @classmethod
    def zero(cls) -> "OperatorExpr":
        return cls({})

    @classmethod
    def word(cls, *atoms: LocalOp | tuple, coeff=ONE) -> "OperatorExpr":
        """Unnormalized product of atoms, kept in the given order."""
        w = tuple((a.label, a.atom) if isinstance(a, LocalOp) else tuple(a) for a in atoms)
        return cls(raw=[(coeff, w)])

    # -- inspection -------------------------------------------------------
    @property
    def is_normal(self) -> bool:
        return self._data is not None

    def terms(self) -> dict:
        """Canonical ``{monomial: coefficient}`` mapping."""
        return dict(normalize(self)._data)

    def words(self) -> Iterator[tuple]:
        """Yield ``(coefficient, word)`` in literal multiplication order."""
        if self._raw is not None:
            yield from self._raw
        else:
            for mono in sorted(self._data, key=_mono_sort_key):
                yield self._data[mono], _mono_word(mono)

    @property
    def is_zero(self) -> bool:
        return not normalize(self)._data

    def is_scalar(self) -> bool:
        d = normalize(self)._data
        return not d or set(d) == {()}

    def scalar_part(self) -> sp.Expr:
        return normalize(self)._data.get((), sp.Integer(0))

    def labels(self) -> list[str]:
        labs = {lab for _, w in self.words() for lab, _ in w}
        return sorted(labs, key=label_key)

    def label_kinds(self) -> dict[str, str]:
        kinds: dict[str, str] = {}
        for _, w in self.words():
            for lab, atom in w:
                if atom == "I":
                    kinds.setdefault(lab, None)
                    continue
                k = "boson" if atom in BOSON_ATOMS else "two_level"
                if kinds.get(lab) not in (None, k):
                    raise OperatorError(f"label {lab} used with incompatible atoms")
                kinds[lab] = k
        return {lab: k or "two_level" for lab, k in kinds.items()}

    @property
    def free_symbols(self) -> set:
        out = set()
        for c, _ in self.words():
            out |= c.free_symbols
        return out

    # -- algebra ----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, OperatorExpr):
            return other
        return OperatorExpr.from_scalar(other)

    def __add__(self, other):
        other = self._coerce(other)
        if self.is_normal and other.is_normal:
            pairs = [(c, m) for m, c in self._data.items()]
            pairs += [(c, m) for m, c in other._data.items()]
            return OperatorExpr._from_pairs(pairs)
        return OperatorExpr(raw=list(self.words()) + list(other.words()))

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, OperatorExpr):
            c = scalar(other)
            if self.is_normal:
                return OperatorExpr({m: v * c for m, v in self._data.items()})
            return OperatorExpr(raw=[(v * c, w) for v, w in self._raw])
        if self.is_normal and other.is_normal:
            pairs = []
            for m1, c1 in self._data.items():
                for m2, c2 in other._data.items():
                    for c, m in _mono_mul(m1, m2):
                        pairs.append((c1 * c2 * c, m))
            return OperatorExpr._from_pairs(pairs)
        return OperatorExpr(
            raw=[(c1 * c2, w1 + w2) for c1, w1 in self.words() for c2, w2 in other.words()]
        )

    def __rmul__(self, other):
        # scalars commute with everything
        return self * other

    def __truediv__(self, other):
        return self * (ONE / scalar(other))

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise OperatorError("only nonnegative integer powers are supported")
        out = identity() if self.is_normal else OperatorExpr(raw=[(ONE, ())])
        for _ in range(n):
            out = out * self
        return out

    def dag(self) -> "OperatorExpr":
        return adjoint(self)

    def subs(self, mapping: Mapping) -> "OperatorExpr":
        """Substitute scalar symbols (keys may be names or sympy symbols)."""
        rep = {}
        for k, v in mapping.items():
            if isinstance(k, str):
                for s in self.free_symbols:
                    if s.name == k:
                        rep[s] = scalar(v)
            else:
                rep[k] = scalar(v)
        if self.is_normal:
            return OperatorExpr({m: c.xreplace(rep) for m, c in self._data.items()})
        return OperatorExpr(raw=[(c.xreplace(rep), w) for c, w in self._raw])

    def map_labels(self, mapping: Mapping[str, str]) -> "OperatorExpr":
        out = OperatorExpr(
            raw=[(c, tuple((mapping.get(l, l), a) for l, a in w)) for c, w in self.words()]
        )
        return normalize(out) if self.is_normal else out

    def normalize(self) -> "OperatorExpr":
        return normalize(self)

    # -- comparison / display ---------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, OperatorExpr):
            try:
                other = OperatorExpr.from_scalar(other)
            except (sp.SympifyError, TypeError):
                return NotImplemented
        a, b = normalize(self)._data, normalize(other)._data
        for m in a.keys() | b.keys():
            if not is_zero_scalar(a.get(m, 0) - b.get(m, 0)):
                return False
        return True

    def __hash__(self):
        return hash(str(normalize(self)))

    def __str__(self):
        return render(self)

    def __repr__(self):
        return f"OperatorExpr({render(self)!r})"


# ---------------------------------------------------------------------------
# public operations


def normalize(e: OperatorExpr) -> OperatorExpr:
    """Rewrite to the canonical sum of monomials."""
    if e.is_normal:
        return e
    pairs = []
    for c, word in e._raw:
        partial = [(c, ())]
        for lab, atom in word:
            nxt = []
            for pc, pm in partial:
                for ac, am in _atom_terms(lab, atom):
                    for mc, mm in _mono_mul(pm, am):
                        nxt.append((pc * ac * mc, mm))
            partial = nxt
            if not partial:
                break
        pairs.extend(partial)
    return OperatorExpr._from_pairs(pairs)


_normalize = normalize


def adjoint(e: OperatorExpr) -> OperatorExpr:
    if e.is_normal:
        return OperatorExpr({_mono_adjoint(m): sp.conjugate(c) for m, c in e._data.items()})
    flip = {"sp": "sm", "sm": "sp", "a": "ad", "ad": "a"}
    return OperatorExpr(
        raw=[
            (sp.conjugate(c), tuple((lab, flip.get(a, a)) for lab, a in reversed(w)))
            for c, w in e._raw
        ]
    )


def im_part(e: OperatorExpr) -> OperatorExpr:
    """(e - e^dagger) / 2i; Hermitian by construction."""
    e = normalize(e)
    return (e - adjoint(e)) * (-sp.I / 2)


def identity() -> OperatorExpr:
    return OperatorExpr({(): ONE})


def op(atom: str, label: str) -> OperatorExpr:
    """Normalized single atom, e.g. ``op("Z", "Q1")``."""
    return normalize(OperatorExpr.word(LocalOp(label, atom)))


# ---------------------------------------------------------------------------
# text rendering and parsing

_ATOM_RE = re.compile(r"\b([A-Za-z][A-Za-z0-9]*)\[([A-Za-z_][A-Za-z0-9_]*)\]")
_IDENT_RE = re.compile(r"\b[A-Za-z_][A-Za-z0-9_]*\b")
_SYMPY_NAMES = {
    "sin", "cos", "tan", "exp", "sqrt", "log", "I", "pi", "conjugate",
    "re", "im", "Abs", "E", "Rational", "Integer", "Float",
}


def _coeff_str(c: sp.Expr) -> str:
    s = sp.sstr(c)
    if isinstance(c, sp.Add):
        return f"({s})"
    return s


def _word_str(word: tuple) -> str:
    parts: list[str] = []
    i = 0
    while i < len(word):
        j = i
        while j + 1 < len(word) and word[j + 1] == word[i]:
            j += 1
        lab, atom = word[i]
        n = j - i + 1
        parts.append(f"{atom}[{lab}]" + (f"**{n}" if n > 1 else ""))
        i = j + 1
    return "*".join(parts)


def render(e: OperatorExpr) -> str:
    """Canonical text, e.g. ``alpha*theta*Z[Q2]*Z[Q5]``."""
    pieces = []
    for c, word in e.words():
        ws = _word_str(word)
        if not ws:
            t = _coeff_str(c)
        elif c == 1:
            t = ws
        elif c == -1:
            t = "-" + ws
        else:
            t = f"{_coeff_str(c)}*{ws}"
        pieces.append(t)
    if not pieces:
        return "0"
    out = pieces[0]
    for t in pieces[1:]:
        out += f" - {t[1:]}" if t.startswith("-") else f" + {t}"
    return out


def _symbol_table(text: str, complex_symbols: Iterable[str] = ()) -> dict:
    cplx = set(complex_symbols)
    table = {}
    for name in _IDENT_RE.findall(text):
        if name in _SYMPY_NAMES or name in table or name.startswith("__op"):
            continue
        table[name] = sp.Symbol(name) if name in cplx else sp.Symbol(name, real=True)
    return table


def _sympify_scalar(text: str, complex_symbols: Iterable[str] = ()) -> sp.Expr:
    return sp.parse_expr(text, local_dict=_symbol_table(text, complex_symbols))


def parse_operator(
    text: str, complex_symbols: Iterable[str] = (), normalize: bool = True
) -> OperatorExpr:
    """Parse the text rendering back into an :class:`OperatorExpr`.

    Scalar identifiers are real symbols unless listed in ``complex_symbols``.
    """
    atoms: dict[str, tuple[str, str]] = {}

    def repl(m):
        atom, lab = m.group(1), m.group(2)
        if atom not in TWO_LEVEL_ATOMS and atom not in BOSON_ATOMS:
            raise OperatorError(f"unknown atom {atom!r} in {text!r}")
        key = f"__op{len(atoms)}"
        atoms[key] = (lab, atom)
        return key

    body = _ATOM_RE.sub(repl, text)
    local = _symbol_table(body, complex_symbols)
    for key in atoms:
        local[key] = sp.Symbol(key, commutative=False)
    try:
        expr = sp.parse_expr(body, local_dict=local)
    except (SyntaxError, TypeError, sp.SympifyError) as exc:
        raise OperatorError(f"cannot parse operator {text!r}: {exc}") from exc
    expr = sp.expand(expr)
    raw = []
    for term in sp.Add.make_args(expr):
        cfac, ncfac = term.args_cnc()
        word: tuple = ()
        for f in ncfac:
            base, n = (f.base, int(f.exp)) if isinstance(f, sp.Pow) else (f, 1)
            if base.name not in atoms or n < 0:
                raise OperatorError(f"cannot interpret factor {f} in {text!r}")
            word += (atoms[base.name],) * n
        raw.append((sp.Mul(*cfac), word))
    out = OperatorExpr(raw=raw)
    return _normalize(out) if normalize else out


# ---------------------------------------------------------------------------
# randomized semantic equality


def equal_numeric(
    x: OperatorExpr,
    y: OperatorExpr,
    bindings: Mapping | None = None,
    samples: int = 20,
    dims: Mapping[str, int] | None = None,
    tol: float = 1e-9,
    seed: int = 0,
) -> bool:
    """Compare matrix representations at random parameter samples.

    ``bindings`` fixes symbol values (by name); unbound symbols are sampled.
    Boson labels need a truncation in ``dims``; matrices are built with extra
    headroom and compared on the truncated block only, so truncation edge
    effects do not leak into the comparison.
    """
    from .master_eq import SpaceLayout, to_matrix

    return _equal_numeric_many([(x, y)], bindings, samples, dims, tol, seed, SpaceLayout, to_matrix)


def _sample_bindings(symbols, bindings, rng):
    vals = {}
    bound = dict(bindings or {})
    for s in sorted(symbols, key=lambda s: s.name):
        if s.name in bound:
            vals[s.name] = bound[s.name]
        elif s.is_real:
            vals[s.name] = rng.uniform(-1.5, 1.5)
        else:
            vals[s.name] = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
    return vals


def _equal_numeric_many(pairs, bindings, samples, dims, tol, seed, SpaceLayout, to_matrix):
    import numpy as np

    kinds: dict[str, str] = {}
    symbols = set()
    depth = 0
    for x, y in pairs:
        for e in (x, y):
            kinds.update(e.label_kinds())
            symbols |= e.free_symbols
            for _, w in e.words():
                depth = max(depth, sum(1 for _, a in w if a in BOSON_ATOMS))
    dims = dict(dims or {})
    spaces = []
    for lab in sorted(kinds, key=label_key):
        if kinds[lab] == "boson":
            if lab not in dims:
                raise OperatorError(f"boson label {lab} needs a truncation dimension")
            spaces.append((lab, "boson", dims[lab] + depth))
        else:
            spaces.append((lab, "qubit", 2))
    layout = SpaceLayout.of(spaces)
    keep = None
    if any(k == "boson" for _, k, _ in spaces):
        grids = np.meshgrid(
            *[np.arange(d) < (dims[lab] if k == "boson" else d) for lab, k, d in spaces],
            indexing="ij",
        )
        keep = np.logical_and.reduce([g.ravel() for g in grids]) if grids else None
    rng = random.Random(seed)
    for _ in range(samples):
        vals = _sample_bindings(symbols, bindings, rng)
        for x, y in pairs:
            mx, my = to_matrix(x, layout, vals), to_matrix(y, layout, vals)
            if keep is not None:
                mx, my = mx[np.ix_(keep, keep)], my[np.ix_(keep, keep)]
            if not np.allclose(mx, my, atol=tol, rtol=0):
                return False
    return True
