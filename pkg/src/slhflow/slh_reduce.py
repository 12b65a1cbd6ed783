"""SLH triples and the rewrite rules that collapse a circuit term into one.

An :class:`SLHTriple` may carry *ancilla* ports after its main ports: the
implicit vacuum input and dangling reflection output of a loss tap.  They
are invisible to the circuit-term arity calculus and pass straight through
every composition, accumulating at the end of the port list in left-to-right
term order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .circuit_algebra import (
    CircuitTerm,
    ComponentRef,
    Concat,
    Feedback,
    Identity,
    Perm,
    Series,
)
from .slh_core import (
    OperatorExpr,
    OperatorError,
    _equal_numeric_many,
    adjoint,
    identity,
    im_part,
    is_zero_scalar,
    label_key,
    parse_operator,
)

__all__ = [
    "SLHError",
    "SLHTriple",
    "identity_slh",
    "perm_slh",
    "series",
    "concat",
    "feedback",
    "permute_out",
    "permute_in",
    "reorder_ports",
    "reduce",
    "slh_equal_numeric",
    "numeric_scattering",
    "slh_to_dict",
    "slh_from_dict",
    "simplify_slh",
]


class SLHError(ValueError):
    pass


def _as_op(x) -> OperatorExpr:
    if isinstance(x, OperatorExpr):
        return x.normalize()
    if isinstance(x, str):
        return parse_operator(x)
    return OperatorExpr.from_scalar(x)


ZERO = OperatorExpr.zero()


@dataclass(frozen=True, eq=False)
class SLHTriple:
    S: tuple[tuple[OperatorExpr, ...], ...]
    L: tuple[OperatorExpr, ...]
    H: OperatorExpr
    anc: tuple[tuple[str, int, int], ...] = ()  # (instance, input port, output port)

    def __post_init__(self):
        S = tuple(tuple(_as_op(x) for x in row) for row in self.S)
        L = tuple(_as_op(x) for x in self.L)
        if len(S) != len(L):
            raise SLHError(f"S has {len(S)} rows but L has {len(L)} entries")
        widths = {len(r) for r in S}
        if len(widths) > 1:
            raise SLHError("ragged scattering matrix")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "H", _as_op(self.H))
        object.__setattr__(self, "anc", tuple(tuple(a) for a in self.anc))
        if len(self.anc) > min(self.cdim_in, self.cdim_out):
            raise SLHError("more ancilla ports than ports")

    @property
    def cdim_in(self) -> int:
        return len(self.S[0]) if self.S else 0

    @property
    def cdim_out(self) -> int:
        return len(self.S)

    @property
    def n_anc(self) -> int:
        return len(self.anc)

    @property
    def n_in(self) -> int:
        return self.cdim_in - self.n_anc

    @property
    def n_out(self) -> int:
        return self.cdim_out - self.n_anc

    def subs(self, mapping) -> "SLHTriple":
        return SLHTriple(
            tuple(tuple(x.subs(mapping) for x in row) for row in self.S),
            tuple(x.subs(mapping) for x in self.L),
            self.H.subs(mapping),
            self.anc,
        )

    def map_labels(self, mapping: Mapping[str, str]) -> "SLHTriple":
        return SLHTriple(
            tuple(tuple(x.map_labels(mapping) for x in row) for row in self.S),
            tuple(x.map_labels(mapping) for x in self.L),
            self.H.map_labels(mapping),
            self.anc,
        )

    def ancilla_ports(self) -> tuple[list[str], list[str]]:
        return (
            [f"{n}.input{i}" for n, i, _ in self.anc],
            [f"{n}.output{o}" for n, _, o in self.anc],
        )

    def __str__(self):
        rows = "; ".join("[" + ", ".join(map(str, r)) + "]" for r in self.S)
        return f"S = [{rows}]\nL = [{', '.join(map(str, self.L))}]\nH = {self.H}"


# ---------------------------------------------------------------------------
# full-port primitives (ancillas treated like any other port)


def _matmul(A, B):
    n, k = len(A), len(B)
    m = len(B[0]) if B else 0
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = ZERO
            for r in range(k):
                a, b = A[i][r], B[r][j]
                if a.is_zero or b.is_zero:
                    continue
                acc = acc + a * b
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def _matvec(A, v):
    return tuple(c[0] for c in _matmul(A, tuple((x,) for x in v)))


def _eye(n):
    one = identity()
    return tuple(tuple(one if i == j else ZERO for j in range(n)) for i in range(n))


def _full_series(B: SLHTriple, A: SLHTriple, anc) -> SLHTriple:
    S = _matmul(B.S, A.S)
    SLa = _matvec(B.S, A.L)
    L = tuple(lb + x for lb, x in zip(B.L, SLa))
    cross = ZERO
    for lb, x in zip(B.L, SLa):
        if not (lb.is_zero or x.is_zero):
            cross = cross + adjoint(lb) * x
    return SLHTriple(S, L, B.H + A.H + im_part(cross), anc)


def _full_concat(B: SLHTriple, A: SLHTriple, anc) -> SLHTriple:
    rows = [tuple(r) + (ZERO,) * A.cdim_in for r in B.S]
    rows += [(ZERO,) * B.cdim_in + tuple(r) for r in A.S]
    return SLHTriple(tuple(rows), B.L + A.L, B.H + A.H, anc)


def _reorder(slh: SLHTriple, rows: Sequence[int], cols: Sequence[int], anc=None) -> SLHTriple:
    """New row r is old row ``rows[r]``; same for columns."""
    S = tuple(tuple(slh.S[r][c] for c in cols) for r in rows)
    L = tuple(slh.L[r] for r in rows)
    return SLHTriple(S, L, slh.H, slh.anc if anc is None else anc)


def _inv_one_minus(x: OperatorExpr) -> OperatorExpr:
    """(1 - x)^-1 when x = c + y with y^2 a scalar; otherwise an error."""
    if x.is_zero:
        return identity()
    c0 = x.scalar_part()
    y = x - OperatorExpr.from_scalar(c0)
    a = 1 - c0
    if y.is_zero:
        if is_zero_scalar(a):
            raise SLHError("feedback through a unit scattering entry: (1 - S_ij) is singular")
        return OperatorExpr.from_scalar(1 / a)
    y2 = y * y
    if not y2.is_scalar():
        raise SLHError(f"cannot invert 1 - ({x}) in closed form")
    det = a * a - y2.scalar_part()
    if is_zero_scalar(det):
        raise SLHError(f"1 - ({x}) is singular")
    return (OperatorExpr.from_scalar(a) + y) * (1 / det)


def _full_feedback(A: SLHTriple, i: int, j: int, anc) -> SLHTriple:
    S, L = A.S, A.L
    K = _inv_one_minus(S[i][j])
    KLi = K * L[i]
    rows = [k for k in range(A.cdim_out) if k != i]
    cols = [l for l in range(A.cdim_in) if l != j]
    newS, newL = [], []
    for k in rows:
        SkjK = S[k][j] * K if not S[k][j].is_zero else ZERO
        row = []
        for l in cols:
            row.append(S[k][l] + SkjK * S[i][l] if not SkjK.is_zero else S[k][l])
        newS.append(tuple(row))
        newL.append(L[k] + SkjK * L[i] if not SkjK.is_zero else L[k])
    cross = ZERO
    if not KLi.is_zero:
        for k in range(A.cdim_out):
            if L[k].is_zero or S[k][j].is_zero:
                continue
            cross = cross + adjoint(L[k]) * S[k][j] * KLi
    return SLHTriple(tuple(newS), tuple(newL), A.H + im_part(cross), anc)


# ---------------------------------------------------------------------------
# public rules


def identity_slh(n: int) -> SLHTriple:
    return SLHTriple(_eye(n), (ZERO,) * n, ZERO)


def perm_slh(sigma: Sequence[int]) -> SLHTriple:
    """Input k is routed to output sigma(k) (1-based)."""
    n = len(sigma)
    Perm(tuple(sigma))  # validates
    one = identity()
    S = [[ZERO] * n for _ in range(n)]
    for k, s in enumerate(sigma):
        S[s - 1][k] = one
    return SLHTriple(tuple(map(tuple, S)), (ZERO,) * n, ZERO)


def series(B: SLHTriple, A: SLHTriple) -> SLHTriple:
    """B ◁ A: (S_B S_A, L_B + S_B L_A, H_B + H_A + Im{L_B^† S_B L_A})."""
    if B.n_in != A.n_out:
        raise SLHError(f"series arity mismatch: {A.n_out} outputs into {B.n_in} inputs")
    na, nb = A.n_anc, B.n_anc
    if na == 0 and nb == 0:
        return _full_series(B, A, ())
    # A gets B's ancilla lines as pass-throughs, placed before its own
    a_ext = _full_concat(A, identity_slh(nb), ())
    rows = list(range(A.n_out)) + [A.cdim_out + k for k in range(nb)] + [A.n_out + k for k in range(na)]
    cols = list(range(A.n_in)) + [A.cdim_in + k for k in range(nb)] + [A.n_in + k for k in range(na)]
    a_ext = _reorder(a_ext, rows, cols, ())
    b_ext = _full_concat(B, identity_slh(na), ())
    return _full_series(b_ext, a_ext, B.anc + A.anc)


def concat(B: SLHTriple, A: SLHTriple) -> SLHTriple:
    """B ⊞ A: (S_B ⊕ S_A, L_B ⊕ L_A, H_B + H_A)."""
    full = _full_concat(B, A, ())
    if B.n_anc == 0 and A.n_anc == 0:
        return full

    def order(mb, cb, ma, ca):
        # [mB, aB, mA, aA] -> [mB, mA, aB, aA]
        return (
            list(range(mb))
            + [cb + k for k in range(ma)]
            + [mb + k for k in range(cb - mb)]
            + [cb + ma + k for k in range(ca - ma)]
        )

    rows = order(B.n_out, B.cdim_out, A.n_out, A.cdim_out)
    cols = order(B.n_in, B.cdim_in, A.n_in, A.cdim_in)
    return _reorder(full, rows, cols, B.anc + A.anc)


def feedback(A: SLHTriple, i: int, j: int) -> SLHTriple:
    """[A]_{i→j}: main output port i fed back into main input port j (1-based)."""
    if not 1 <= i <= A.n_out:
        raise SLHError(f"feedback output index {i} out of range 1..{A.n_out}")
    if not 1 <= j <= A.n_in:
        raise SLHError(f"feedback input index {j} out of range 1..{A.n_in}")
    return _full_feedback(A, i - 1, j - 1, A.anc)


def permute_out(A: SLHTriple, sigma: Sequence[int]) -> SLHTriple:
    """P_sigma ◁ A: old output k becomes output sigma(k)."""
    if len(sigma) != A.n_out:
        raise SLHError("permutation size does not match output count")
    Perm(tuple(sigma))
    rows = [0] * A.n_out
    for k, s in enumerate(sigma):
        rows[s - 1] = k
    rows += list(range(A.n_out, A.cdim_out))
    return _reorder(A, rows, list(range(A.cdim_in)))


def permute_in(A: SLHTriple, sigma: Sequence[int]) -> SLHTriple:
    """A ◁ P_sigma: new input k is old input sigma(k)."""
    if len(sigma) != A.n_in:
        raise SLHError("permutation size does not match input count")
    Perm(tuple(sigma))
    cols = [s - 1 for s in sigma] + list(range(A.n_in, A.cdim_in))
    return _reorder(A, list(range(A.cdim_out)), cols)


def reorder_ports(
    A: SLHTriple,
    in_order: Sequence[int] | None = None,
    out_order: Sequence[int] | None = None,
    anc_order: Sequence[int] | None = None,
) -> SLHTriple:
    """New main input k is old input ``in_order[k]`` (0-based), likewise for
    outputs; ``anc_order`` reorders the ancilla block."""
    in_order = list(range(A.n_in)) if in_order is None else list(in_order)
    out_order = list(range(A.n_out)) if out_order is None else list(out_order)
    anc_order = list(range(A.n_anc)) if anc_order is None else list(anc_order)
    rows = out_order + [A.n_out + k for k in anc_order]
    cols = in_order + [A.n_in + k for k in anc_order]
    return _reorder(A, rows, cols, tuple(A.anc[k] for k in anc_order))


def reduce(t: CircuitTerm, models: Mapping[str, SLHTriple]) -> SLHTriple:
    """Collapse a circuit term; ``models`` maps instance names to their SLH."""
    if isinstance(t, ComponentRef):
        if t.instance not in models:
            raise SLHError(f"no model for component {t.instance!r}")
        m = models[t.instance]
        if (m.n_in, m.n_out) != (t.n_in, t.n_out):
            raise SLHError(
                f"model of {t.instance} has arity {(m.n_in, m.n_out)}, term expects {(t.n_in, t.n_out)}"
            )
        return m
    if isinstance(t, Identity):
        return identity_slh(t.n)
    if isinstance(t, Perm):
        return perm_slh(t.sigma)
    if isinstance(t, Series):
        return series(reduce(t.left, models), reduce(t.right, models))
    if isinstance(t, Concat):
        return concat(reduce(t.left, models), reduce(t.right, models))
    if isinstance(t, Feedback):
        return feedback(reduce(t.inner, models), t.out_index, t.in_index)
    raise TypeError(f"not a circuit term: {t!r}")


def _simplify_op(e: OperatorExpr) -> OperatorExpr:
    return OperatorExpr({m: sp.simplify(c) for m, c in e.terms().items()})


def simplify_slh(x: SLHTriple) -> SLHTriple:
    """Run sympy's simplifier over every coefficient (slow; for display)."""
    return SLHTriple(
        tuple(tuple(_simplify_op(e) for e in row) for row in x.S),
        tuple(_simplify_op(e) for e in x.L),
        _simplify_op(x.H),
        x.anc,
    )


# ---------------------------------------------------------------------------
# numeric checks


def _entries(x: SLHTriple):
    out = [e for row in x.S for e in row]
    out += list(x.L)
    out.append(x.H)
    return out


def slh_equal_numeric(
    x: SLHTriple,
    y: SLHTriple,
    bindings: Mapping | None = None,
    samples: int = 20,
    dims: Mapping[str, int] | None = None,
    tol: float = 1e-9,
    seed: int = 0,
    compare_h: bool = True,
) -> bool:
    """Entrywise numeric comparison with one shared parameter sample per round."""
    if (x.cdim_in, x.cdim_out) != (y.cdim_in, y.cdim_out):
        return False
    from .master_eq import SpaceLayout, to_matrix

    ex, ey = _entries(x), _entries(y)
    if not compare_h:
        ex, ey = ex[:-1], ey[:-1]
    return _equal_numeric_many(list(zip(ex, ey)), bindings, samples, dims, tol, seed, SpaceLayout, to_matrix)


def numeric_scattering(x: SLHTriple, layout, bindings) -> np.ndarray:
    """S as a (cdim_out*D) x (cdim_in*D) complex block matrix."""
    from .master_eq import to_matrix

    D = layout.dim
    out = np.zeros((x.cdim_out * D, x.cdim_in * D), dtype=complex)
    for r, row in enumerate(x.S):
        for c, e in enumerate(row):
            if not e.is_zero:
                out[r * D:(r + 1) * D, c * D:(c + 1) * D] = to_matrix(e, layout, bindings)
    return out


# ---------------------------------------------------------------------------
# structured-data export


def _space_entries(x: SLHTriple, kinds: Mapping[str, str] | None = None):
    found: dict[str, str] = {}
    for e in _entries(x):
        found.update(e.label_kinds())
    kinds = dict(kinds or {})
    out = []
    for lab in sorted(found, key=label_key):
        if found[lab] == "boson":
            out.append({"label": lab, "kind": "boson", "dim": None})
        else:
            out.append({"label": lab, "kind": kinds.get(lab, "qubit"), "dim": 2})
    return out


def slh_to_dict(
    x: SLHTriple,
    in_names: Sequence[str] | None = None,
    out_names: Sequence[str] | None = None,
    kinds: Mapping[str, str] | None = None,
) -> dict:
    anc_in, anc_out = x.ancilla_ports()
    symbols = set()
    for e in _entries(x):
        symbols |= e.free_symbols
    return {
        "ports": {
            "in": x.cdim_in,
            "out": x.cdim_out,
            "names": {
                "in": list(in_names or [f"in{k + 1}" for k in range(x.n_in)]) + anc_in,
                "out": list(out_names or [f"out{k + 1}" for k in range(x.n_out)]) + anc_out,
            },
            "ancillas": [list(a) for a in x.anc],
        },
        "S": [[str(e) for e in row] for row in x.S],
        "L": [str(e) for e in x.L],
        "H": str(x.H),
        "spaces": _space_entries(x, kinds),
        "symbols": [
            {"name": s.name, "domain": "real" if s.is_real else "complex"}
            for s in sorted(symbols, key=lambda s: s.name)
        ],
    }


def slh_from_dict(d: Mapping) -> SLHTriple:
    cplx = [s["name"] for s in d.get("symbols", []) if s.get("domain") == "complex"]

    def p(text):
        try:
            return parse_operator(text, complex_symbols=cplx)
        except OperatorError as exc:
            raise SLHError(str(exc)) from exc

    anc = tuple(tuple(a) for a in d.get("ports", {}).get("ancillas", []))
    return SLHTriple(
        tuple(tuple(p(e) for e in row) for row in d["S"]),
        tuple(p(e) for e in d["L"]),
        p(d["H"]),
        anc,
    )
