"""Post-limit models of the three-qubit bit-flip QEC circuit.

Register qubits Q1..Q3 and two set/reset relays R1, R2.  The syndrome
signals are realized as projectors ``M_ij = (1 - Z[Qi] Z[Qj]) / 2`` (value 1
on odd parity), which makes every controller operator a closed operator on
the 32-dimensional register-plus-relay space.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .master_eq import LocalSpace, MasterEquation, SpaceLayout
from .slh_core import OperatorExpr, identity, op, scalar, symbol
from .slh_reduce import SLHTriple, slh_to_dict

__all__ = [
    "REGISTER",
    "RELAYS",
    "BitFlipModel",
    "TruthTable",
    "FIG5_TABLE",
    "syndrome",
    "build_bitflip",
    "build_ninequbit_loss_lindblad",
    "project_levels",
    "verify_controller_truth_table",
    "codeword_state",
]

REGISTER = ("Q1", "Q2", "Q3")
RELAYS = ("R1", "R2")


def _param(x) -> sp.Expr:
    if isinstance(x, str):
        return symbol(x)
    return scalar(x)


def syndrome(i: int, j: int) -> OperatorExpr:
    """Odd-parity indicator between register qubits i and j."""
    return (identity() - op("Z", f"Q{i}") * op("Z", f"Q{j}")) / 2


@dataclass(frozen=True)
class BitFlipModel:
    alpha: sp.Expr
    Omega: sp.Expr
    theta: sp.Expr
    controller: dict  # name -> Lindblad operator, Eqs. L_s1, L_r1, L_s2, L_r2
    H: OperatorExpr
    loss: tuple[OperatorExpr, ...]
    errors: tuple[OperatorExpr, ...]

    @property
    def lindblads(self) -> list[OperatorExpr]:
        return list(self.controller.values()) + list(self.loss) + list(self.errors)

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout(
            [LocalSpace(q, "qubit", 2) for q in REGISTER] + [LocalSpace(r, "relay", 2) for r in RELAYS]
        )

    def master_equation(self) -> MasterEquation:
        return MasterEquation(self.H, self.lindblads, self.layout)

    def as_slh(self) -> SLHTriple:
        """One output channel per Lindblad; S is the identity."""
        Ls = self.lindblads
        n = len(Ls)
        S = tuple(tuple(1 if r == c else 0 for c in range(n)) for r in range(n))
        return SLHTriple(S, tuple(Ls), self.H)

    def to_dict(self) -> dict:
        names = list(self.controller) + [f"L_pl{k + 1}" for k in range(len(self.loss))]
        names += [f"L_err{k + 1}" for k in range(len(self.errors))]
        kinds = {q: "qubit" for q in REGISTER} | {r: "relay" for r in RELAYS}
        d = slh_to_dict(self.as_slh(), names, names, kinds)
        d["spaces"] = [{"label": s.label, "kind": s.kind, "dim": s.dim} for s in self.layout.spaces]
        return d


def build_bitflip(alpha="alpha", Omega="Omega", theta=0, gamma=None) -> BitFlipModel:
    """Controller Lindblads and Hamiltonian of the bit-flip circuit.

    ``theta`` adds the propagation-loss Lindblad ``alpha*theta*Z[Q2]`` (none
    when theta is 0).  ``gamma`` adds register bit-flip noise
    ``sqrt(gamma)*X[Qk]`` for k = 1..3.
    """
    a, w, th = _param(alpha), _param(Omega), _param(theta)
    one = identity()
    controller = {}
    for n, (i, j) in ((1, (1, 2)), (2, (2, 3))):
        M = syndrome(i, j)
        R = f"R{n}"
        controller[f"L_s{n}"] = a * (op("sp", R) * M - op("Pi0", R) * (one - M))
        controller[f"L_r{n}"] = a * (-op("Pi1", R) * M + op("sm", R) * (one - M))
    r2 = sp.sqrt(2)
    H = w * (
        r2 * op("X", "Q1") * op("Pi1", "R1") * op("Pi0", "R2")
        + op("X", "Q2") * op("Pi1", "R1") * op("Pi1", "R2")
        - r2 * op("X", "Q3") * op("Pi0", "R1") * op("Pi1", "R2")
    )
    loss = () if th == 0 else (a * th * op("Z", "Q2"),)
    errors = ()
    if gamma is not None:
        g = sp.sqrt(_param(gamma))
        errors = tuple(g * op("X", q) for q in REGISTER)
    return BitFlipModel(a, w, th, controller, H, loss, errors)


def build_ninequbit_loss_lindblad(alpha="alpha", theta="theta") -> OperatorExpr:
    """Correlated phase error of the nine-qubit code, alpha*theta*Z2*Z5*Z8."""
    return _param(alpha) * _param(theta) * op("Z", "Q2") * op("Z", "Q5") * op("Z", "Q8")


# ---------------------------------------------------------------------------
# controller verification


@dataclass(frozen=True)
class TruthTable:
    rows: tuple[tuple[tuple[int, int], tuple[int, int, int]], ...]

    def __post_init__(self):
        if len(self.rows) != 4 or len({r[0] for r in self.rows}) != 4:
            raise ValueError("a controller truth table has one row per syndrome pair")


FIG5_TABLE = TruthTable(
    (
        ((0, 0), (0, 0, 0)),
        ((1, 0), (1, 0, 0)),
        ((1, 1), (0, 1, 0)),
        ((0, 1), (0, 0, 1)),
    )
)


def project_levels(e: OperatorExpr, levels: Mapping[str, int]) -> OperatorExpr:
    """Diagonal block <m|e|m> for each two-level label fixed to level m."""
    out = {}
    for mono, c in e.terms().items():
        keep = []
        for lab, f in mono:
            if lab not in levels:
                keep.append((lab, f))
            elif f in ("+", "-"):
                c = 0
                break
            elif f == "Z":
                c = c * (1 if levels[lab] == 0 else -1)
        else:
            key = tuple(keep)
            out[key] = out.get(key, 0) + c
    return OperatorExpr(out)


def verify_controller_truth_table(
    H_c: OperatorExpr,
    table: TruthTable = FIG5_TABLE,
    register: Sequence[str] = REGISTER,
    relays: Sequence[str] = RELAYS,
    scale="Omega",
) -> bool:
    """True iff, for every row, fixing the relays to (M12, M23) leaves exactly
    ``scale``-proportional X corrections on the qubits marked 1 in that row."""
    extra = set(H_c.labels()) - set(register) - set(relays)
    if extra:
        raise ValueError(f"controller Hamiltonian acts on unexpected spaces {sorted(extra)}")
    scale_sym = _param(scale) if scale is not None else None
    for (m12, m23), xs in table.rows:
        proj = project_levels(H_c, {relays[0]: m12, relays[1]: m23}).terms()
        wanted = set()
        for q, x in zip(register, xs):
            up, down = ((q, "+"),), ((q, "-"),)
            cu, cd = proj.get(up, 0), proj.get(down, 0)
            if x:
                # an X correction: equal sigma+ and sigma- weights, proportional to the scale
                if cu == 0 or not OperatorExpr.from_scalar(cu - cd).is_zero:
                    return False
                if scale_sym is not None and not OperatorExpr.from_scalar(cu.subs(scale_sym, 0)).is_zero:
                    return False
                wanted |= {up, down}
        if set(proj) - wanted:
            return False
    return True


def codeword_state(n_relays: int = 2) -> np.ndarray:
    """(|000> + |111>)/sqrt(2) on the register, relays in |0>."""
    psi = np.zeros(2 ** (3 + n_relays), dtype=complex)
    psi[0] = 1
    psi[0b111 << n_relays] = 1
    return psi / np.sqrt(2)
