"""Dense Lindblad master-equation backend.

Operator expressions are realized as Kronecker-product matrices in a fixed
:class:`SpaceLayout`, then integrated with fixed-step RK4 or scipy's
adaptive RK45.
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy as sp

from .slh_core import BOSON_ATOMS, OperatorError, OperatorExpr, label_key

__all__ = [
    "LocalSpace",
    "SpaceLayout",
    "SimulationError",
    "MasterEquation",
    "SimConfig",
    "Trajectory",
    "to_matrix",
    "lindblad_rhs",
    "integrate",
    "fidelity",
    "basis_state",
    "parse_state",
]

MAX_DIM = 4096


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class LocalSpace:
    label: str
    kind: str = "qubit"  # qubit | relay | boson
    dim: int = 2

    def __post_init__(self):
        if self.kind not in ("qubit", "relay", "boson"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind != "boson" and self.dim != 2:
            raise ValueError(f"{self.kind} space {self.label} must have dimension 2")
        if self.dim < 1:
            raise ValueError("dimension must be positive")


@dataclass(frozen=True)
class SpaceLayout:
    spaces: tuple[LocalSpace, ...]

    def __post_init__(self):
        labels = [s.label for s in self.spaces]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in layout")

    @classmethod
    def of(cls, spaces: Iterable) -> "SpaceLayout":
        out = []
        for s in spaces:
            if isinstance(s, LocalSpace):
                out.append(s)
            elif isinstance(s, str):
                out.append(LocalSpace(s))
            else:
                out.append(LocalSpace(*s))
        return cls(tuple(out))

    @classmethod
    def for_exprs(
        cls,
        exprs: Iterable[OperatorExpr],
        dims: Mapping[str, int] | None = None,
        kinds: Mapping[str, str] | None = None,
    ) -> "SpaceLayout":
        """Layout covering every label in ``exprs`` in natural label order."""
        dims, kinds = dict(dims or {}), dict(kinds or {})
        found: dict[str, str] = {}
        for e in exprs:
            for lab, k in e.label_kinds().items():
                found[lab] = k
        for lab in kinds:
            found.setdefault(lab, "boson" if kinds[lab] == "boson" else "two_level")
        spaces = []
        for lab in sorted(found, key=label_key):
            if found[lab] == "boson":
                if lab not in dims:
                    raise SimulationError(f"boson label {lab} needs a truncation dimension")
                spaces.append(LocalSpace(lab, "boson", dims[lab]))
            else:
                spaces.append(LocalSpace(lab, kinds.get(lab, "qubit"), 2))
        return cls(tuple(spaces))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.spaces)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.spaces)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.spaces else 1


_SP = np.array([[0, 0], [1, 0]], dtype=complex)
_TWO_LEVEL = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
    "sp": _SP,
    "sm": _SP.T.copy(),
    "Pi0": np.diag([1.0, 0.0]).astype(complex),
    "Pi1": np.diag([0.0, 1.0]).astype(complex),
}


def _local_matrix(atom: str, space: LocalSpace) -> np.ndarray:
    if space.kind == "boson":
        n = space.dim
        a = np.diag(np.sqrt(np.arange(1, n)), k=1).astype(complex)
        if atom == "a":
            return a
        if atom == "ad":
            return a.conj().T
        if atom == "I":
            return np.eye(n, dtype=complex)
        raise OperatorError(f"atom {atom} is not defined on boson space {space.label}")
    if atom in BOSON_ATOMS:
        raise OperatorError(f"atom {atom} is not defined on two-level space {space.label}")
    return _TWO_LEVEL[atom]


def _eval_scalar(c: sp.Expr, values: Mapping[str, complex]) -> complex:
    if c.is_number:
        return complex(c)
    rep = {}
    for s in c.free_symbols:
        if s.name not in values:
            raise SimulationError(f"unbound symbol {s.name}")
        rep[s] = sp.sympify(values[s.name])
    return complex(c.xreplace(rep).evalf())


def to_matrix(e: OperatorExpr, layout: SpaceLayout, bindings: Mapping | None = None) -> np.ndarray:
    """Dense matrix of ``e``; Kronecker order follows ``layout``."""
    values = {}
    for k, v in (bindings or {}).items():
        values[k if isinstance(k, str) else k.name] = complex(v)
    index = {s.label: i for i, s in enumerate(layout.spaces)}
    out = np.zeros((layout.dim, layout.dim), dtype=complex)
    for c, word in e.words():
        coef = _eval_scalar(c, values)
        if coef == 0:
            continue
        locals_ = [None] * len(layout.spaces)
        for lab, atom in word:
            if lab not in index:
                raise SimulationError(f"label {lab} missing from layout")
            i = index[lab]
            m = _local_matrix(atom, layout.spaces[i])
            locals_[i] = m if locals_[i] is None else locals_[i] @ m
        term = np.ones((1, 1), dtype=complex)
        for i, s in enumerate(layout.spaces):
            term = np.kron(term, np.eye(s.dim, dtype=complex) if locals_[i] is None else locals_[i])
        out += coef * term
    return out


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, Ls: Sequence[np.ndarray]) -> np.ndarray:
    """-i[H, rho] + sum_k (L rho L^dag - 1/2 {L^dag L, rho})."""
    if rho.shape != H.shape or any(L.shape != H.shape for L in Ls):
        raise SimulationError("dimension mismatch in lindblad_rhs")
    out = -1j * (H @ rho - rho @ H)
    for L in Ls:
        Ld = L.conj().T
        LdL = Ld @ L
        out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def fidelity(rho: np.ndarray, psi0: np.ndarray) -> float:
    """<psi0|rho|psi0> for a normalized state vector."""
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if rho.shape != (psi0.size, psi0.size):
        raise SimulationError("dimension mismatch in fidelity")
    return float(np.real(np.vdot(psi0, rho @ psi0)))


# ---------------------------------------------------------------------------
# states


def basis_state(layout: SpaceLayout, levels: Mapping[str, int] | None = None) -> np.ndarray:
    levels = dict(levels or {})
    unknown = set(levels) - set(layout.labels)
    if unknown:
        raise SimulationError(f"labels not in layout: {sorted(unknown)}")
    psi = np.ones(1, dtype=complex)
    for s in layout.spaces:
        v = np.zeros(s.dim, dtype=complex)
        k = levels.get(s.label, 0)
        if not 0 <= k < s.dim:
            raise SimulationError(f"level {k} out of range for {s.label}")
        v[k] = 1.0
        psi = np.kron(psi, v)
    return psi


def parse_state(spec: str, layout: SpaceLayout) -> np.ndarray:
    """Normalized superposition of basis kets.

    ``"Q1=0,Q2=0,Q3=0 + Q1=1,Q2=1,Q3=1"`` is the three-qubit GHZ state;
    unlisted labels sit in level 0.  A ket may also be written as a bit
    string over the layout order, e.g. ``"00000 + 11100"``.
    """
    psi = np.zeros(layout.dim, dtype=complex)
    for ket in spec.split("+"):
        ket = ket.strip()
        if not ket:
            raise SimulationError(f"empty ket in state spec {spec!r}")
        if re.fullmatch(r"\d+", ket):
            if len(ket) != len(layout.spaces):
                raise SimulationError(f"bit string {ket} does not match layout {layout.labels}")
            levels = dict(zip(layout.labels, map(int, ket)))
        else:
            levels = {}
            for item in ket.split(","):
                m = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*=\s*(\d+)\s*", item)
                if not m:
                    raise SimulationError(f"bad ket item {item!r}")
                levels[m.group(1)] = int(m.group(2))
        psi += basis_state(layout, levels)
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class MasterEquation:
    H: OperatorExpr
    lindblads: tuple[OperatorExpr, ...]
    layout: SpaceLayout | None = None

    @classmethod
    def from_slh(cls, slh, layout: SpaceLayout | None = None) -> "MasterEquation":
        """Vacuum-input master equation of an SLH triple: every coupling
        entry, dangling loss ports included, is one Lindblad operator."""
        return cls(slh.H, tuple(slh.L), layout)

    def resolve_layout(self, dims=None, kinds=None) -> SpaceLayout:
        if self.layout is not None:
            return self.layout
        return SpaceLayout.for_exprs([self.H, *self.lindblads], dims, kinds)


@dataclass
class SimConfig:
    t_final: float
    dt: float = 1e-3
    method: str = "rk4"
    observables: Mapping[str, OperatorExpr] = field(default_factory=dict)
    fidelity_state: np.ndarray | None = None
    rho0: np.ndarray | None = None
    bindings: Mapping[str, complex] = field(default_factory=dict)
    save_every: int | None = None
    rtol: float = 1e-8
    atol: float = 1e-10
    time_unit: str = "1/|alpha|^2"

    def __post_init__(self):
        if self.dt <= 0 or self.t_final < 0:
            raise SimulationError("need dt > 0 and t_final >= 0")
        if self.method not in ("rk4", "adaptive-rk45"):
            raise SimulationError(f"unknown method {self.method!r}")


@dataclass
class Trajectory:
    times: np.ndarray
    series: dict[str, np.ndarray]
    trace_drift: np.ndarray
    min_eig: np.ndarray
    hermiticity: np.ndarray
    metadata: dict = field(default_factory=dict)
    final_rho: np.ndarray | None = None

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.series)
        cols = []
        for n in names:
            s = self.series[n]
            if np.iscomplexobj(s) and np.max(np.abs(s.imag), initial=0.0) > 1e-12:
                cols += [(f"{n}_re", s.real), (f"{n}_im", s.imag)]
            else:
                cols.append((n, np.real(s)))
        w.writerow(["t", *[c[0] for c in cols], "trace_drift"])
        for k, t in enumerate(self.times):
            w.writerow([repr(float(t)), *[repr(float(c[1][k])) for c in cols], repr(float(self.trace_drift[k]))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _rk4(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(model: MasterEquation, config: SimConfig, dims=None, kinds=None) -> Trajectory:
    layout = model.resolve_layout(dims, kinds)
    D = layout.dim
    if D > MAX_DIM:
        raise SimulationError(f"state dimension {D} exceeds dense limit {MAX_DIM}")
    H = to_matrix(model.H, layout, config.bindings)
    Ls = [to_matrix(L, layout, config.bindings) for L in model.lindblads]
    Ls = [L for L in Ls if np.any(L)]
    obs = {n: to_matrix(o, layout, config.bindings) for n, o in config.observables.items()}

    psi_f = None
    if config.fidelity_state is not None:
        psi_f = np.asarray(config.fidelity_state, dtype=complex).ravel()
        if psi_f.size != D:
            raise SimulationError("fidelity state has wrong dimension")
        psi_f = psi_f / np.linalg.norm(psi_f)
    if config.rho0 is not None:
        rho = np.array(config.rho0, dtype=complex)
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
    elif psi_f is not None:
        rho = np.outer(psi_f, psi_f.conj())
    else:
        g = basis_state(layout)
        rho = np.outer(g, g.conj())
    if rho.shape != (D, D):
        raise SimulationError("initial state has wrong dimension")

    # effective non-Hermitian generator: rhs = -i(Heff rho - rho Heff^dag) + sum L rho L^dag
    Heff = H - 0.5j * sum((L.conj().T @ L for L in Ls), np.zeros_like(H))
    Lstack = np.array(Ls) if Ls else None
    Ldstack = np.conj(np.transpose(Lstack, (0, 2, 1))) if Ls else None

    def rhs(r):
        out = -1j * (Heff @ r - r @ Heff.conj().T)
        if Lstack is not None:
            out += np.matmul(np.matmul(Lstack, r), Ldstack).sum(axis=0)
        return out

    rho = rho / np.trace(rho)
    tr0 = 1.0
    times, snaps = [], []

    def record(t, r):
        times.append(t)
        snaps.append(_observe(r, obs, psi_f, tr0))

    if config.method == "rk4":
        n = max(1, int(math.ceil(config.t_final / config.dt - 1e-9))) if config.t_final > 0 else 0
        h = config.t_final / n if n else 0.0
        every = config.save_every or max(1, n // 1000)
        record(0.0, rho)
        for k in range(1, n + 1):
            rho = _rk4(rhs, rho, h)
            if k % every == 0 or k == n:
                record(k * h, rho)
    else:
        from scipy.integrate import solve_ivp

        n_out = config.save_every or 200
        grid = np.linspace(0.0, config.t_final, n_out + 1)
        sol = solve_ivp(
            lambda t, y: rhs(y.reshape(D, D)).ravel(),
            (0.0, config.t_final),
            rho.ravel(),
            method="RK45",
            t_eval=grid,
            rtol=config.rtol,
            atol=config.atol,
            first_step=config.dt,
        )
        if not sol.success:
            raise SimulationError(f"adaptive integration failed: {sol.message}")
        for k, t in enumerate(sol.t):
            rho = sol.y[:, k].reshape(D, D)
            record(float(t), rho)

    names = list(obs) + (["fidelity"] if psi_f is not None else [])
    series = {n: np.array([s[0][n] for s in snaps]) for n in names}
    meta = {
        "method": config.method,
        "dt": config.dt,
        "time_unit": config.time_unit,
        "layout": [(s.label, s.kind, s.dim) for s in layout.spaces],
    }
    return Trajectory(
        times=np.array(times),
        series=series,
        trace_drift=np.array([s[1] for s in snaps]),
        min_eig=np.array([s[2] for s in snaps]),
        hermiticity=np.array([s[3] for s in snaps]),
        metadata=meta,
        final_rho=rho,
    )


def _observe(rho, obs, psi_f, tr0):
    vals = {n: complex(np.trace(O @ rho)) for n, O in obs.items()}
    if psi_f is not None:
        vals["fidelity"] = fidelity(rho, psi_f)
    drift = abs(np.real(np.trace(rho)) - tr0)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    return vals, drift, min_eig, herm
