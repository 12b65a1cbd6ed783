"""Netlist-level rewrites: splicing components into port-to-port connections.

The main use is propagation loss: every internal connection ``X -> Y`` is
replaced by ``X -> Lz_k -> Y`` through a beam-splitter tap whose mixing angle
sets the loss.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .netlist import (
    ComponentDecl,
    Connection,
    Netlist,
    NetlistError,
    ParamValue,
    PortRef,
    validate,
)

__all__ = [
    "LOSS_TYPE",
    "LossAssignment",
    "RewriteReport",
    "insert_losses",
    "insert_component_on_connection",
]

LOSS_TYPE = "Photonics.Components.Loss"


@dataclass(frozen=True, eq=False)
class LossAssignment:
    default_theta: ParamValue = "theta"
    overrides: Mapping[Connection, ParamValue] = field(default_factory=dict)
    exclude: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "overrides", dict(self.overrides))
        object.__setattr__(self, "exclude", frozenset(self.exclude))


@dataclass(frozen=True)
class RewriteReport:
    inserted: tuple[tuple[Connection, str, ParamValue], ...] = ()

    def __len__(self):
        return len(self.inserted)


def _check(nl: Netlist, lib=None):
    diags = validate(nl, lib)
    if diags:
        raise NetlistError("invalid netlist: " + "; ".join(map(str, diags)))


def _fresh_names(prefix: str, taken: Iterable[str]):
    taken = set(taken)
    k = 0
    while True:
        k += 1
        name = f"{prefix}{k}"
        if name not in taken:
            yield name


def insert_losses(nl: Netlist, la: LossAssignment, lib=None) -> tuple[Netlist, RewriteReport]:
    """Splice a ``Loss`` tap into every non-excluded connection.

    Fresh instances are named ``Lz1, Lz2, ...`` in connection order (names
    already used in the netlist are skipped) and declared after the existing
    components.  Each rewritten connection is replaced in place by its two
    halves.
    """
    _check(nl, lib)
    present = set(nl.connections)
    for key in list(la.overrides) + list(la.exclude):
        if key not in present:
            raise NetlistError(f"loss assignment refers to a connection not in the netlist: {key}")

    names = _fresh_names("Lz", nl.instances)
    decls = list(nl.decls)
    conns: list[Connection] = []
    inserted = []
    for c in nl.connections:
        if c in la.exclude:
            conns.append(c)
            continue
        name = next(names)
        theta = la.overrides.get(c, la.default_theta)
        decls.append(ComponentDecl(LOSS_TYPE, name, (("LossParam", theta),)))
        conns.append(Connection(c.source, PortRef(name, "input", 1)))
        conns.append(Connection(PortRef(name, "output", 1), c.target))
        inserted.append((c, name, theta))
    return Netlist(nl.name, tuple(decls), tuple(conns)), RewriteReport(tuple(inserted))


def insert_component_on_connection(
    nl: Netlist,
    c: Connection,
    decl: ComponentDecl,
    in_port: int = 1,
    out_port: int = 1,
) -> Netlist:
    """Route ``c`` through ``decl``: source -> decl.in_port, decl.out_port -> target."""
    if c not in nl.connections:
        raise NetlistError(f"connection {c} is not in netlist {nl.name}")
    if decl.instance in nl.instances:
        raise NetlistError(f"instance name {decl.instance!r} is already used")
    conns = []
    for x in nl.connections:
        if x == c:
            conns.append(Connection(c.source, PortRef(decl.instance, "input", in_port)))
            conns.append(Connection(PortRef(decl.instance, "output", out_port), c.target))
        else:
            conns.append(x)
    return Netlist(nl.name, nl.decls + (decl,), tuple(conns))
