"""Netlist -> Gough-James circuit term.

Two constructions are provided.  :func:`netlist_to_term` is the greedy
clustering parser: it repeatedly merges the best-connected pair of groups,
scoring a pair by ``connections / max(outputs(X), inputs(Y))`` (a self-loop
scores 1), until no connections remain.  :func:`netlist_to_term_naive` just
concatenates every component and closes one feedback loop per connection;
it serves as the oracle the greedy result is checked against.

Each group tracks which original component ports its external inputs and
outputs are, so the port order of any term can be reported and aligned.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from scipy.cluster.hierarchy import DisjointSet

from .circuit_algebra import (
    CircuitTerm,
    ComponentRef,
    Concat,
    Feedback,
    Identity,
    Perm,
    Series,
    concat_chain,
    pretty_print,
)
from .netlist import Connection, Netlist, NetlistError, PortRef, validate
from .slh_reduce import SLHTriple, reorder_ports

__all__ = [
    "GJParseError",
    "PairScore",
    "ParseStep",
    "ParseTrace",
    "TermPorts",
    "score_pair",
    "netlist_to_term",
    "netlist_to_term_naive",
    "term_ports",
    "align_slh",
]


class GJParseError(NetlistError):
    pass


@dataclass(frozen=True)
class PairScore:
    upstream: str
    downstream: str
    score: Fraction
    connections: tuple[Connection, ...]


@dataclass(frozen=True)
class ParseStep:
    name: str  # group created by this step
    fragment: CircuitTerm  # in terms of earlier group names
    term: CircuitTerm  # fully expanded
    score: Fraction
    absorbed: tuple[Connection, ...]

    @property
    def replacement(self) -> str:
        return f"{self.name} = {pretty_print(self.fragment)}"


@dataclass(frozen=True)
class ParseTrace:
    steps: tuple[ParseStep, ...]
    inputs: tuple[PortRef, ...]
    outputs: tuple[PortRef, ...]
    final: CircuitTerm  # final expression over the surviving group names

    def format_table(self, ascii: bool = False) -> str:
        arrow = "->" if ascii else "→"
        rows = ["Step | Replacement | Score"]
        for k, s in enumerate(self.steps, 1):
            rep = f"{s.name} = {pretty_print(s.fragment, ascii)}"
            rows.append(f"{k} | {rep} | {float(s.score):.2f}")
        rows.append(f"result: {pretty_print(self.final, ascii)}")
        rows.append("inputs: " + ", ".join(map(str, self.inputs)))
        rows.append("outputs: " + ", ".join(map(str, self.outputs)))
        return "\n".join(rows).replace("→", arrow)


class _Group:
    __slots__ = ("name", "order", "term", "ref", "inputs", "outputs")

    def __init__(self, name, order, term, inputs, outputs):
        self.name = name
        self.order = order
        self.term = term
        self.inputs = list(inputs)
        self.outputs = list(outputs)
        self.ref = ComponentRef(name, len(self.inputs), len(self.outputs))


def score_pair(n_out_x: int, n_in_y: int, n_connections: int, self_loop: bool = False) -> Fraction:
    """How fully X feeds Y; a self-loop always scores 1."""
    if n_connections <= 0:
        return Fraction(0)
    if self_loop:
        return Fraction(1)
    return Fraction(n_connections, max(n_out_x, n_in_y))


def _arities(nl: Netlist, lib) -> dict[str, tuple[int, int]]:
    diags = validate(nl, lib)
    if diags:
        raise GJParseError("invalid netlist: " + "; ".join(map(str, diags)))
    return {d.instance: lib.arity(d) for d in nl.decls}


def _initial_groups(nl: Netlist, arities) -> list[_Group]:
    out = []
    for k, d in enumerate(nl.decls):
        n_in, n_out = arities[d.instance]
        ins = [PortRef(d.instance, "input", i + 1) for i in range(n_in)]
        outs = [PortRef(d.instance, "output", i + 1) for i in range(n_out)]
        out.append(_Group(d.instance, k, ComponentRef(d.instance, n_in, n_out), ins, outs))
    return out


def _pad(t: CircuitTerm, n: int, before: bool) -> CircuitTerm:
    if n == 0:
        return t
    return Concat(Identity(n), t) if before else Concat(t, Identity(n))


def _merge_series(x: _Group, y: _Group, conns: Sequence[Connection]):
    """Build ``Y_stage [◁ P] ◁ X_stage`` for all connections X -> Y at once.

    Returns (expanded term, fragment, inputs, outputs)."""
    link = {c.source: c.target for c in conns}
    fed = set(link.values())
    x_free = [p for p in x.outputs if p not in link]  # pass around Y
    y_free = [p for p in y.inputs if p not in fed]  # new external inputs
    kx, ky = len(y_free), len(x_free)

    def wires(x_before, y_before):
        # middle wire identities, listed as X_stage outputs and Y_stage inputs
        mid_x = (y_free + x.outputs) if x_before else (x.outputs + y_free)
        mid_y = (x_free + y.inputs) if y_before else (y.inputs + x_free)
        pos = {}
        for k, p in enumerate(mid_y):
            pos[("x", p) if p in x_free else ("y", p)] = k
        sigma = []
        for p in mid_x:
            if p in link:
                sigma.append(pos[("y", link[p])] + 1)
            elif p in x_free:
                sigma.append(pos[("x", p)] + 1)
            else:
                sigma.append(pos[("y", p)] + 1)
        return tuple(sigma), mid_x, mid_y

    options = []
    for y_before in ((False, True) if ky else (False,)):
        for x_before in ((False, True) if kx else (False,)):
            options.append((x_before, y_before))
    chosen = None
    for x_before, y_before in options:
        sigma, _, _ = wires(x_before, y_before)
        if Perm(sigma).is_identity:
            chosen = (x_before, y_before, None)
            break
    if chosen is None:
        sigma, _, _ = wires(False, False)
        chosen = (False, False, Perm(sigma))
    x_before, y_before, perm = chosen

    def build(xt, yt):
        xs = _pad(xt, kx, x_before)
        ys = _pad(yt, ky, y_before)
        return Series(ys, Series(perm, xs)) if perm is not None else Series(ys, xs)

    inputs = (y_free + x.inputs) if x_before else (x.inputs + y_free)
    outputs = (x_free + y.outputs) if y_before else (y.outputs + x_free)
    return build(x.term, y.term), build(x.ref, y.ref), inputs, outputs


def netlist_to_term(nl: Netlist, lib) -> tuple[CircuitTerm, ParseTrace]:
    """Greedy clustering parse; see the module docstring for the scoring rule.

    Ties are broken by (upstream creation order, downstream creation order);
    merged groups are named G1, G2, ... and created after all components.
    """
    arities = _arities(nl, lib)
    groups = _initial_groups(nl, arities)
    owner_out = {p: g for g in groups for p in g.outputs}
    owner_in = {p: g for g in groups for p in g.inputs}
    remaining = list(nl.connections)
    steps = []
    counter = len(groups)

    while remaining:
        pairs: dict[tuple[int, int], list[Connection]] = {}
        by_order = {}
        for c in remaining:
            gx, gy = owner_out[c.source], owner_in[c.target]
            pairs.setdefault((gx.order, gy.order), []).append(c)
            by_order[gx.order], by_order[gy.order] = gx, gy
        best = None
        for key in sorted(pairs):
            gx, gy = by_order[key[0]], by_order[key[1]]
            sc = score_pair(len(gx.outputs), len(gy.inputs), len(pairs[key]), gx is gy)
            if best is None or sc > best[0]:
                best = (sc, gx, gy, pairs[key])
        sc, gx, gy, conns = best
        name = f"G{counter - len(nl.decls) + 1}"

        if gx is gy:
            c = conns[0]
            i = gx.outputs.index(c.source) + 1
            j = gx.inputs.index(c.target) + 1
            term, frag = Feedback(gx.term, i, j), Feedback(gx.ref, i, j)
            inputs = [p for p in gx.inputs if p != c.target]
            outputs = [p for p in gx.outputs if p != c.source]
            absorbed = (c,)
            old = [gx]
        else:
            term, frag, inputs, outputs = _merge_series(gx, gy, conns)
            absorbed = tuple(conns)
            old = [gx, gy]

        g = _Group(name, counter, term, inputs, outputs)
        counter += 1
        for o in old:
            groups.remove(o)
        groups.append(g)
        for p in g.outputs:
            owner_out[p] = g
        for p in g.inputs:
            owner_in[p] = g
        remaining = [c for c in remaining if c not in absorbed]
        steps.append(ParseStep(name, frag, term, sc, absorbed))

    groups.sort(key=lambda g: g.order)
    term = concat_chain(*(g.term for g in groups))
    final = concat_chain(*(g.ref for g in groups))
    inputs = tuple(p for g in groups for p in g.inputs)
    outputs = tuple(p for g in groups for p in g.outputs)
    return term, ParseTrace(tuple(steps), inputs, outputs, final)


def netlist_to_term_naive(nl: Netlist, lib) -> tuple[CircuitTerm, tuple[PortRef, ...], tuple[PortRef, ...]]:
    """Concatenate all components in declaration order, then one feedback per
    connection in listed order.  Returns (term, inputs, outputs)."""
    arities = _arities(nl, lib)
    groups = _initial_groups(nl, arities)
    term = concat_chain(*(g.term for g in groups))
    inputs = [p for g in groups for p in g.inputs]
    outputs = [p for g in groups for p in g.outputs]
    for c in nl.connections:
        i = outputs.index(c.source) + 1
        j = inputs.index(c.target) + 1
        term = Feedback(term, i, j)
        outputs.remove(c.source)
        inputs.remove(c.target)
    return term, tuple(inputs), tuple(outputs)


# ---------------------------------------------------------------------------
# port tracing


@dataclass(frozen=True)
class TermPorts:
    inputs: tuple[PortRef | None, ...]  # None: a bare pass-through line
    outputs: tuple[PortRef | None, ...]
    connections: frozenset[Connection]


def term_ports(t: CircuitTerm) -> TermPorts:
    """Trace wires through a term: which component port sits behind each
    external port, and which output -> input links the term realizes."""
    ds = DisjointSet()
    comp_port: dict[int, PortRef] = {}
    counter = [0]

    def fresh(port=None):
        counter[0] += 1
        n = counter[0]
        ds.add(n)
        if port is not None:
            comp_port[n] = port
        return n

    def walk(t):
        if isinstance(t, ComponentRef):
            ins = [fresh(PortRef(t.instance, "input", k + 1)) for k in range(t.n_in)]
            outs = [fresh(PortRef(t.instance, "output", k + 1)) for k in range(t.n_out)]
            return ins, outs
        if isinstance(t, Identity):
            nodes = [fresh() for _ in range(t.n)]
            return nodes, list(nodes)
        if isinstance(t, Perm):
            nodes = [fresh() for _ in t.sigma]
            outs = [0] * len(nodes)
            for k, s in enumerate(t.sigma):
                outs[s - 1] = nodes[k]
            return nodes, outs
        if isinstance(t, Series):
            l_in, l_out = walk(t.left)
            r_in, r_out = walk(t.right)
            for a, b in zip(r_out, l_in):
                ds.merge(a, b)
            return r_in, l_out
        if isinstance(t, Concat):
            l_in, l_out = walk(t.left)
            r_in, r_out = walk(t.right)
            return l_in + r_in, l_out + r_out
        if isinstance(t, Feedback):
            ins, outs = walk(t.inner)
            ds.merge(outs[t.out_index - 1], ins[t.in_index - 1])
            return ins[: t.in_index - 1] + ins[t.in_index:], outs[: t.out_index - 1] + outs[t.out_index:]
        raise TypeError(f"not a circuit term: {t!r}")

    ins, outs = walk(t)
    sources, targets = {}, {}
    for n, p in comp_port.items():
        root = ds[n]
        (sources if p.direction == "output" else targets)[root] = p
    conns = frozenset(Connection(sources[r], targets[r]) for r in sources if r in targets)
    return TermPorts(
        tuple(targets.get(ds[n]) for n in ins),
        tuple(sources.get(ds[n]) for n in outs),
        conns,
    )


def align_slh(
    slh: SLHTriple,
    inputs: Sequence[PortRef],
    outputs: Sequence[PortRef],
    target_inputs: Sequence[PortRef],
    target_outputs: Sequence[PortRef],
    target_anc: Sequence[tuple] | None = None,
) -> SLHTriple:
    """Reorder ``slh`` (whose main ports are ``inputs``/``outputs``) so its
    port order matches the targets; ancillas are matched by instance name."""
    if sorted(inputs) != sorted(target_inputs) or sorted(outputs) != sorted(target_outputs):
        raise GJParseError("port sets differ; cannot align")
    in_order = [list(inputs).index(p) for p in target_inputs]
    out_order = [list(outputs).index(p) for p in target_outputs]
    anc_order = None
    if target_anc is not None:
        names = [tuple(a) for a in slh.anc]
        anc_order = [names.index(tuple(a)) for a in target_anc]
    return reorder_ports(slh, in_order, out_order, anc_order)
