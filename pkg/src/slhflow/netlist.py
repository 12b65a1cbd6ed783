"""Photonic netlist model, parser and serializer (``.pnl`` files).

The accepted text is a small subset of Modelica::

    model TwoQubitParity
      Photonics.Components.CoherentField W(Amplitude=alpha);
      Photonics.Components.SingleCavity Q1(CavityType=Zprobe, HilbertSpace=Q1);
    equation
      connect(W.output1,Q1.input1);
    end TwoQubitParity;

``//`` starts a comment that runs to the end of the line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

__all__ = [
    "NetlistError",
    "NetlistSyntaxError",
    "PortRef",
    "ComponentDecl",
    "Connection",
    "Netlist",
    "Diagnostic",
    "parse_netlist",
    "serialize_netlist",
    "validate",
    "parse_connection",
]

ParamValue = Union[str, int, float]


class NetlistError(ValueError):
    pass


class NetlistSyntaxError(NetlistError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


@dataclass(frozen=True, order=True)
class PortRef:
    instance: str
    direction: str  # "input" | "output"
    index: int

    def __post_init__(self):
        if self.direction not in ("input", "output"):
            raise NetlistError(f"bad port direction {self.direction!r}")
        if self.index < 1:
            raise NetlistError("port index must be >= 1")

    def __str__(self):
        return f"{self.instance}.{self.direction}{self.index}"


@dataclass(frozen=True)
class ComponentDecl:
    type_path: str
    instance: str
    params: tuple[tuple[str, ParamValue], ...] = ()

    def param(self, name: str, default=None):
        for k, v in self.params:
            if k == name:
                return v
        return default

    @property
    def param_dict(self) -> dict[str, ParamValue]:
        return dict(self.params)


@dataclass(frozen=True)
class Connection:
    source: PortRef
    target: PortRef

    def __post_init__(self):
        if self.source.direction != "output":
            raise NetlistError(f"connection source {self.source} is not an output port")
        if self.target.direction != "input":
            raise NetlistError(f"connection target {self.target} is not an input port")

    def __str__(self):
        return f"connect({self.source},{self.target});"

    @property
    def designator(self) -> str:
        """Command-line form ``X.outI>Y.inJ``."""
        s, t = self.source, self.target
        return f"{s.instance}.out{s.index}>{t.instance}.in{t.index}"


@dataclass(frozen=True)
class Netlist:
    name: str
    decls: tuple[ComponentDecl, ...] = ()
    connections: tuple[Connection, ...] = ()

    def decl(self, instance: str) -> ComponentDecl:
        for d in self.decls:
            if d.instance == instance:
                return d
        raise KeyError(instance)

    @property
    def instances(self) -> list[str]:
        return [d.instance for d in self.decls]


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.subject}: {self.message}"


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<number>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[.;,()=])
    """,
    re.VERBOSE,
)
_PORT_RE = re.compile(r"(input|output)(\d+)")


def _tokenize(text: str):
    toks = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise NetlistSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind, val = m.lastgroup, m.group(0)
        if kind not in ("ws", "comment"):
            toks.append((kind, val, line, col))
        nl = val.count("\n")
        if nl:
            line += nl
            col = len(val) - val.rfind("\n")
        else:
            col += len(val)
        pos = m.end()
    toks.append(("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        found = tok[1] or "end of input"
        raise NetlistSyntaxError(f"{msg}, found {found!r}", tok[2], tok[3])

    def expect(self, kind, value=None):
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            self.error(f"expected {value or kind}")
        self.i += 1
        return tok

    def keyword(self, word):
        return self.peek()[0] == "ident" and self.peek()[1] == word

    def model(self) -> Netlist:
        self.expect("ident", "model")
        name = self.expect("ident")[1]
        decls, seen = [], {}
        while not self.keyword("equation"):
            if self.peek()[0] == "eof":
                self.error("expected 'equation'")
            tok = self.peek()
            d = self.decl()
            if d.instance in seen:
                raise NetlistSyntaxError(f"duplicate instance name {d.instance!r}", tok[2], tok[3])
            seen[d.instance] = d
            decls.append(d)
        self.expect("ident", "equation")
        conns = []
        while self.keyword("connect"):
            conns.append(self.conn(seen))
        self.expect("ident", "end")
        end_tok = self.expect("ident")
        if end_tok[1] != name:
            self.error(f"expected 'end {name}'", end_tok)
        self.expect("punct", ";")
        self.expect("eof")
        return Netlist(name, tuple(decls), tuple(conns))

    def decl(self) -> ComponentDecl:
        parts = [self.expect("ident")[1]]
        while self.peek()[1] == "." and self.peek()[0] == "punct":
            self.i += 1
            parts.append(self.expect("ident")[1])
        inst = self.expect("ident")[1]
        params = []
        if self.peek()[1] == "(":
            self.i += 1
            while True:
                pname = self.expect("ident")[1]
                if any(pname == k for k, _ in params):
                    self.error(f"duplicate parameter {pname!r}")
                self.expect("punct", "=")
                tok = self.peek()
                if tok[0] == "ident":
                    val: ParamValue = tok[1]
                elif tok[0] == "number":
                    val = _number(tok[1])
                else:
                    self.error("expected identifier or number")
                self.i += 1
                params.append((pname, val))
                if self.peek()[1] == ",":
                    self.i += 1
                    continue
                self.expect("punct", ")")
                break
        self.expect("punct", ";")
        return ComponentDecl(".".join(parts), inst, tuple(params))

    def portref(self, seen) -> PortRef:
        tok = self.expect("ident")
        if tok[1] not in seen:
            raise NetlistSyntaxError(f"connection references undeclared instance {tok[1]!r}", tok[2], tok[3])
        self.expect("punct", ".")
        ptok = self.expect("ident")
        m = _PORT_RE.fullmatch(ptok[1])
        if not m or int(m.group(2)) < 1:
            raise NetlistSyntaxError(
                f"port must be input<k> or output<k> with k >= 1, found {ptok[1]!r}", ptok[2], ptok[3]
            )
        return PortRef(tok[1], m.group(1), int(m.group(2)))

    def conn(self, seen) -> Connection:
        start = self.expect("ident", "connect")
        self.expect("punct", "(")
        a = self.portref(seen)
        self.expect("punct", ",")
        b = self.portref(seen)
        self.expect("punct", ")")
        self.expect("punct", ";")
        if a.direction != "output" or b.direction != "input":
            raise NetlistSyntaxError("connect() must run from an output port to an input port", start[2], start[3])
        return Connection(a, b)


def _number(text: str) -> int | float:
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    return float(text)


def parse_netlist(text: str) -> Netlist:
    return _Parser(text).model()


def _format_value(v: ParamValue) -> str:
    if isinstance(v, bool):
        raise NetlistError("boolean parameters are not supported")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return v


def serialize_netlist(nl: Netlist) -> str:
    lines = [f"model {nl.name}"]
    for d in nl.decls:
        ps = ""
        if d.params:
            ps = "(" + ", ".join(f"{k}={_format_value(v)}" for k, v in d.params) + ")"
        lines.append(f"  {d.type_path} {d.instance}{ps};")
    lines.append("equation")
    for c in nl.connections:
        lines.append(f"  {c}")
    lines.append(f"end {nl.name};")
    return "\n".join(lines) + "\n"


_DESIGNATOR_RE = re.compile(
    r"\s*([A-Za-z_]\w*)\.out(?:put)?(\d+)\s*>\s*([A-Za-z_]\w*)\.in(?:put)?(\d+)\s*"
)


def parse_connection(text: str) -> Connection:
    """Parse ``X.outI>Y.inJ`` (``output``/``input`` spelled out also accepted)."""
    m = _DESIGNATOR_RE.fullmatch(text)
    if not m:
        raise NetlistError(f"bad connection designator {text!r}; expected X.outI>Y.inJ")
    return Connection(
        PortRef(m.group(1), "output", int(m.group(2))),
        PortRef(m.group(3), "input", int(m.group(4))),
    )


# ---------------------------------------------------------------------------
# validation


def validate(nl: Netlist, lib=None) -> list[Diagnostic]:
    """Structural and library checks; an empty list means the netlist is usable.

    With ``lib=None`` only the structural invariants are checked (type paths
    and port ranges are not resolved)."""
    diags: list[Diagnostic] = []
    arities = {}
    seen = set()
    for d in nl.decls:
        if d.instance in seen:
            diags.append(Diagnostic("duplicate-instance", d.instance, "instance declared more than once"))
            continue
        seen.add(d.instance)
        if lib is None:
            continue
        try:
            arities[d.instance] = lib.arity(d)
        except Exception as exc:  # unknown type or parameter schema problem
            diags.append(Diagnostic("unresolved-type", d.instance, str(exc)))

    used_out: dict[PortRef, Connection] = {}
    used_in: dict[PortRef, Connection] = {}
    for c in nl.connections:
        bad = False
        for p in (c.source, c.target):
            if p.instance not in seen:
                diags.append(Diagnostic("undeclared-instance", str(c), f"{p.instance} is not declared"))
                bad = True
            elif p.instance in arities:
                n_in, n_out = arities[p.instance]
                limit = n_out if p.direction == "output" else n_in
                if p.index > limit:
                    diags.append(
                        Diagnostic("arity", str(c), f"{p} exceeds the {limit} {p.direction} port(s) of {p.instance}")
                    )
                    bad = True
        if bad:
            continue
        if used_out.get(c.source) == c and used_in.get(c.target) == c:
            diags.append(Diagnostic("duplicate-connection", str(c), "connection listed more than once"))
            continue
        if c.source in used_out:
            diags.append(Diagnostic("fan-out", str(c), f"{c.source} already drives {used_out[c.source].target}"))
        else:
            used_out[c.source] = c
        if c.target in used_in:
            diags.append(Diagnostic("fan-in", str(c), f"{c.target} already driven by {used_in[c.target].source}"))
        else:
            used_in[c.target] = c
    return diags
