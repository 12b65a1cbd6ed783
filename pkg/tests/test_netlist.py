import pytest
from hypothesis import given, settings

from slhflow.netlist import (
    ComponentDecl,
    Connection,
    Netlist,
    NetlistError,
    NetlistSyntaxError,
    PortRef,
    parse_connection,
    parse_netlist,
    serialize_netlist,
    validate,
)
from strategies import netlists

TQP = """model TwoQubitParity
  Photonics.Components.CoherentField W(Amplitude=alpha);
  Photonics.Components.SingleCavity Q1(CavityType=Zprobe, HilbertSpace=Q1);
  Photonics.Components.SingleCavity Q2(CavityType=Zprobe, HilbertSpace=Q2);
equation
  connect(W.output1,Q1.input1);
  connect(Q1.output1,Q2.input1);
end TwoQubitParity;
"""


def test_parse_listing():
    nl = parse_netlist(TQP)
    assert nl.name == "TwoQubitParity"
    assert nl.instances == ["W", "Q1", "Q2"]
    assert nl.decl("W").param("Amplitude") == "alpha"
    assert nl.decl("Q1").params == (("CavityType", "Zprobe"), ("HilbertSpace", "Q1"))
    assert [c.designator for c in nl.connections] == ["W.out1>Q1.in1", "Q1.out1>Q2.in1"]


def test_serialize_listing_is_byte_identical():
    assert serialize_netlist(parse_netlist(TQP)) == TQP


def test_serialize_contains_connect_lines():
    lines = [ln.strip() for ln in serialize_netlist(parse_netlist(TQP)).splitlines()]
    assert "connect(W.output1,Q1.input1);" in lines
    assert "connect(Q1.output1,Q2.input1);" in lines


def test_empty_model():
    nl = parse_netlist("model Empty\nequation\nend Empty;")
    assert nl.decls == () and nl.connections == ()
    assert serialize_netlist(nl).split() == "model Empty equation end Empty;".split()


def test_fig3_fixture_counts(fig3):
    assert len(fig3.decls) == 4 and len(fig3.connections) == 5


def test_comments_numbers_and_whitespace():
    text = """// header
model M  // trailing
  a.b.C  X ( p = 1 , q = -2.5e-3 , r = sym ) ;
equation
end M ;"""
    nl = parse_netlist(text)
    assert nl.decls[0].type_path == "a.b.C"
    assert nl.decls[0].params == (("p", 1), ("q", -2.5e-3), ("r", "sym"))
    assert parse_netlist(serialize_netlist(nl)) == nl


@pytest.mark.parametrize(
    "text, line",
    [
        ("model M\n  T X;\n  T X;\nequation\nend M;", 3),  # duplicate instance
        ("model M\n  T X;\nequation\n  connect(X.output1,Y.input1);\nend M;", 4),  # undeclared
        ("model M\n  T X;\nequation\n  connect(X.output,X.input1);\nend M;", 4),  # unindexed port
        ("model M\n  T X;\nequation\n  connect(X.input1,X.output1);\nend M;", 4),  # direction
        ("model M\n  T X\nequation\nend M;", 3),  # missing semicolon
        ("model M\nequation\nend N;", 3),  # wrong end name
        ("model M\n  T X(p=);\nequation\nend M;", 2),
        ("model M\n  T X;\nequation\nend M;\n$", 5),
    ],
)
def test_syntax_errors_carry_line(text, line):
    with pytest.raises(NetlistSyntaxError) as info:
        parse_netlist(text)
    assert info.value.line == line


def test_portref_and_connection_invariants():
    with pytest.raises(NetlistError):
        PortRef("X", "output", 0)
    with pytest.raises(NetlistError):
        Connection(PortRef("X", "input", 1), PortRef("Y", "input", 1))


def test_parse_connection_designator():
    c = parse_connection("Q1.out1>Q2.in1")
    assert str(c) == "connect(Q1.output1,Q2.input1);"
    assert parse_connection("Q1.output1 > Q2.input1") == c
    with pytest.raises(NetlistError):
        parse_connection("Q1>Q2")


def test_validate_listing(tqp, lib):
    assert validate(tqp, lib) == []


def test_validate_duplicate_connection(lib):
    nl = parse_netlist(
        """model M
  Photonics.Components.Phase A(Phi=p);
  Photonics.Components.Phase B(Phi=p);
equation
  connect(A.output1,B.input1);
  connect(A.output1,B.input1);
end M;"""
    )
    diags = validate(nl, lib)
    assert [d.kind for d in diags] == ["duplicate-connection"]
    assert diags[0].subject == "connect(A.output1,B.input1);"


def test_validate_arity(lib):
    nl = parse_netlist(
        """model M
  Photonics.Components.Phase A(Phi=p);
  Photonics.Components.Phase B(Phi=p);
equation
  connect(A.output1,B.input3);
end M;"""
    )
    diags = validate(nl, lib)
    assert [d.kind for d in diags] == ["arity"]
    assert "B.input3" in diags[0].message


def test_validate_fan_out_fan_in_and_types(lib):
    bs = "Photonics.Components.Beamsplitter"
    nl = Netlist(
        "M",
        (ComponentDecl(bs, "A"), ComponentDecl(bs, "B"), ComponentDecl("No.Such", "C")),
        (
            parse_connection("A.out1>B.in1"),
            parse_connection("A.out1>B.in2"),
            parse_connection("A.out2>B.in2"),
        ),
    )
    kinds = sorted(d.kind for d in validate(nl, lib))
    assert kinds == ["fan-in", "fan-out", "unresolved-type"]


def test_validate_structural_only():
    nl = Netlist("M", (ComponentDecl("Any.Thing", "A"),), (parse_connection("A.out1>B.in1"),))
    assert [d.kind for d in validate(nl)] == ["undeclared-instance"]


@settings(max_examples=150)
@given(netlists())
def test_roundtrip_random(nl):
    text = serialize_netlist(nl)
    again = parse_netlist(text)
    assert again == nl
    assert serialize_netlist(again) == text
    assert parse_netlist(text) == again  # deterministic
