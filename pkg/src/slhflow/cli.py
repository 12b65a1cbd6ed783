"""Command-line front end: netlist -> term -> SLH -> master-equation run.

Exit status is 0 on success, 1 for user errors (bad input files, bad
arguments, invalid netlists) and 2 for internal errors.  Diagnostics go to
standard error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from importlib import resources

import numpy as np

from .circuit_algebra import ArityError, TermSyntaxError, parse_term, pretty_print
from .component_lib import LibraryError, default_library, load_manifest
from .gj_parse import netlist_to_term
from .master_eq import (
    LocalSpace,
    MasterEquation,
    SimConfig,
    SimulationError,
    SpaceLayout,
    integrate,
    parse_state,
)
from .netlist import (
    NetlistError,
    NetlistSyntaxError,
    parse_connection,
    parse_netlist,
    serialize_netlist,
    validate,
)
from .netlist_rewrite import LossAssignment, insert_losses
from .qec_models import build_bitflip
from .slh_core import OperatorError, parse_operator
from .slh_reduce import SLHError, reduce, simplify_slh, slh_from_dict, slh_to_dict

__all__ = ["main", "run", "FIXTURES"]

FIXTURES = {
    "twoqubitparity": "twoqubitparity.pnl",
    "fig3": "fig3.pnl",
    "fig3-library": "fig3_library.json",
    "mach-zehnder": "mach_zehnder.pnl",
    "beamsplitter": "beamsplitter.pnl",
}

USER_ERRORS = (
    NetlistError,
    LibraryError,
    TermSyntaxError,
    ArityError,
    SLHError,
    SimulationError,
    OperatorError,
    OSError,
    json.JSONDecodeError,
    KeyError,
    ValueError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _library(args):
    lib = default_library()
    for path in args.library or ():
        lib = load_manifest(path, lib)
    return lib


def _load_netlist(path: str, lib=None):
    try:
        nl = parse_netlist(_read(path))
    except NetlistSyntaxError as exc:
        raise NetlistError(f"{path}:{exc}") from exc
    if lib is not None:
        diags = validate(nl, lib)
        if diags:
            raise NetlistError(f"{path}: invalid netlist\n" + "\n".join(f"  {d}" for d in diags))
    return nl


def _scalar_arg(text: str):
    """Command-line parameter value: number if it parses as one, else a symbol name."""
    try:
        v = float(text)
    except ValueError:
        if not text.isidentifier():
            raise UsageError(f"{text!r} is neither a number nor a symbol name")
        return text
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


def _binding(text: str):
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise UsageError(f"binding {text!r} must look like name=value")
    try:
        v = complex(value.strip().replace("i", "j"))
    except ValueError:
        raise UsageError(f"binding {text!r}: {value!r} is not a number") from None
    return name.strip(), (v.real if v.imag == 0 else v)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_parse(args) -> int:
    nl = _load_netlist(args.input, _library(args))
    _write(args.output, serialize_netlist(nl))
    return 0


def cmd_add_loss(args) -> int:
    nl = _load_netlist(args.input)
    overrides = {}
    for item in args.override or ():
        conn, sep, theta = item.rpartition("=")
        if not sep:
            raise UsageError(f"override {item!r} must look like X.outI>Y.inJ=theta")
        overrides[parse_connection(conn)] = _scalar_arg(theta)
    la = LossAssignment(
        _scalar_arg(args.theta),
        overrides,
        frozenset(parse_connection(c) for c in args.exclude or ()),
    )
    out, report = insert_losses(nl, la)
    for c, name, theta in report.inserted:
        print(f"{c.designator}: inserted {name}(LossParam={theta})", file=sys.stderr)
    _write(args.output, serialize_netlist(out))
    return 0


def cmd_to_gj(args) -> int:
    lib = _library(args)
    nl = _load_netlist(args.input, lib)
    term, trace = netlist_to_term(nl, lib)
    text = pretty_print(term, ascii=args.ascii) + "\n"
    if args.trace:
        text += trace.format_table(ascii=args.ascii) + "\n"
    _write(args.output, text)
    return 0


def cmd_reduce(args) -> int:
    lib = _library(args)
    source = args.input
    if source.endswith(".pnl") or (os.path.isfile(source) and _read(source).lstrip().startswith("model")):
        nl = _load_netlist(source, lib)
        term, trace = netlist_to_term(nl, lib)
        in_names = [str(p) for p in trace.inputs]
        out_names = [str(p) for p in trace.outputs]
    else:
        if not args.netlist:
            raise UsageError("reducing a term needs --netlist for the component declarations")
        nl = _load_netlist(args.netlist, lib)
        text = _read(source) if os.path.isfile(source) else source
        arities = {d.instance: lib.arity(d) for d in nl.decls}
        term = parse_term(text.strip(), arities)
        in_names = out_names = None
    slh = reduce(term, lib.instantiate_all(nl))
    if args.simplify:
        slh = simplify_slh(slh)
    if args.format == "json":
        d = slh_to_dict(slh, in_names, out_names, lib.space_kinds(nl))
        d["term"] = pretty_print(term)
        out = _dump_json(d)
    else:
        out = f"term: {pretty_print(term, ascii=args.ascii)}\n{slh}\n"
    _write(args.output, out)
    return 0


def _layout_from_dict(d, dims):
    spaces = []
    for s in d.get("spaces", []):
        dim = s.get("dim")
        if s.get("kind") == "boson":
            dim = dims.get(s["label"], dim)
            if dim is None:
                raise UsageError(f"boson space {s['label']} needs a truncation, e.g. --dim {s['label']}=10")
        spaces.append(LocalSpace(s["label"], s.get("kind", "qubit"), int(dim or 2)))
    return SpaceLayout(spaces) if spaces else None


def cmd_simulate(args) -> int:
    cfg = {}
    if args.config:
        cfg = json.loads(_read(args.config))
    d = json.loads(_read(args.input))
    slh = slh_from_dict(d)
    dims = {}
    for item in list(cfg.get("dims", {}).items()) + [tuple(x.split("=", 1)) for x in args.dim or ()]:
        dims[item[0]] = int(item[1])
    layout = _layout_from_dict(d, dims)
    bindings = dict(cfg.get("bindings", {}))
    bindings.update(dict(_binding(b) for b in args.bind or ()))
    cplx = [s["name"] for s in d.get("symbols", []) if s.get("domain") == "complex"]
    observables = {}
    for k, v in cfg.get("observables", {}).items():
        observables[k] = parse_operator(v, complex_symbols=cplx)
    for item in args.observable or ():
        name, sep, text = item.partition("=")
        if not sep:
            raise UsageError(f"observable {item!r} must look like name=operator")
        observables[name.strip()] = parse_operator(text, complex_symbols=cplx)

    model = MasterEquation.from_slh(slh, layout)
    layout = model.resolve_layout(dims)
    fid_spec = args.fidelity or cfg.get("fidelity")
    init_spec = args.init or cfg.get("init")
    fid = parse_state(fid_spec, layout) if fid_spec else None
    rho0 = parse_state(init_spec, layout) if init_spec else None
    t_final = args.t_final if args.t_final is not None else cfg.get("t_final")
    if t_final is None:
        raise UsageError("--t-final is required")
    config = SimConfig(
        t_final=float(t_final),
        dt=float(args.dt if args.dt is not None else cfg.get("dt", 1e-3)),
        method=args.method or cfg.get("method", "rk4"),
        observables=observables,
        fidelity_state=fid,
        rho0=rho0,
        bindings=bindings,
        save_every=args.save_every or cfg.get("save_every"),
        time_unit=cfg.get("time_unit", "1/(dominant rate)"),
    )
    traj = integrate(model, config)
    _write(args.output, traj.to_csv())
    if args.output and args.output != "-":
        meta = dict(traj.metadata)
        meta.update(
            {
                "input": os.path.basename(args.input),
                "bindings": {k: (str(v) if isinstance(v, complex) else v) for k, v in sorted(bindings.items())},
                "t_final": config.t_final,
                "max_trace_drift": float(np.max(traj.trace_drift)),
                "min_eigenvalue": float(np.min(traj.min_eig)),
                "max_hermiticity_error": float(np.max(traj.hermiticity)),
            }
        )
        _write(args.output + ".meta.json", _dump_json(meta))
    return 0


def cmd_fixture(args) -> int:
    if args.name == "bitflip":
        gamma = None if args.gamma is None else _scalar_arg(args.gamma)
        model = build_bitflip(
            _scalar_arg(args.alpha), _scalar_arg(args.omega), _scalar_arg(args.theta), gamma
        )
        _write(args.output, _dump_json(model.to_dict()))
        return 0
    if args.name == "list":
        _write(args.output, "\n".join(["bitflip", *FIXTURES]) + "\n")
        return 0
    if args.name not in FIXTURES:
        raise UsageError(f"unknown fixture {args.name!r}; try 'fixture list'")
    text = resources.files("slhflow").joinpath("data", FIXTURES[args.name]).read_text(encoding="utf-8")
    _write(args.output, text)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="slhflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def lib_opt(q):
        q.add_argument("--library", action="append", metavar="MANIFEST", help="extra component manifest (JSON)")

    q = sub.add_parser("parse", help="validate a netlist and print it in canonical form")
    q.add_argument("input")
    q.add_argument("-o", "--output")
    lib_opt(q)
    q.set_defaults(func=cmd_parse)

    q = sub.add_parser("add-loss", help="splice loss taps into internal connections")
    q.add_argument("input")
    q.add_argument("--theta", required=True, help="loss parameter: symbol name or number")
    q.add_argument("--exclude", action="append", metavar="X.outI>Y.inJ")
    q.add_argument("--override", action="append", metavar="X.outI>Y.inJ=THETA")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_add_loss)

    q = sub.add_parser("to-gj", help="convert a netlist to a circuit term")
    q.add_argument("input")
    q.add_argument("--trace", action="store_true", help="also print the step table")
    q.add_argument("--ascii", action="store_true")
    q.add_argument("-o", "--output")
    lib_opt(q)
    q.set_defaults(func=cmd_to_gj)

    q = sub.add_parser("reduce", help="reduce a netlist or term to one SLH triple")
    q.add_argument("input", help=".pnl file, term file, or term text")
    q.add_argument("--netlist", help="declarations for a term input")
    q.add_argument("--format", choices=("text", "json"), default="text")
    q.add_argument("--simplify", action="store_true", help="simplify scalar coefficients")
    q.add_argument("--ascii", action="store_true")
    q.add_argument("-o", "--output")
    lib_opt(q)
    q.set_defaults(func=cmd_reduce)

    q = sub.add_parser("simulate", help="integrate the master equation of an SLH JSON model")
    q.add_argument("input")
    q.add_argument("--config", help="JSON document with t_final, dt, bindings, observables, ...")
    q.add_argument("--bind", action="append", metavar="NAME=VALUE")
    q.add_argument("--t-final", type=float)
    q.add_argument("--dt", type=float)
    q.add_argument("--method", choices=("rk4", "adaptive-rk45"))
    q.add_argument("--fidelity", metavar="STATE", help='e.g. "Q1=0,Q2=0 + Q1=1,Q2=1"')
    q.add_argument("--init", metavar="STATE", help="initial state (defaults to the fidelity state)")
    q.add_argument("--observable", action="append", metavar="NAME=OPERATOR")
    q.add_argument("--dim", action="append", metavar="LABEL=N", help="boson truncation")
    q.add_argument("--save-every", type=int)
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("fixture", help="write a bundled fixture (netlists, bit-flip model)")
    q.add_argument("name", help="bitflip, list, or a bundled file name")
    q.add_argument("--alpha", default="alpha")
    q.add_argument("--omega", default="Omega")
    q.add_argument("--theta", default="0")
    q.add_argument("--gamma")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_fixture)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"slhflow: error: {exc}", file=sys.stderr)
        return 1
    except USER_ERRORS as exc:
        print(f"slhflow: error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - last-resort guard for the exit-code contract
        traceback.print_exc()
        return 2


run = main

if __name__ == "__main__":
    sys.exit(main())
