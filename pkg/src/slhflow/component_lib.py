"""Component library: netlist type paths -> parameterized SLH models."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Mapping

import sympy as sp

from .netlist import ComponentDecl, Netlist
from .slh_core import OperatorExpr, identity, op, parse_operator, symbol
from .slh_reduce import SLHTriple, identity_slh, perm_slh

__all__ = [
    "LibraryError",
    "ParamSpec",
    "ComponentModel",
    "ComponentLibrary",
    "default_library",
    "load_manifest",
    "PHOTONICS",
]

PHOTONICS = "Photonics.Components"


class LibraryError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    """``kind`` is one of ``scalar`` (symbol or number), ``int``, ``enum``,
    ``label`` (a Hilbert-space label) or ``word`` (free identifier)."""

    kind: str = "scalar"
    default: object = None
    required: bool = False
    choices: tuple = ()


@dataclass(frozen=True)
class ComponentModel:
    type_path: str
    params: Mapping[str, ParamSpec]
    build: Callable[[dict, str], SLHTriple]
    arity: Callable[[dict], tuple[int, int]]
    ancillas: int = 0
    space_kind: str | None = None  # kind of the label this component owns
    doc: str = ""

    def resolve_params(self, decl: ComponentDecl) -> dict:
        given = decl.param_dict
        unknown = set(given) - set(self.params)
        if unknown:
            raise LibraryError(f"{decl.instance}: unknown parameter(s) {sorted(unknown)} for {self.type_path}")
        out = {}
        for name, spec in self.params.items():
            if name not in given:
                if spec.required:
                    raise LibraryError(f"{decl.instance}: missing parameter {name}")
                out[name] = _convert(spec, spec.default, decl, name) if spec.default is not None else None
                continue
            out[name] = _convert(spec, given[name], decl, name)
        return out

    def label_for(self, decl: ComponentDecl, params: dict) -> str:
        return params.get("HilbertSpace") or decl.instance


def _convert(spec: ParamSpec, value, decl, name):
    if spec.kind == "scalar":
        if isinstance(value, sp.Basic):
            return value
        if isinstance(value, str):
            return symbol(value) if value.isidentifier() else sp.sympify(value)
        return sp.nsimplify(value) if isinstance(value, int) else sp.Float(value)
    if spec.kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise LibraryError(f"{decl.instance}: parameter {name} must be an integer")
        return value
    if spec.kind == "enum":
        if value not in spec.choices:
            raise LibraryError(f"{decl.instance}: {name}={value} not in {list(spec.choices)}")
        return value
    if spec.kind in ("label", "word"):
        if not isinstance(value, str):
            raise LibraryError(f"{decl.instance}: parameter {name} must be an identifier")
        return value
    raise LibraryError(f"unknown parameter kind {spec.kind}")


class ComponentLibrary:
    """Immutable mapping of type paths to models; :meth:`register` returns a
    new library."""

    def __init__(self, models: Mapping[str, ComponentModel] | None = None):
        self._models = dict(models or {})

    def __contains__(self, type_path):
        return type_path in self._models

    def __iter__(self):
        return iter(self._models)

    def model(self, type_path: str) -> ComponentModel:
        try:
            return self._models[type_path]
        except KeyError:
            raise LibraryError(f"unknown component type {type_path!r}") from None

    def register(self, model: ComponentModel) -> "ComponentLibrary":
        if model.type_path in self._models:
            raise LibraryError(f"type path {model.type_path!r} already registered")
        return ComponentLibrary({**self._models, model.type_path: model})

    def arity(self, decl: ComponentDecl) -> tuple[int, int]:
        m = self.model(decl.type_path)
        return m.arity(m.resolve_params(decl))

    def instantiate(self, decl: ComponentDecl) -> SLHTriple:
        m = self.model(decl.type_path)
        params = m.resolve_params(decl)
        slh = m.build(params, m.label_for(decl, params))
        n_in, n_out = m.arity(params)
        if (slh.n_in, slh.n_out) != (n_in, n_out):
            raise LibraryError(f"{m.type_path} built an SLH with the wrong arity")
        if slh.n_anc:
            slh = SLHTriple(
                slh.S, slh.L, slh.H,
                tuple((decl.instance, n_in + k + 1, n_out + k + 1) for k in range(slh.n_anc)),
            )
        return slh

    def instantiate_all(self, nl: Netlist) -> dict[str, SLHTriple]:
        return {d.instance: self.instantiate(d) for d in nl.decls}

    def space_kinds(self, nl: Netlist) -> dict[str, str]:
        """Hilbert-space kinds claimed by the netlist's components."""
        out = {}
        for d in nl.decls:
            m = self.model(d.type_path)
            if m.space_kind:
                out[m.label_for(d, m.resolve_params(d))] = m.space_kind
        return out


# ---------------------------------------------------------------------------
# built-in models


def _rotation(theta) -> tuple:
    c, s = sp.cos(theta), sp.sin(theta)
    return ((c, -s), (s, c))


def _fixed(n_in, n_out):
    return lambda params: (n_in, n_out)


def _coherent_field(p, label):
    return SLHTriple(((1,),), (OperatorExpr.from_scalar(p["Amplitude"]),), 0)


def _single_cavity(p, label):
    # post-limit qubit-conditioned reflector
    return SLHTriple(((op("Z", label),),), (0,), 0)


def _loss(p, label):
    return SLHTriple(_rotation(p["LossParam"]), (0, 0), 0, (("", 2, 2),))


def _beamsplitter(p, label):
    return SLHTriple(_rotation(p["Theta"]), (0, 0), 0)


def _phase(p, label):
    return SLHTriple(((sp.exp(sp.I * p["Phi"]),),), (0,), 0)


def _identity(p, label):
    return identity_slh(p["Lines"])


def _parse_order(word: str) -> tuple[int, ...]:
    # Order=p2_1_3 encodes the permutation (2,1,3)
    if not word.startswith("p"):
        raise LibraryError(f"permutation order {word!r} must look like p2_1_3")
    try:
        return tuple(int(x) for x in word[1:].split("_"))
    except ValueError:
        raise LibraryError(f"bad permutation order {word!r}") from None


def _permutation(p, label):
    return perm_slh(_parse_order(p["Order"]))


def _relay(p, label):
    # two-port set/reset relay fixture: set light drives R -> 1, reset light R -> 0
    g = sp.sqrt(p["Rate"])
    return SLHTriple(((1, 0), (0, 1)), (g * op("sp", label), g * op("sm", label)), 0)


RELAY_MODEL = ComponentModel(
    f"{PHOTONICS}.Relay",
    {"Rate": ParamSpec("scalar", "gamma_r"), "HilbertSpace": ParamSpec("label")},
    _relay,
    _fixed(2, 2),
    space_kind="relay",
    doc="set/reset relay fixture",
)


def default_library() -> ComponentLibrary:
    models = [
        ComponentModel(
            f"{PHOTONICS}.CoherentField",
            {"Amplitude": ParamSpec("scalar", required=True)},
            _coherent_field,
            _fixed(1, 1),
            doc="coherent displacement drive (1, alpha, 0)",
        ),
        ComponentModel(
            f"{PHOTONICS}.SingleCavity",
            {
                "CavityType": ParamSpec("enum", "Zprobe", choices=("Zprobe",)),
                "HilbertSpace": ParamSpec("label"),
            },
            _single_cavity,
            _fixed(1, 1),
            space_kind="qubit",
            doc="Zprobe cavity after adiabatic elimination: (Z, 0, 0)",
        ),
        ComponentModel(
            f"{PHOTONICS}.Loss",
            {"LossParam": ParamSpec("scalar", required=True)},
            _loss,
            _fixed(1, 1),
            ancillas=1,
            doc="beam-splitter tap; port 2 is a vacuum input / dangling output",
        ),
        ComponentModel(
            f"{PHOTONICS}.Beamsplitter",
            {"Theta": ParamSpec("scalar", sp.pi / 4)},
            _beamsplitter,
            _fixed(2, 2),
        ),
        ComponentModel(
            f"{PHOTONICS}.Phase",
            {"Phi": ParamSpec("scalar", required=True)},
            _phase,
            _fixed(1, 1),
        ),
        ComponentModel(
            f"{PHOTONICS}.Identity",
            {"Lines": ParamSpec("int", 1)},
            _identity,
            lambda p: (p["Lines"], p["Lines"]),
        ),
        ComponentModel(
            f"{PHOTONICS}.Permutation",
            {"Order": ParamSpec("word", required=True)},
            _permutation,
            lambda p: (len(_parse_order(p["Order"])),) * 2,
        ),
    ]
    return ComponentLibrary({m.type_path: m for m in models})


# ---------------------------------------------------------------------------
# manifest files


def _template_builder(entry: Mapping):
    params = entry.get("params", {})
    S, L, H = entry["S"], entry["L"], entry.get("H", "0")
    cplx = [k for k, v in params.items() if v.get("domain") == "complex"]

    def build(p, label):
        rep = {}
        for name, val in p.items():
            if params.get(name, {}).get("kind", "scalar") == "scalar" and val is not None:
                if name in cplx and isinstance(val, sp.Symbol):
                    val = symbol(val.name, real=False)
                rep[name] = val

        def conv(text):
            e = parse_operator(str(text).replace("[self]", f"[{label}]"), complex_symbols=cplx)
            return e.subs(rep)

        return SLHTriple(
            tuple(tuple(conv(x) for x in row) for row in S),
            tuple(conv(x) for x in L),
            conv(H),
            tuple(("", 0, 0) for _ in range(entry.get("ancillas", 0))),
        )

    return build


def load_manifest(source, lib: ComponentLibrary | None = None) -> ComponentLibrary:
    """Register user components from a JSON manifest (path, file or dict).

    Each entry: ``type_path``, ``n_in``, ``n_out``, optional ``ancillas``,
    ``params`` (name -> {kind, default, required, choices}), and operator
    strings ``S``, ``L``, ``H``.  ``[self]`` in an operator string stands for
    the instance's Hilbert-space label; parameter names act as symbols.
    """
    if isinstance(source, Mapping):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    lib = lib or default_library()
    for entry in data.get("components", []):
        specs = {}
        for name, spec in entry.get("params", {}).items():
            specs[name] = ParamSpec(
                spec.get("kind", "scalar"),
                spec.get("default"),
                spec.get("required", False),
                tuple(spec.get("choices", ())),
            )
        specs.setdefault("HilbertSpace", ParamSpec("label"))
        lib = lib.register(
            ComponentModel(
                entry["type_path"],
                specs,
                _template_builder(entry),
                _fixed(entry["n_in"], entry["n_out"]),
                ancillas=entry.get("ancillas", 0),
                space_kind=entry.get("space_kind"),
                doc=entry.get("doc", ""),
            )
        )
    return lib
