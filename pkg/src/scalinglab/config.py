"""YAML run configurations: schema, validation and construction of library objects.

The grammar is documented in ``docs/config.md``.  Every field has a default
except the model and the named test functions a command needs; unknown keys
are rejected.  :func:`load_config` returns a validated :class:`RunConfig`, and
``build_*`` helpers turn its parts into package objects.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import curved
from ._momentum import QuadratureOptions
from .errors import ConfigError, DomainError
from .rgflow import AutoNormalized, PowerLaw, ScalingOrbit, Tabulated
from .scalinglimit import LambdaSequence, Thresholds
from .spectral import Density, ModelSpec, SpectralMeasure
from .testfn import TestFunction, boost_matrix, conj, scale, translate

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Complex = Union[float, tuple[float, float]]


def _complex(v):
    return complex(*v) if isinstance(v, (tuple, list)) else complex(v)


class DensityConfig(_Strict):
    m_lo: float = Field(ge=0)
    m_hi: float = Field(gt=0)
    a: float = 0.0
    eps: float = Field(0.0, ge=0, lt=1)
    tau: float = Field(4.0, gt=1)
    m_ref: float = Field(1.0, gt=0)
    m_cut: Optional[float] = Field(None, gt=0)
    nodes: int = Field(128, ge=4)
    rule: Literal["gl", "log-gl"] = "gl"


class ModelConfig(_Strict):
    dim: Literal[2, 3, 4] = 4
    atoms: list[tuple[float, float]] = Field(default_factory=list)
    density: Optional[DensityConfig] = None
    label: str = ""

    @model_validator(mode="after")
    def _nonempty(self):
        if not self.atoms and self.density is None:
            raise ValueError("model needs at least one atom or a density")
        return self


class TermConfig(_Strict):
    coeff: Complex
    index: list[int]


class FunctionConfig(_Strict):
    """A Gaussian packet, or a transformed copy of another named function."""

    center: Optional[list[float]] = None
    widths: Optional[list[float]] = None
    modulation: Optional[list[float]] = None
    amplitude: Complex = 1.0
    poly: list[TermConfig] = Field(default_factory=list)
    real_part: bool = False
    source: Optional[str] = Field(None, alias="from")
    translate: Optional[list[float]] = None
    scale: Optional[float] = Field(None, gt=0)

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _shape(self):
        if self.source is None and (self.center is None or self.widths is None):
            raise ValueError("a packet needs 'center' and 'widths' (or 'from' another function)")
        if self.source is not None and (self.center is not None or self.widths is not None):
            raise ValueError("'from' cannot be combined with 'center'/'widths'")
        return self


class RenormConfig(_Strict):
    kind: Literal["auto", "power_law", "tabulated"] = "auto"
    reference: Optional[str] = None
    c: float = Field(1.0, gt=0)
    delta: float = 0.0
    lambdas: list[float] = Field(default_factory=list)
    values: list[float] = Field(default_factory=list)


class SequenceConfig(_Strict):
    lambda0: float = Field(1.0, gt=0)
    ratio: float = Field(0.5, gt=0, lt=1)
    length: int = Field(10, ge=6)
    phase: float = Field(0.0, ge=0, lt=1)


class ToleranceConfig(_Strict):
    conv: float = Field(1e-4, gt=0)
    triv: float = Field(1e-3, gt=0)
    deg: float = Field(1e-2, gt=0)


class QuadratureConfig(_Strict):
    radial_nodes: int = Field(256, ge=8)
    theta_nodes: int = Field(4, ge=1)
    phi_nodes: int = Field(8, ge=1)
    rtol: float = Field(1e-10, gt=0)
    max_refinements: int = Field(3, ge=0)
    tail_efolds: float = Field(45.0, gt=0)


class EmtConfig(_Strict):
    function: str
    lambdas: list[float] = Field(default_factory=lambda: [1.0, 0.1, 0.01])
    axes: Optional[list[int]] = None
    quantile: float = Field(0.9, gt=0, lt=1)
    radius_lambdas: list[float] = Field(default_factory=lambda: [1.0, 0.3, 0.1, 0.03, 0.01])
    radius_function: Optional[str] = None


class SpacetimeConfig(_Strict):
    kind: Literal["minkowski", "de_sitter", "power_law"] = "minkowski"
    dim: Literal[3, 4] = 4
    H: float = Field(1.0, gt=0)
    s: float = 1.0


class StabilityConfig(_Strict):
    spacetime: SpacetimeConfig = SpacetimeConfig()
    base: list[float]
    boost_rapidity: float = 0.3
    log_modulation: float = Field(0.0, ge=0, lt=1)
    probes: list[tuple[list[float], list[float]]]
    sequence: SequenceConfig = SequenceConfig(lambda0=0.32, ratio=0.5, length=6)
    tol: float = Field(1e-2, gt=0)


class OutputConfig(_Strict):
    dir: str = "out"


class RunConfig(_Strict):
    schema_version: Literal[1] = 1
    model: Optional[ModelConfig] = None
    functions: dict[str, FunctionConfig] = Field(default_factory=dict)
    renorm: RenormConfig = RenormConfig()
    probes: list[tuple[str, str]] = Field(default_factory=list)
    sequences: list[SequenceConfig] = Field(default_factory=lambda: [SequenceConfig()])
    tolerances: ToleranceConfig = ToleranceConfig()
    quadrature: QuadratureConfig = QuadratureConfig()
    emt: Optional[EmtConfig] = None
    stability: Optional[StabilityConfig] = None
    output: OutputConfig = OutputConfig()

    @field_validator("sequences")
    @classmethod
    def _distinct_phases(cls, seqs):
        if not seqs:
            raise ValueError("at least one sequence is required")
        phases = [s.phase for s in seqs]
        if len(set(phases)) != len(phases):
            raise ValueError("sequence phases must be distinct")
        return seqs

    @model_validator(mode="after")
    def _references(self):
        names = set(self.functions)
        for i, (f, g) in enumerate(self.probes):
            for n in (f, g):
                if n not in names:
                    raise ValueError(f"probes[{i}] names unknown function {n!r}")
        for n, fc in self.functions.items():
            if fc.source is not None and fc.source not in names:
                raise ValueError(f"functions.{n}.from names unknown function {fc.source!r}")
        if self.renorm.reference is not None and self.renorm.reference not in names:
            raise ValueError(f"renorm.reference names unknown function {self.renorm.reference!r}")
        if self.emt is not None:
            for key in ("function", "radius_function"):
                n = getattr(self.emt, key)
                if n is not None and n not in names:
                    raise ValueError(f"emt.{key} names unknown function {n!r}")
        return self

    def digest(self):
        """SHA-256 of the canonical JSON form of the validated configuration."""
        blob = json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _format_loc(loc):
    return ".".join(str(p) for p in loc) or "<root>"


def parse_config(data):
    """Validate a parsed YAML mapping; raises :class:`ConfigError` with field locations."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping at top level", "<root>")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        lines = [f"{_format_loc(e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines), _format_loc(exc.errors()[0]["loc"])) from None


def load_config(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"YAML syntax error at {where}: {exc.problem}", where) from None
    return parse_config(data)


def _located(where):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except DomainError as exc:
                raise ConfigError(f"{where}: {exc}", where) from None

        return inner

    return wrap


def build_model(cfg):
    if cfg.model is None:
        raise ConfigError("model: this command needs a model", "model")

    @_located("model")
    def make():
        m = cfg.model
        density = None if m.density is None else Density(**m.density.model_dump())
        return ModelSpec(m.dim, SpectralMeasure(m.dim, tuple(m.atoms), density), m.label)

    return make()


def build_functions(cfg, dim):
    built = {}

    def make(name, stack=()):
        if name in built:
            return built[name]
        if name in stack:
            raise ConfigError(f"functions.{name}: circular 'from' reference", f"functions.{name}")
        fc = cfg.functions[name]
        where = f"functions.{name}"

        @_located(where)
        def construct():
            if fc.source is not None:
                f = make(fc.source, stack + (name,))
            else:
                if len(fc.center) != dim:
                    raise DomainError(f"center must have {dim} components")
                poly = {tuple(t.index): _complex(t.coeff) for t in fc.poly} or None
                f = TestFunction.gaussian(fc.center, fc.widths, fc.modulation, _complex(fc.amplitude), poly)
            if fc.real_part:
                f = (f + conj(f)) * 0.5
            if fc.scale is not None:
                f = scale(f, fc.scale)
            if fc.translate is not None:
                f = translate(f, fc.translate)
            return f

        built[name] = construct()
        return built[name]

    for n in cfg.functions:
        make(n)
    return built


def build_renorm(cfg, functions):
    r = cfg.renorm

    @_located("renorm")
    def make():
        if r.kind == "power_law":
            return PowerLaw(r.c, r.delta)
        if r.kind == "tabulated":
            return Tabulated(tuple(r.lambdas), tuple(r.values))
        return None if r.reference is None else AutoNormalized(functions[r.reference])

    return make()


def build_probes(cfg, functions, renorm):
    if not cfg.probes:
        raise ConfigError("probes: at least one probe pair is required", "probes")
    orbits = {}

    def orbit(name):
        if name not in orbits:
            orbits[name] = _located(f"functions.{name}")(ScalingOrbit)(functions[name], renorm)
        return orbits[name]

    return [(orbit(f), orbit(g)) for f, g in cfg.probes]


def build_sequences(cfg):
    return [LambdaSequence(**s.model_dump()) for s in cfg.sequences]


def build_thresholds(cfg):
    return Thresholds(**cfg.tolerances.model_dump())


def build_options(cfg):
    q = cfg.quadrature
    return QuadratureOptions(q.radial_nodes, q.theta_nodes, q.phi_nodes, q.rtol, 1e-300, q.max_refinements, q.tail_efolds)


def build_stability(cfg):
    s = cfg.stability
    if s is None:
        raise ConfigError("stability: this command needs a 'stability' section", "stability")

    @_located("stability")
    def make():
        st = curved.SpacetimeModel(**s.spacetime.model_dump())
        charts = (curved.NormalChart(st, tuple(s.base)), curved.NormalChart(st, tuple(s.base), boost_matrix(st.dim, s.boost_rapidity)))
        state = curved.CurvedTwoPoint(st, s.log_modulation)
        probes = [(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) for x, y in s.probes]
        return state, charts, probes, LambdaSequence(**s.sequence.model_dump())

    return make()
