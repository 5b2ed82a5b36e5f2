"""Run configuration: JSON documents validated against a published schema."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from .designer import DesignOptions
from .engine import MplcGeometry
from .fiber import FiberSpec
from .optics import Grid

SCHEMA_TAG = "mplcq-config/1"

_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "mplcq experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_TAG},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output_dir": {"type": ["string", "null"]},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nx": {"type": "integer", "minimum": 16, "multipleOf": 2},
                "ny": {"type": "integer", "minimum": 16, "multipleOf": 2},
                "pitch": _pos,
                "wavelength": _pos,
                "plane_count": _posint,
                "plane_spacing": _pos,
                "output_distance": {"type": ["number", "null"], "minimum": 0},
            },
        },
        "spots": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"waist": _pos, "spacing": _pos, "per_column": _posint},
        },
        "designer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iterations": _posint,
                "min_iterations": _posint,
                "angle_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "mode_weights": {"type": ["array", "null"], "items": _pos},
                "convergence_tolerance": {"type": "number", "minimum": 0},
                "phase_free": {"type": "boolean"},
                "dark_floor": {"type": "number", "minimum": 0},
                "band_target": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "rebalance": {"type": "number", "minimum": 0, "maximum": 1},
                "max_modes": _posint,
                "correct_phases": {"type": "boolean"},
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "task": {"enum": ["identity", "dft", "haar"]},
                "d": {"type": "integer", "minimum": 2, "maximum": 8},
                "modes": {"type": "integer", "minimum": 2},
                "haar_count": _posint,
                "planes": {"type": "array", "items": _posint, "minItems": 1},
                "samples_per_point": _posint,
                "scan_samples": {"type": "integer", "minimum": 8},
                "conjugated_mub": {"type": "boolean"},
                "mub_rebalance": {"type": "number", "minimum": 0, "maximum": 1},
                "domain": {"enum": ["distinct", "all-pairs"]},
                "statistics": {"enum": ["indistinguishable-bosons", "distinguishable"]},
                "pt_threshold": _pos,
            },
        },
        "fiber": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "core_radius": _pos,
                "numerical_aperture": _pos,
                "wavelength": _pos,
                "render_scale": _pos,
                "lp11_orientation": {"enum": ["cos", "sin"]},
            },
        },
    },
}


@dataclass
class SpotLayout:
    waist: float = 120e-6
    spacing: float = 480e-6
    per_column: int = 4


@dataclass
class ExperimentParams:
    task: str = "identity"
    d: int = 2
    modes: int = 4
    haar_count: int = 50
    planes: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 6, 8, 10])
    samples_per_point: int = 20
    scan_samples: int = 24
    conjugated_mub: bool = True
    # rebalancing step for the certification designs: a MUB is defined by equal
    # magnitudes, which plain wavefront matching does not enforce
    mub_rebalance: float = 0.5
    domain: str = "distinct"
    statistics: str = "indistinguishable-bosons"
    pt_threshold: float = 0.1


@dataclass
class FiberParams:
    core_radius: float = 25e-6
    numerical_aperture: float = 0.2
    wavelength: float = 808e-9
    render_scale: float = 10.0
    lp11_orientation: str = "cos"


@dataclass
class GeometryParams:
    nx: int = 256
    ny: int = 256
    pitch: float = 12.5e-6
    wavelength: float = 810e-9
    plane_count: int = 5
    plane_spacing: float = 76e-3
    output_distance: float | None = None


@dataclass
class ExperimentConfig:
    geometry: GeometryParams = field(default_factory=GeometryParams)
    spots: SpotLayout = field(default_factory=SpotLayout)
    designer: dict = field(default_factory=dict)
    experiment: ExperimentParams = field(default_factory=ExperimentParams)
    fiber: FiberParams = field(default_factory=FiberParams)
    seed: int = 1
    output_dir: str | None = None

    def to_dict(self):
        d = asdict(self)
        d["designer"] = self.design_options().to_dict()
        return {"schema": SCHEMA_TAG, **d}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw):
        raw = copy.deepcopy(raw)
        jsonschema.validate(raw, CONFIG_SCHEMA)
        raw.pop("schema", None)
        cfg = cls(
            geometry=GeometryParams(**raw.get("geometry", {})),
            spots=SpotLayout(**raw.get("spots", {})),
            designer=dict(raw.get("designer", {})),
            experiment=ExperimentParams(**raw.get("experiment", {})),
            fiber=FiberParams(**raw.get("fiber", {})),
            seed=raw.get("seed", 1),
            output_dir=raw.get("output_dir"),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def grid(self):
        g = self.geometry
        return Grid(g.nx, g.ny, g.pitch)

    def mplc_geometry(self, plane_count=None):
        g = self.geometry
        return MplcGeometry(
            self.grid(), g.wavelength, plane_count or g.plane_count, g.plane_spacing, g.output_distance
        )

    def design_options(self):
        opts = dict(self.designer)
        if opts.get("mode_weights") is not None:
            opts["mode_weights"] = tuple(opts["mode_weights"])
        return DesignOptions(**opts)

    def fiber_spec(self):
        f = self.fiber
        return FiberSpec(f.core_radius, f.numerical_aperture, f.wavelength, f.render_scale)

    def validate(self):
        """Check module preconditions up front; raises ValueError."""
        from .optics import spot_basis

        self.mplc_geometry()
        self.design_options()
        self.fiber_spec()
        e = self.experiment
        n_max = max(2 * e.d, e.modes)
        if n_max > self.design_options().max_modes:
            raise ValueError(f"{n_max} modes exceed the designer capacity bound")
        if self.spots.waist < 2 * self.geometry.pitch:
            raise ValueError("spot waist is under-resolved by the grid pitch")
        spot_basis(self.grid(), n_max, self.spots.waist, self.spots.spacing, self.spots.per_column)
        if e.samples_per_point < 1 or e.haar_count < 1:
            raise ValueError("sample counts must be positive")


def default_config():
    return ExperimentConfig()
