"""Experiment configuration: defaults, desk-scale presets, JSON round
trip and validation."""

from __future__ import annotations

import hashlib
import json

from dataclasses import asdict, dataclass, replace

from .acoustics import FrequencyGrid
from .compensator import LossWeights, TrainConfig
from .datasets import SourceSplit, gen_sources_circular, gen_sources_linear
from .geometry import (
    ArrayGeometry,
    ListeningArea,
    PointSet,
    decimate_array,
    make_circular_array,
    make_linear_array,
    sample_control_points,
    sample_listening_grid,
)
from .network import compensator_layers

SCHEMA_VERSION = 1

# the linear listening rectangle sits at this offset range behind the
# array plane and spans 2 m in both directions
LINEAR_RECT_NEAR = 0.2
LINEAR_RECT_FAR = 2.2
LINEAR_RECT_HALF_HEIGHT = 1.0
# linear source region on the far side of the array
LINEAR_SRC_NEAR = 0.2
LINEAR_SRC_FAR = 2.2
LINEAR_SRC_HALF_HEIGHT = 2.0


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    family: str = "circular"
    methods: tuple = ("mr", "pm", "cnn")
    # array
    n_loudspeakers: int = 64
    array_radius: float = 1.0        # circular
    array_spacing: float = 0.0625    # linear
    array_x0: float = 1.0            # linear
    n_remove: int = 32
    decimation_seed: int = 97
    # listening / control geometry
    listening_spacing: float = 0.02
    listening_radius: float = 1.0    # circular disk radius
    control_target: int = 276
    # frequency grid
    freq_start: float = 46.0
    freq_step: float = 23.0
    freq_count: int = 63
    speed_of_sound: float = 343.0
    # least-squares regularization (pressure matching and linear filters)
    lam: float = 1e-2
    # sources
    source_seed: int = 11
    test_shift: float = 0.05
    n_radii: int = 20                # circular protocol
    n_angles: int = 128
    source_radius_min: float = 1.5
    source_radius_max: float = 3.5
    val_count: int = 512
    n_test: int | None = None        # None: shift every train+val source
    n_train_linear: int = 2000       # linear protocol
    n_val_linear: int = 500
    n_test_linear: int = 2500
    # loss and training
    lambda_abs: float = 25.0
    lambda_phase: float = 1.0
    learning_rate: float = 1e-4
    max_epochs: int = 5000
    patience: int = 100
    batch_size: int = 32
    train_seed: int = 3
    # evaluation artifacts
    n_radius_bins: int = 10
    fig_frequency: float = 1007.0
    fig_source: tuple = (0.72, 1.37)

    # -- derived objects -----------------------------------------------------

    def freq_grid(self) -> FrequencyGrid:
        return FrequencyGrid.uniform(self.freq_start, self.freq_step,
                                     self.freq_count, c=self.speed_of_sound)

    def full_array(self) -> ArrayGeometry:
        if self.family == "circular":
            return make_circular_array(self.n_loudspeakers, self.array_radius)
        return make_linear_array(self.n_loudspeakers, self.array_spacing,
                                 self.array_x0)

    def array(self) -> ArrayGeometry:
        return decimate_array(self.full_array(), self.n_remove,
                              self.decimation_seed)

    def listening_area(self) -> ListeningArea:
        if self.family == "circular":
            return ListeningArea.disk((0.0, 0.0), self.listening_radius,
                                      self.listening_spacing)
        x0 = self.array_x0
        return ListeningArea.rectangle(x0 - LINEAR_RECT_FAR,
                                       x0 - LINEAR_RECT_NEAR,
                                       -LINEAR_RECT_HALF_HEIGHT,
                                       LINEAR_RECT_HALF_HEIGHT,
                                       self.listening_spacing)

    def listening_grid(self) -> PointSet:
        return sample_listening_grid(self.listening_area())

    def control_points(self, array: ArrayGeometry | None = None) -> PointSet:
        return sample_control_points(self.listening_area(),
                                     self.control_target,
                                     clearance_from=array or self.full_array())

    def mr_listening_radius(self) -> float:
        """Radius bounding the listening area, used by the modal
        truncation rule."""
        area = self.listening_area()
        if area.kind == "disk":
            return float(area.radius)
        return area.bounding_radius

    def source_region_linear(self) -> tuple:
        x0 = self.array_x0
        return (x0 + LINEAR_SRC_NEAR, x0 + LINEAR_SRC_FAR,
                -LINEAR_SRC_HALF_HEIGHT, LINEAR_SRC_HALF_HEIGHT)

    def source_split(self) -> SourceSplit:
        if self.family == "circular":
            return gen_sources_circular(
                self.n_radii, self.n_angles,
                (self.source_radius_min, self.source_radius_max),
                self.test_shift, self.source_seed,
                val_count=self.val_count, n_test=self.n_test)
        return gen_sources_linear(
            self.n_train_linear, self.n_val_linear, self.n_test_linear,
            self.source_region_linear(), self.test_shift, self.source_seed,
            x0=self.array_x0)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate,
                           max_epochs=self.max_epochs, patience=self.patience,
                           batch_size=self.batch_size, seed=self.train_seed)

    def loss_weights(self) -> LossWeights:
        return LossWeights(lambda_abs=self.lambda_abs,
                           lambda_phase=self.lambda_phase)

    # -- validation / serialization ------------------------------------------

    def validate(self) -> None:
        if self.family not in ("circular", "linear"):
            raise ValueError(f"unknown family {self.family!r}")
        unknown = set(self.methods) - {"mr", "pm", "cnn"}
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if not 0 <= self.n_remove < self.n_loudspeakers:
            raise ValueError("n_remove must be in [0, L)")
        if self.freq_count < 1:
            raise ValueError("need at least one frequency")
        l_active = self.n_loudspeakers - self.n_remove
        if "cnn" in self.methods:
            # raises with a size diagnosis when the geometry cannot feed
            # the network
            compensator_layers(2 * l_active, self.freq_count)
            self.train_config()
        self.loss_weights()
        if self.family == "circular":
            if self.source_radius_min <= self.listening_radius:
                raise ValueError("sources must lie outside the listening disk")
            if self.source_radius_min <= self.array_radius:
                raise ValueError("sources must lie outside the array")
        self.listening_area()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["fig_source"] = list(self.fig_source)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema version {version}")
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        if "fig_source" in d:
            d["fig_source"] = tuple(d["fig_source"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def full_config(family: str = "circular") -> ExperimentConfig:
    """Full-scale defaults for either array family."""
    if family == "circular":
        return ExperimentConfig()
    return replace(ExperimentConfig(), family="linear", control_target=660,
                   test_shift=0.08, fig_source=(1.08, 1.10))


def desk_config(family: str = "circular") -> ExperimentConfig:
    """Small setup that runs end to end on a desktop CPU in minutes."""
    base = full_config(family)
    common = dict(
        n_loudspeakers=16, n_remove=8, freq_count=15, control_target=72,
        max_epochs=300, patience=40, n_radius_bins=8,
    )
    if family == "circular":
        return replace(base, listening_radius=0.8, listening_spacing=0.04,
                       n_radii=20, n_angles=16, val_count=64, n_test=64,
                       **common)
    return replace(base, array_spacing=0.25, listening_spacing=0.05,
                   n_train_linear=96, n_val_linear=24, n_test_linear=48,
                   **common)


def load_config(path, scale: str | None = None,
                family: str | None = None) -> ExperimentConfig:
    """Build a config from an optional JSON file over an optional preset.

    Keys present in the file override the preset; the file may be
    partial.  The preset family comes from the explicit argument, else
    the file, else circular.
    """
    overrides = {}
    if path is not None:
        with open(path) as fh:
            overrides = json.load(fh)
    maker = desk_config if scale == "desk" else full_config
    base = maker(family or overrides.get("family", "circular"))
    merged = base.to_dict()
    merged.update(overrides)
    cfg = ExperimentConfig.from_dict(merged)
    cfg.validate()
    return cfg
