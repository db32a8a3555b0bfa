"""Pipeline configuration: one INI file with sections, one flat dataclass.

Every tunable and its default lives in ``default_config.ini`` next to this
module; :func:`load_config` overlays a user file on top of it.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from typing import Optional

from .correspondence import UotParams
from .errors import ConfigError, GeocorrError
from .ground_model import GroundParams, PatchGrid


def _f(section, default, **kw):
    return field(default=default, metadata={"section": section, **kw})


@dataclass(frozen=True)
class PipelineConfig:
    # [ground]
    num_rings: int = _f("ground", 4)
    num_sectors: int = _f("ground", 16)
    max_range: float = _f("ground", 80.0)
    min_points_per_patch: int = _f("ground", 10)
    uprightness_sharpness: float = _f("ground", 4.0)
    elevation_mean: float = _f("ground", -1.7)
    elevation_sigma: float = _f("ground", 0.3)
    flatness_sigma: float = _f("ground", 0.01)
    ground_prob_threshold: float = _f("ground", 0.5)
    remove_ground: bool = _f("ground", False)
    ground_weighting: bool = _f("ground", True)
    # [features]
    num_keypoints: int = _f("features", 4096)
    descriptor_radius: float = _f("features", 1.0)
    # [uot]
    uot_lambda: float = _f("uot", 0.003)
    uot_rho: float = _f("uot", 1.0)
    uot_max_iters: int = _f("uot", 500)
    uot_tolerance: float = _f("uot", 1e-6)
    # [registration]
    pose_method: str = _f("registration", "ransac")
    ransac_iters: int = _f("registration", 1000)
    inlier_radius: float = _f("registration", 0.6)
    min_weight: Optional[float] = _f("registration", None)
    # [retrieval]
    vocab_size: int = _f("retrieval", 32)
    vocab_max_iters: int = _f("retrieval", 100)
    global_keypoints: int = _f("retrieval", 512)
    global_remove_ground: bool = _f("retrieval", True)
    exclusion_window: int = _f("retrieval", 100)
    # [evaluation]
    positive_radius: float = _f("evaluation", 4.0)
    negative_radius: float = _f("evaluation", 10.0)
    overlap_radius: float = _f("evaluation", 0.5)
    success_rotation_deg: float = _f("evaluation", 5.0)
    success_translation_m: float = _f("evaluation", 2.0)
    error_averaging: str = _f("evaluation", "successful")
    # [run]
    seed: int = _f("run", 0)
    workers: int = _f("run", 1)
    sequence_dir: Optional[str] = _f("run", None, path=True)
    output_dir: Optional[str] = _f("run", None)

    def __post_init__(self):
        try:
            self.grid()
            self.ground_params()
            self.uot_params()
        except GeocorrError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (self.num_keypoints >= 1, "num_keypoints must be >= 1"),
            (self.descriptor_radius > 0, "descriptor_radius must be > 0"),
            (self.pose_method in ("ransac", "svd"), "pose_method must be ransac or svd"),
            (self.ransac_iters >= 1, "ransac_iters must be >= 1"),
            (self.inlier_radius > 0, "inlier_radius must be > 0"),
            (self.min_weight is None or self.min_weight >= 0, "min_weight must be >= 0"),
            (self.vocab_size >= 1, "vocab_size must be >= 1"),
            (self.global_keypoints >= 1, "global_keypoints must be >= 1"),
            (self.exclusion_window >= 0, "exclusion_window must be >= 0"),
            (0 < self.positive_radius <= self.negative_radius,
             "need 0 < positive_radius <= negative_radius"),
            (self.overlap_radius > 0, "overlap_radius must be > 0"),
            (self.error_averaging in ("successful", "all"),
             "error_averaging must be successful or all"),
            (self.workers >= 1, "workers must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        for f in fields(self):
            value = getattr(self, f.name)
            if f.metadata.get("path") and value is not None and not os.path.exists(value):
                raise ConfigError(f"{f.name}: path does not exist: {value}")

    def grid(self):
        return PatchGrid(self.num_rings, self.num_sectors, self.max_range,
                         self.min_points_per_patch)

    def ground_params(self):
        return GroundParams(self.uprightness_sharpness, self.elevation_mean,
                            self.elevation_sigma, self.flatness_sigma,
                            self.ground_prob_threshold)

    def uot_params(self):
        return UotParams(self.uot_lambda, self.uot_rho, self.uot_max_iters,
                         self.uot_tolerance)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_ini(self):
        parser = configparser.ConfigParser()
        for f in fields(self):
            section = f.metadata["section"]
            if not parser.has_section(section):
                parser.add_section(section)
            value = getattr(self, f.name)
            parser.set(section, f.name, "" if value is None else str(value))
        return parser


def derive_seed(master_seed, stage):
    """Per-stage seed: first 8 bytes of sha256("<stage>:<master_seed>")."""
    digest = hashlib.sha256(f"{stage}:{master_seed}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _coerce(f, raw):
    raw = raw.strip()
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if raw == "" or raw.lower() == "none":
        if "Optional" in kind:
            return None
        raise ConfigError(f"{f.name}: value required")
    try:
        if "bool" in kind:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{f.name}: cannot parse {raw!r} as {kind}") from None
    return raw


def default_config_text():
    return resources.files(__package__).joinpath("default_config.ini").read_text()


def parse_config(text, base=None):
    """Overlay INI ``text`` onto ``base`` (defaults when omitted)."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    by_key = {(f.metadata["section"], f.name): f for f in fields(PipelineConfig)}
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            f = by_key.get((section, key))
            if f is None:
                raise ConfigError(f"unknown config key [{section}] {key}")
            values[key] = _coerce(f, raw)
    base = base if base is not None else PipelineConfig()
    return dataclasses.replace(base, **values)


def profile_path(name):
    """Path of a bundled override profile, e.g. ``synthetic_scene``."""
    path = resources.files(__package__).joinpath("profiles", f"{name}.ini")
    if not path.is_file():
        raise ConfigError(f"unknown profile {name!r}")
    return str(path)


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def load_config(path=None, profile=None):
    """Defaults, then an optional profile file, then an optional user file."""
    config = parse_config(default_config_text())
    for layer in (profile, path):
        if layer is not None:
            config = parse_config(_read(layer), config)
    return config
