"""Seeded synthetic registration trials and the ground-handling ablation."""

from __future__ import annotations

import configparser
import dataclasses
from typing import NamedTuple, Optional

import numpy as np

from .config import derive_seed, load_config, profile_path
from .errors import ConfigError, GeocorrError
from .evaluation import pose_errors
from .registration import register_pair
from .synth_harness import SceneSpec, generate_scene, make_pair, random_planar_transform

# (name, remove_ground, ground_weighting)
VARIANTS = (
    ("baseline", False, False),
    ("weighting", False, True),
    ("removal", True, False),
    ("removal+weighting", True, True),
)

BENCH_COLUMNS = ["trial", "variant", "seed", "success", "rotation_error_deg",
                 "translation_error_m", "inlier_count", "match_count", "inlier_ratio",
                 "status"]


class TrialResult(NamedTuple):
    trial: int
    variant: str
    seed: int
    rotation_error: Optional[float]
    translation_error: Optional[float]
    inlier_count: int
    match_count: int
    status: str
    success: bool

    @property
    def inlier_ratio(self):
        return self.inlier_count / self.match_count if self.match_count else 0.0


def synthetic_config(**overrides):
    """Defaults plus the bundled ``synthetic_scene`` profile, then ``overrides``."""
    return load_config(profile=profile_path("synthetic_scene")).replace(**overrides)


def trial_pair(spec, trial, max_yaw=np.pi, max_translation=5.0):
    seed = derive_seed(spec.seed, f"trial-{trial}") % (2 ** 32)
    tspec = dataclasses.replace(spec, seed=seed)
    scene = generate_scene(tspec)
    T = random_planar_transform(np.random.default_rng([seed, 7]), max_yaw, max_translation)
    return seed, make_pair(scene, T, tspec)


def run_trial(pair, config, trial=0, seed=0, variant="default"):
    rot_thr, trans_thr = config.success_rotation_deg, config.success_translation_m
    try:
        result = register_pair(pair.cloudA, pair.cloudB, config)
    except GeocorrError as exc:
        return TrialResult(trial, variant, seed, None, None, 0, 0,
                           type(exc).__name__, False)
    rot, trans = pose_errors(result.transform, pair.T_gt)
    return TrialResult(trial, variant, seed, rot, trans, result.inlier_count,
                       result.match_count, "ok", rot < rot_thr and trans < trans_thr)


def run_trials(spec, trials, config, variants=None, max_yaw=np.pi):
    """Run ``trials`` seeded pairs through each ``(name, removal, weighting)`` variant."""
    variants = VARIANTS if variants is None else variants
    rows = []
    for trial in range(trials):
        seed, pair = trial_pair(spec, trial, max_yaw)
        for name, removal, weighting in variants:
            cfg = config.replace(remove_ground=removal, ground_weighting=weighting)
            rows.append(run_trial(pair, cfg, trial, seed, name))
    return rows


def summarize(rows):
    """Per-variant success rate (%), RME/TME over successes, median errors."""
    out = {}
    for name in dict.fromkeys(r.variant for r in rows):
        sub = [r for r in rows if r.variant == name]
        good = [r for r in sub if r.success]
        rot = [r.rotation_error if r.rotation_error is not None else np.inf for r in sub]
        trans = [r.translation_error if r.translation_error is not None else np.inf for r in sub]
        out[name] = {
            "trials": len(sub),
            "success_rate": 100.0 * len(good) / len(sub),
            "rme_deg": float(np.mean([r.rotation_error for r in good])) if good else None,
            "tme_m": float(np.mean([r.translation_error for r in good])) if good else None,
            "median_rotation_error_deg": float(np.median(rot)),
            "median_translation_error_m": float(np.median(trans)),
            "mean_inlier_ratio": float(np.mean([r.inlier_ratio for r in sub])),
        }
    return out


SPEC_FIELDS = {f.name: f.type for f in dataclasses.fields(SceneSpec)}


def load_scene_spec(path):
    """Read a ``[scene]`` INI section into a :class:`SceneSpec`."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not parser.has_section("scene"):
        raise ConfigError(f"{path}: missing [scene] section")
    values = {}
    for key, raw in parser.items("scene"):
        if key not in SPEC_FIELDS:
            raise ConfigError(f"{path}: unknown scene key {key}")
        kind = SPEC_FIELDS[key]
        try:
            values[key] = int(raw) if "int" in str(kind) else float(raw)
        except ValueError:
            raise ConfigError(f"{path}: cannot parse {key}={raw!r}") from None
    try:
        return SceneSpec(**values)
    except GeocorrError as exc:
        raise ConfigError(f"{path}: {exc}") from None
