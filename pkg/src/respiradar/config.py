"""Run configuration files.

A run is described by one INI file whose sections mirror the dataclasses
they populate::

    [radar]                 -> RadarParams
    [array]                 -> tx/rx element positions (metres, optional)
    [scene]                 -> SceneConfig scalars
    [scene.respiration]     -> MotionModel for breathing
    [scene.body_motion]     -> MotionModel for body-motion bursts
    [pipeline]              -> PipelineConfig
    [evaluate]              -> eps_th_list
    [sweep]                 -> parameter grid and seeds

List values are comma separated; point lists (radar positions, clutter)
separate points with ``;``. Every key is optional and falls back to the
dataclass default. Unknown sections or keys are errors, so a typo cannot
silently leave a parameter at its default.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .respiration import PipelineConfig
from .sim_core import ArrayLayout, MotionModel, RadarParams, SceneConfig, build_virtual_array, default_layout

DEFAULT_CONFIG = """\
# Two radars 0.7 m apart watching a breathing target at 6 m that moves
# abruptly about once every 15 s.

[radar]
center_frequency = 79e9
bandwidth = 3.6e9
chirp_duration = 100e-6
fast_time_samples = 256
slow_time_rate = 100
duration = 120

[scene]
target_range = 6.0
target_angle = 80.0
target_rcs_amplitude = 1.0
noise_std = 2.0
seed = 0
radar_positions = -0.35, 0.0; 0.35, 0.0
clutter_scatterers = 4.0, 60, 5.0; 8.0, 120, 8.0; 9.0, 95, 3.0

[scene.respiration]
kind = respiration
amplitude = 2e-3
base_interval = 1.3
interval_drift = 0.2307692307692308
drift_timescale = 10

[scene.body_motion]
kind = transient-bursts
burst_rate = 0.06666666666666667
burst_duration = 2.0
burst_amplitude = 0.1
duration_spread = 0.75

[pipeline]
eta_db = -20
T0 = 2.0
tau_S = 0.8
tau_L = 2.0
tau0 = 2.0
eps_th = 0.5
hop = 0.1

[evaluate]
eps_th_list = 0.5, 0.2

[sweep]
eps_th = 0.5, 0.2
tau0 = 1.5, 2.0, 2.5
seeds = 10
"""

_SCENE_SCALARS = ("target_range", "target_angle", "target_rcs_amplitude", "noise_std", "seed")
SWEEP_KEYS = ("eps_th", "tau0", "eta_db", "T0")


@dataclass(frozen=True)
class RunConfig:
    radar: RadarParams
    scene: SceneConfig
    pipeline: PipelineConfig
    tx_positions: tuple | None = None
    rx_positions: tuple | None = None
    eps_th_list: tuple = (0.5, 0.2)
    sweep_grid: dict = field(default_factory=dict)
    sweep_seeds: tuple = tuple(range(10))

    def layout(self) -> ArrayLayout:
        if self.tx_positions is None and self.rx_positions is None:
            return default_layout(self.radar.wavelength)
        if self.tx_positions is None or self.rx_positions is None:
            raise ConfigError("[array] needs both tx_positions and rx_positions")
        return build_virtual_array(self.tx_positions, self.rx_positions, self.radar.wavelength)

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, scene=dataclasses.replace(self.scene, seed=int(seed)))

    def snapshot(self) -> dict:
        """Plain-data view for manifests."""
        def plain(x):
            if dataclasses.is_dataclass(x):
                return {f.name: plain(getattr(x, f.name)) for f in dataclasses.fields(x)}
            if isinstance(x, (list, tuple)):
                return [plain(v) for v in x]
            if isinstance(x, dict):
                return {k: plain(v) for k, v in x.items()}
            if isinstance(x, np.generic):
                return x.item()
            return x
        return plain(self)


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section:
            k = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            if k.lower() == key.lower():
                return no
    return None


class _Reader:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"),
                                            interpolation=None)
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    def where(self, section, key=None) -> str:
        line = _line_of(self.text, section, key)
        loc = f"{self.source}:{line}" if line else self.source
        return f"{loc}: [{section}]" + (f" {key}" if key else "")

    def fail(self, section, key, msg):
        raise ConfigError(f"{self.where(section, key)}: {msg}")

    def section(self, name) -> dict:
        return dict(self.cp[name]) if self.cp.has_section(name) else {}

    def convert(self, section, key, raw, kind):
        try:
            if kind is bool:
                low = raw.strip().lower()
                if low in ("1", "true", "yes", "on"):
                    return True
                if low in ("0", "false", "no", "off"):
                    return False
                raise ValueError(f"not a boolean: {raw!r}")
            if kind is int:
                f = float(raw)
                if f != int(f):
                    raise ValueError(f"not an integer: {raw!r}")
                return int(f)
            if kind is float:
                return float(raw)
            if kind == "floats":
                return tuple(float(v) for v in raw.split(",") if v.strip())
            if kind == "points":
                pts = [tuple(float(v) for v in p.split(",")) for p in raw.split(";") if p.strip()]
                return tuple(pts)
            return raw.strip()
        except ValueError as exc:
            self.fail(section, key, f"cannot parse {raw!r} ({exc})")

    def build(self, section, cls, overrides=None, skip=()):
        """Instantiate dataclass ``cls`` from ``section``; unknown keys are errors."""
        values = self.section(section)
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key in skip:
                continue
            if key not in types:
                self.fail(section, key, f"unknown key (expected one of {', '.join(sorted(types))})")
            t = types[key]
            kind = {"float": float, "int": int, "bool": bool, "str": str}.get(str(t), str)
            kwargs[key] = self.convert(section, key, raw, kind)
        kwargs.update(overrides or {})
        try:
            return cls(**kwargs)
        except (ValueError, TypeError) as exc:
            # point at the offending key when the message names one
            key = next((k for k in values if re.search(rf"\b{re.escape(k)}\b", str(exc))), None)
            raise ConfigError(f"{self.where(section, key)}: {exc}") from exc


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse configuration text; raises ConfigError with file/line/key context."""
    rd = _Reader(text, source)
    known = {"radar", "array", "scene", "scene.respiration", "scene.body_motion",
             "pipeline", "evaluate", "sweep"}
    for name in rd.cp.sections():
        if name not in known:
            raise ConfigError(f"{rd.where(name)}: unknown section (expected one of {', '.join(sorted(known))})")

    radar = rd.build("radar", RadarParams)

    arr = rd.section("array")
    for key in arr:
        if key not in ("tx_positions", "rx_positions"):
            rd.fail("array", key, "unknown key (expected tx_positions, rx_positions)")
    tx = rd.convert("array", "tx_positions", arr["tx_positions"], "floats") if "tx_positions" in arr else None
    rx = rd.convert("array", "rx_positions", arr["rx_positions"], "floats") if "rx_positions" in arr else None

    resp_defaults = {"kind": "respiration"} if not rd.cp.has_option("scene.respiration", "kind") else {}
    respiration = rd.build("scene.respiration", MotionModel,
                           overrides=resp_defaults) if rd.cp.has_section("scene.respiration") else None
    body = rd.build("scene.body_motion", MotionModel) if rd.cp.has_section("scene.body_motion") else None

    sc = rd.section("scene")
    kwargs = {}
    for key, raw in sc.items():
        if key in _SCENE_SCALARS:
            kwargs[key] = rd.convert("scene", key, raw, int if key == "seed" else float)
        elif key in ("radar_positions", "clutter_scatterers"):
            pts = rd.convert("scene", key, raw, "points")
            need = 2 if key == "radar_positions" else 3
            if any(len(p) != need for p in pts):
                rd.fail("scene", key, f"each entry needs {need} comma-separated numbers")
            kwargs[key] = pts
        else:
            rd.fail("scene", key, "unknown key")
    if respiration is not None:
        kwargs["respiration"] = respiration
    if body is not None:
        kwargs["body_motion"] = body
    try:
        scene = SceneConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{rd.where('scene')}: {exc}") from exc

    pipeline = rd.build("pipeline", PipelineConfig)

    ev = rd.section("evaluate")
    for key in ev:
        if key != "eps_th_list":
            rd.fail("evaluate", key, "unknown key (expected eps_th_list)")
    eps_list = (rd.convert("evaluate", "eps_th_list", ev["eps_th_list"], "floats")
                if "eps_th_list" in ev else (pipeline.eps_th,))
    if not eps_list or any(e <= 0 for e in eps_list):
        rd.fail("evaluate", "eps_th_list", "needs one or more positive values")

    sw = rd.section("sweep")
    grid = {}
    seeds = (scene.seed,)
    for key, raw in sw.items():
        if key == "seeds":
            seeds = parse_seeds(raw, rd, "sweep", key)
        elif key in SWEEP_KEYS:
            vals = rd.convert("sweep", key, raw, "floats")
            if not vals:
                rd.fail("sweep", key, "empty value list")
            grid[key] = vals
        else:
            rd.fail("sweep", key, f"unknown key (expected seeds or one of {', '.join(SWEEP_KEYS)})")

    return RunConfig(radar, scene, pipeline, tx, rx, tuple(eps_list), grid, seeds)


def parse_seeds(raw: str, rd: _Reader | None = None, section="sweep", key="seeds") -> tuple:
    """``"10"`` means seeds 0..9, ``"3-7"`` an inclusive range, ``"1,4,9"`` a list."""
    s = raw.strip()
    try:
        if "," in s:
            out = tuple(int(v) for v in s.split(",") if v.strip())
        elif "-" in s[1:]:
            a, b = s.split("-", 1)
            out = tuple(range(int(a), int(b) + 1))
        else:
            out = tuple(range(int(s)))
    except ValueError:
        out = ()
    if not out:
        msg = f"cannot parse seed list {raw!r}"
        if rd is not None:
            rd.fail(section, key, msg)
        raise ConfigError(msg)
    return out


def load_config(path=None) -> RunConfig:
    """Read ``path``, or the built-in defaults when ``path`` is None."""
    if path is None:
        return parse_config(DEFAULT_CONFIG, "<default>")
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    return parse_config(text, str(p))
