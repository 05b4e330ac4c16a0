"""
Run configuration loading and management.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .kernels import KernelSpec, PointsLike, median_bandwidth
from .schema import RUN_CONFIG_SCHEMA, validate_document
from .selection import IndexFunctions, SelectionPolicy
from .synth import SyntheticPair

# Paths
PKG_ROOT = Path(__file__).parent.parent
CONFIGS_DIR = PKG_ROOT / "configs"
DEFAULT_CONFIG = CONFIGS_DIR / "default.yaml"


@dataclass
class KernelSettings:
    """Kernel section; bandwidth may be the string 'median'."""

    family: str = "gaussian"
    bandwidth: float | str = 1.0
    degree: int = 2
    offset: float = 1.0
    domain_radius: float | None = None

    def to_spec(self, dim: int, points: PointsLike | None = None) -> KernelSpec:
        """Build the kernel for d-dimensional data, resolving the median heuristic on points."""
        bandwidth = self.bandwidth
        if bandwidth == "median":
            if points is None:
                raise ConfigError("Median bandwidth needs sample points")
            bandwidth = median_bandwidth(points)
        return KernelSpec(
            family=self.family,
            bandwidth=float(bandwidth),
            degree=int(self.degree),
            offset=float(self.offset),
            dim=dim,
            domain_radius=self.domain_radius,
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "KernelSettings":
        bandwidth = data.get("bandwidth", 1.0)
        return cls(
            family=data.get("family", "gaussian"),
            bandwidth=bandwidth if bandwidth == "median" else float(bandwidth),
            degree=int(data.get("degree", 2)),
            offset=float(data.get("offset", 1.0)),
            domain_radius=data.get("domain_radius"),
        )


@dataclass
class SelectionSettings:
    """Selection section: alpha rule plus the policy parameters."""

    alpha: str | float = "auto"
    s: float = 0.5
    r: float = 0.5
    delta: float = 0.1
    c_subsample: float = 1.0
    regime: str = "in_rkhs"

    def policy(self) -> SelectionPolicy:
        return SelectionPolicy(
            idx=IndexFunctions(s=self.s, r=self.r, regime=self.regime),
            delta=self.delta,
            c_subsample=self.c_subsample,
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SelectionSettings":
        return cls(
            alpha=parse_alpha(data.get("alpha", "auto")),
            s=float(data.get("s", 0.5)),
            r=float(data.get("r", 0.5)),
            delta=float(data.get("delta", 0.1)),
            c_subsample=float(data.get("c_subsample", 1.0)),
            regime=data.get("regime", "in_rkhs"),
        )


@dataclass
class SubsampleSettings:
    """Subsample section; size is 'auto', a count m or a fraction of min(N, M)."""

    size: str | int | float = "auto"
    mode: str = "nystrom"
    weighting: str = "sample"
    pilot: int = 400

    def resolve(self, n: int, m: int) -> int | None:
        """Fixed subsample size for (N, M), or None when it is chosen by rule."""
        if self.size == "auto":
            return None
        if isinstance(self.size, float):
            return max(1, math.ceil(self.size * min(n, m)))
        return min(int(self.size), n, m)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SubsampleSettings":
        return cls(
            size=parse_subsample(data.get("size", "auto")),
            mode=data.get("mode", "nystrom"),
            weighting=data.get("weighting", "sample"),
            pilot=int(data.get("pilot", 400)),
        )


@dataclass
class McSettings:
    """Monte Carlo error evaluation settings."""

    points: int = 20000
    embedded_points: int = 0


@dataclass
class BenchSettings:
    """Cost benchmark sweep."""

    nystrom_sizes: list[int] = field(default_factory=lambda: [2000, 4000, 8000, 16000])
    full_sizes: list[int] = field(default_factory=lambda: [250, 500, 1000, 2000])
    max_n: int = 50000
    max_full_n: int = 5000
    seed: int = 0
    s: float | None = None
    gamma: float | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BenchSettings":
        return cls(
            nystrom_sizes=[int(n) for n in data.get("nystrom_sizes", [2000, 4000, 8000, 16000])],
            full_sizes=[int(n) for n in data.get("full_sizes", [250, 500, 1000, 2000])],
            max_n=int(data.get("max_n", 50000)),
            max_full_n=int(data.get("max_full_n", 5000)),
            seed=int(data.get("seed", 0)),
            s=data.get("s"),
            gamma=data.get("gamma"),
        )


@dataclass
class RunConfig:
    """Complete experiment configuration."""

    name: str
    description: str
    kernel: KernelSettings
    pair: SyntheticPair
    grid: list[tuple[int, int]]
    seeds: list[int]
    selection: SelectionSettings
    subsample: SubsampleSettings
    mc: McSettings
    bench: BenchSettings
    output_dir: Path
    report: bool = True
    source: Path | None = None
    raw: dict[str, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict[str, Any], source: Path | None = None) -> "RunConfig":
        """Create RunConfig from a merged, schema-valid dictionary."""
        try:
            pair = SyntheticPair.from_dict(data.get("pair", {}))
            selection = SelectionSettings.from_dict(data.get("selection", {}))
            selection.policy()
        except ValueError as e:
            raise ConfigError(f"Invalid configuration: {e}", errors=[str(e)])

        mc = data.get("mc", {})
        output = data.get("output", {})
        config = cls(
            name=data.get("name", "custom"),
            description=data.get("description", ""),
            kernel=KernelSettings.from_dict(data.get("kernel", {})),
            pair=pair,
            grid=[(int(n), int(m)) for n, m in data.get("grid", [])],
            seeds=[int(s) for s in data.get("seeds", [])],
            selection=selection,
            subsample=SubsampleSettings.from_dict(data.get("subsample", {})),
            mc=McSettings(
                points=int(mc.get("points", 20000)),
                embedded_points=int(mc.get("embedded_points", 0)),
            ),
            bench=BenchSettings.from_dict(data.get("bench", {})),
            output_dir=Path(output.get("dir", "rnd-out")),
            report=bool(output.get("report", True)),
            source=source,
            raw=data,
        )
        config.check()
        return config

    def check(self) -> None:
        """Post-parse invariants: nonempty grid, sizes >= 2, distinct seeds."""
        errors = []
        if not self.grid:
            errors.append("grid must not be empty")
        for n, m in self.grid:
            if n < 2 or m < 2:
                errors.append(f"grid size ({n}, {m}) must have N, M >= 2")
        if not self.seeds:
            errors.append("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            errors.append(f"seeds must be distinct, got {self.seeds}")
        if self.mc.embedded_points > 5000:
            errors.append("mc.embedded_points must be <= 5000")
        if errors:
            raise ConfigError("Invalid configuration: " + "; ".join(errors), errors=errors)


def parse_alpha(value: Any) -> str | float:
    """'auto', 'star' or a positive number."""
    if isinstance(value, str) and value in ("auto", "star"):
        return value
    try:
        alpha = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"alpha must be 'auto', 'star' or a positive number, got {value!r}")
    if not (math.isfinite(alpha) and alpha > 0):
        raise ConfigError(f"alpha must be positive, got {value!r}")
    return alpha


def parse_subsample(value: Any) -> str | int | float:
    """'auto', an integer m >= 1, or a fraction in (0, 1)."""
    if value == "auto":
        return "auto"
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"subsample must be 'auto', an integer or a fraction, got {value!r}")
    if 0 < number < 1:
        return number
    if number >= 1 and number == int(number):
        return int(number)
    raise ConfigError(f"subsample must be 'auto', an integer >= 1 or a fraction in (0, 1), got {value!r}")


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Merge override into a copy of base; nested dicts merge, everything else replaces."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _read_yaml(path: Path) -> dict[str, Any]:
    with open(path) as f:
        data = yaml.safe_load(f)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return data


def list_presets() -> list[str]:
    """List all available preset names."""
    presets = []
    if CONFIGS_DIR.exists():
        for preset_file in CONFIGS_DIR.glob("*.yaml"):
            presets.append(preset_file.stem)
    return sorted(presets)


def load_run_config(path: Path | str | None = None) -> RunConfig:
    """
    Load a run configuration.

    Args:
        path: YAML file merged over the packaged defaults (None: defaults only)

    Returns:
        RunConfig object

    Raises:
        FileNotFoundError: If the config file doesn't exist
        ConfigError: If the merged document fails schema validation or invariants
    """
    defaults = _read_yaml(DEFAULT_CONFIG)
    document = defaults
    source = None
    if path is not None:
        source = Path(path)
        if not source.exists():
            raise FileNotFoundError(f"Config file not found: {source}")
        document = deep_merge(defaults, _read_yaml(source))

    errors = validate_document(document, RUN_CONFIG_SCHEMA, raise_on_error=False)
    if errors:
        where = source or DEFAULT_CONFIG
        raise ConfigError(f"{where}: " + "; ".join(errors), errors=errors)

    return RunConfig.from_dict(document, source=source)


def load_preset(preset_name: str) -> RunConfig:
    """
    Load a named preset from configs/.

    Raises:
        FileNotFoundError: If the preset doesn't exist
    """
    preset_file = CONFIGS_DIR / f"{preset_name}.yaml"
    if not preset_file.exists():
        available = list_presets()
        raise FileNotFoundError(
            f"Preset '{preset_name}' not found. Available presets: {', '.join(available)}"
        )
    return load_run_config(preset_file)


def preset_description(preset_name: str) -> str:
    return str(_read_yaml(CONFIGS_DIR / f"{preset_name}.yaml").get("description", ""))


# CLI flag -> (section, key) in the config document
FLAG_TARGETS: dict[str, tuple[str, str]] = {
    "kernel": ("kernel", "family"),
    "bandwidth": ("kernel", "bandwidth"),
    "alpha": ("selection", "alpha"),
    "s": ("selection", "s"),
    "r": ("selection", "r"),
    "delta": ("selection", "delta"),
    "c_sub": ("selection", "c_subsample"),
    "regime": ("selection", "regime"),
    "subsample": ("subsample", "size"),
    "mode": ("subsample", "mode"),
    "weighting": ("subsample", "weighting"),
    "mc_points": ("mc", "points"),
    "out": ("output", "dir"),
}


def _coerce_flag(name: str, value: Any) -> Any:
    if name == "bandwidth":
        return value if value == "median" else float(value)
    if name == "alpha":
        return parse_alpha(value)
    if name == "subsample":
        return parse_subsample(value)
    if name == "out":
        return str(value)
    return value


def apply_overrides(config: RunConfig, flags: dict[str, Any]) -> RunConfig:
    """
    Return a new RunConfig with CLI flags applied; flags win.

    flags maps argparse destinations to values; None means "not given".
    --seed replaces the seed list and the benchmark seed.
    """
    document = copy.deepcopy(config.raw)
    for name, value in flags.items():
        if value is None:
            continue
        if name in FLAG_TARGETS:
            section, key = FLAG_TARGETS[name]
            document.setdefault(section, {})[key] = _coerce_flag(name, value)
        elif name == "seed":
            document["seeds"] = [int(value)]
            document.setdefault("bench", {})["seed"] = int(value)

    errors = validate_document(document, RUN_CONFIG_SCHEMA, raise_on_error=False)
    if errors:
        raise ConfigError("Invalid flag override: " + "; ".join(errors), errors=errors)
    return RunConfig.from_dict(document, source=config.source)
