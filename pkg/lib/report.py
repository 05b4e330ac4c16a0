"""
Jinja2 rendering of the markdown run reports.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any

from jinja2 import Environment, FileSystemLoader, select_autoescape

from . import __version__
from .config import PKG_ROOT, RunConfig
from .experiments import BenchResult, ConvergenceResult

TEMPLATES_DIR = PKG_ROOT / "templates"


def _num(value: Any, digits: int = 4) -> str:
    """Compact number formatting; blanks for missing values."""
    if value is None:
        return "-"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.{digits}g}"
    return str(value)


def create_jinja_env(template_dirs: list[Path] | None = None) -> Environment:
    """
    Create a Jinja2 environment with the report filters.

    Args:
        template_dirs: Directories to search (default: the packaged templates/)

    Returns:
        Configured Jinja2 Environment
    """
    dirs = template_dirs or [TEMPLATES_DIR]
    env = Environment(
        loader=FileSystemLoader([str(d) for d in dirs]),
        autoescape=select_autoescape(["html", "xml"]),
        trim_blocks=True,
        lstrip_blocks=True,
    )
    env.filters["num"] = _num
    env.filters["basename"] = lambda path: Path(path).name
    return env


def build_template_context(config: RunConfig) -> dict[str, Any]:
    """Variables shared by every report."""
    return {
        "version": __version__,
        "config": config,
        "pair": config.pair.to_dict(),
        "policy": config.selection.policy().to_dict(),
        "source": str(config.source) if config.source else "packaged defaults",
    }


def render_convergence(config: RunConfig, result: ConvergenceResult, env: Environment | None = None) -> str:
    env = env or create_jinja_env()
    context = {**build_template_context(config), "result": result}
    return env.get_template("convergence.md.j2").render(**context)


def render_bench(config: RunConfig, result: BenchResult, env: Environment | None = None) -> str:
    env = env or create_jinja_env()
    context = {**build_template_context(config), "result": result}
    return env.get_template("bench.md.j2").render(**context)


def write_report(out_dir: Path, content: str) -> Path:
    """Write report.md into the output directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.md"
    path.write_text(content)
    return path
