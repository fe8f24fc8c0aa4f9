#!/usr/bin/env python3
"""
Flat config files: one `section.key = value` per line, `#` starts a comment,
lists are comma separated. Values are validated through ReconConfig.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, get_origin

from pydantic import ValidationError

from photoacoustic.errors import ConfigError
from photoacoustic.models import ReconConfig

logger = logging.getLogger(__name__)

_NONE = ("none", "null", "")


def _is_list(section: str, key: str) -> bool:
    section_field = ReconConfig.model_fields.get(section)
    if section_field is None:
        return False
    inner = section_field.annotation.model_fields.get(key)
    return inner is not None and get_origin(inner.annotation) is list


def _parse_value(section: str, key: str, raw: str):
    raw = raw.strip()
    if _is_list(section, key):
        return [item.strip() for item in raw.split(",") if item.strip()]
    if raw.lower() in _NONE:
        return None
    return raw


def _parse_lines(lines: Iterable[str], source: str) -> Dict[str, Dict[str, object]]:
    tree: Dict[str, Dict[str, object]] = {}
    for number, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {text!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key.count(".") != 1:
            raise ConfigError(f"{source}:{number}: keys look like 'section.name', got {key!r}")
        section, name = key.split(".")
        if section in tree and name in tree[section]:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        tree.setdefault(section, {})[name] = _parse_value(section, name, raw)
    return tree


def _build(tree: Dict[str, Dict[str, object]], source: str) -> ReconConfig:
    # the dimension picks the defaults every other key overrides
    try:
        dimension = int(tree.get("grid", {}).get("dimension", 3))
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: grid.dimension must be 2 or 3")
    if dimension not in (2, 3):
        raise ConfigError(f"{source}: grid.dimension must be 2 or 3, got {dimension}")
    tree.setdefault("grid", {})["dimension"] = dimension
    merged = ReconConfig.defaults(dimension).model_dump()
    for section, values in tree.items():
        if section not in merged:
            raise ConfigError(f"{source}: unknown section {section!r}")
        merged[section].update(values)
    try:
        return ReconConfig.model_validate(merged)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"{source}: {problems}")


def parse_config(text: str, source: str = "<config>") -> ReconConfig:
    return _build(_parse_lines(text.splitlines(), source), source)


def load_config(path: Optional[str], overrides: Iterable[str] = ()) -> ReconConfig:
    """Config from a file (defaults when path is None) plus `key=value` overrides; OSError propagates"""
    lines = []
    source = "<defaults>"
    if path is not None:
        source = str(path)
        lines = Path(path).read_text().splitlines()
    tree = _parse_lines(lines, source)
    for section, values in _parse_lines(overrides, "--set").items():
        tree.setdefault(section, {}).update(values)
    cfg = _build(tree, source)
    logger.debug(f"config from {source}: dimension {cfg.grid.dimension}, method {cfg.recon.method}")
    return cfg


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def serialize_config(cfg: ReconConfig) -> str:
    lines = []
    for section, values in sorted(cfg.model_dump().items()):
        for key, value in sorted(values.items()):
            lines.append(f"{section}.{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"
