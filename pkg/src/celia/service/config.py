"""Service configuration: one YAML file, strictly validated (unknown keys
are rejected so typos fail at startup, not silently)."""
from __future__ import annotations

from dataclasses import dataclass, fields

import yaml

from ..detection import DetectorConfig
from ..dialog import DialogConfig
from ..geometry import Aabb, vec_from
from ..knowledge import Expectation
from ..relations import LocationRegion, RelationConfig, RelationKind, GEOMETRIC_KINDS
from ..tracking import TrackerConfig
from .engine import EngineConfig

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8420


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "idle"  # idle | scenario | replay
    path: str | None = None
    mode: str = "frames"  # frames | heightmaps | interactive
    speed: float = 0.0


@dataclass(frozen=True)
class ServiceConfig:
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    snapshot_path: str | None = None
    engine: EngineConfig = EngineConfig()
    source: SourceConfig = SourceConfig()


def _check_keys(raw: dict, allowed: set[str], where: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _build(dc_type, raw: dict | None, where: str, overrides: dict | None = None):
    raw = dict(raw or {})
    overrides = overrides or {}
    names = [f.name for f in fields(dc_type)]
    _check_keys(raw, set(names) - set(overrides), where)
    kwargs = {}
    defaults = dc_type()
    for name in names:
        if name in overrides:
            kwargs[name] = overrides[name]
        elif name in raw:
            current = getattr(defaults, name)
            value = raw[name]
            if isinstance(current, bool):
                kwargs[name] = bool(value)
            elif isinstance(current, float):
                kwargs[name] = float(value)
            elif isinstance(current, int):
                kwargs[name] = int(value)
            else:
                kwargs[name] = value
    try:
        return dc_type(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_box(raw, where: str) -> Aabb:
    if not isinstance(raw, dict) or "min" not in raw or "max" not in raw:
        raise ConfigError(f"{where}: box needs min and max")
    _check_keys(raw, {"min", "max"}, where)
    try:
        return Aabb(vec_from(raw["min"]), vec_from(raw["max"]))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_config(doc: dict | None, source: str = "<config>") -> ServiceConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: document is not a mapping")
    _check_keys(
        doc,
        {"listen", "snapshot_path", "work_area", "mic_position", "regions",
         "expectations", "detector", "tracker", "relations", "dialog", "source"},
        source,
    )

    listen = doc.get("listen") or {}
    _check_keys(listen, {"host", "port"}, f"{source}.listen")
    host = str(listen.get("host", DEFAULT_HOST))
    port = int(listen.get("port", DEFAULT_PORT))

    regions = []
    for i, r in enumerate(doc.get("regions") or []):
        where = f"{source}.regions[{i}]"
        _check_keys(r, {"name", "box"}, where)
        if "name" not in r or "box" not in r:
            raise ConfigError(f"{where}: needs name and box")
        regions.append(LocationRegion(str(r["name"]), _parse_box(r["box"], where)))
    if len({r.name for r in regions}) != len(regions):
        raise ConfigError(f"{source}: region names must be unique")

    expectations = []
    for i, x in enumerate(doc.get("expectations") or []):
        where = f"{source}.expectations[{i}]"
        _check_keys(x, {"label", "region", "missing_after"}, where)
        try:
            expectations.append(
                Expectation(f"exp-{i}", str(x["label"]), str(x["region"]), float(x["missing_after"]))
            )
        except (KeyError, ValueError) as e:
            raise ConfigError(f"{where}: {e}") from e

    relations_raw = dict(doc.get("relations") or {})
    enabled = GEOMETRIC_KINDS
    if "enabled_kinds" in relations_raw:
        kinds = relations_raw.pop("enabled_kinds")
        try:
            enabled = frozenset(RelationKind(k) for k in kinds)
        except ValueError as e:
            raise ConfigError(f"{source}.relations.enabled_kinds: {e}") from e
    relations_cfg = _build(RelationConfig, relations_raw, f"{source}.relations",
                           overrides={"enabled_kinds": enabled})

    dialog_raw = dict(doc.get("dialog") or {})
    mic = vec_from(doc["mic_position"]) if "mic_position" in doc and doc["mic_position"] is not None \
        else DialogConfig().mic_position
    dialog_cfg = _build(DialogConfig, dialog_raw, f"{source}.dialog", overrides={"mic_position": mic})

    engine = EngineConfig(
        detector=_build(DetectorConfig, doc.get("detector"), f"{source}.detector"),
        tracker=_build(TrackerConfig, doc.get("tracker"), f"{source}.tracker"),
        relations=relations_cfg,
        dialog=dialog_cfg,
        regions=tuple(regions),
        expectations=tuple(expectations),
        work_area=_parse_box(doc["work_area"], f"{source}.work_area") if doc.get("work_area")
        else EngineConfig().work_area,
    )

    src_raw = doc.get("source") or {}
    _check_keys(src_raw, {"kind", "path", "mode", "speed"}, f"{source}.source")
    src = SourceConfig(
        kind=str(src_raw.get("kind", "idle")),
        path=src_raw.get("path"),
        mode=str(src_raw.get("mode", "frames")),
        speed=float(src_raw.get("speed", 0.0)),
    )
    if src.kind not in ("idle", "scenario", "replay"):
        raise ConfigError(f"{source}.source.kind: must be idle, scenario, or replay")
    if src.kind != "idle" and not src.path:
        raise ConfigError(f"{source}.source: kind '{src.kind}' needs a path")

    snapshot_path = doc.get("snapshot_path")
    return ServiceConfig(
        host=host,
        port=port,
        snapshot_path=str(snapshot_path) if snapshot_path else None,
        engine=engine,
        source=src,
    )


def load_config(path: str) -> ServiceConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"{path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from e
    return parse_config(doc, source=path)
