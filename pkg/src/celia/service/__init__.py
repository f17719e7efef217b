from .app import create_app
from .config import ConfigError, ServiceConfig, SourceConfig, load_config, parse_config
from .engine import Engine, EngineConfig, EngineSnapshot, TranscriptEntry
from .runtime import InteractiveScene, ServiceRuntime, SourceBusy

__all__ = [
    "create_app",
    "ConfigError",
    "ServiceConfig",
    "SourceConfig",
    "load_config",
    "parse_config",
    "Engine",
    "EngineConfig",
    "EngineSnapshot",
    "TranscriptEntry",
    "InteractiveScene",
    "ServiceRuntime",
    "SourceBusy",
]
