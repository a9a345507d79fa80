"""Named sweep configurations shipped with the package."""

import json
from importlib import resources

from ..errors import ConfigError


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir()
                  if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    """Config document of a named preset."""
    res = resources.files(__name__) / f"{name}.json"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(res.read_text())
