"""Pipeline configuration and artifact manifests.

One hierarchical JSON config file (paths / providers / params); CLI flags
override config values. Every stage writes a manifest beside its output
recording input hashes, the seed, and the tool version, which is enough to
replay the stage byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ConfigError


@dataclass
class PipelineConfig:
    paths: dict = field(default_factory=dict)
    providers: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None) -> "PipelineConfig":
        if path is None:
            return cls()
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path}: invalid JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path}: expected a JSON object")
        return cls(paths=doc.get("paths", {}),
                   providers=doc.get("providers", {}),
                   params=doc.get("params", {}))

    def provider_section(self, name: str) -> dict:
        section = self.providers.get(name)
        if section is None:
            raise ConfigError(f"config has no provider section {name!r}")
        return section


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(output: str | Path, subcommand: str, args: dict,
                   inputs: list[str | Path], seed: int | None = None) -> Path:
    """Writes {output}.manifest.json capturing everything needed for replay."""
    output = Path(output)
    manifest = {
        "tool": "harmkit",
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "args": {k: str(v) for k, v in args.items() if v is not None},
        "inputs": {str(p): sha256_file(p) for p in inputs if Path(p).is_file()},
        "output": {str(output): sha256_file(output)} if output.is_file() else {},
    }
    path = Path(str(output) + ".manifest.json")
    path.write_text(json.dumps(manifest, ensure_ascii=False, indent=2,
                               sort_keys=True) + "\n", encoding="utf-8")
    return path
