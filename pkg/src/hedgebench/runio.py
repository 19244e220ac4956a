"""Run directories, manifests, and artifact persistence.

Every CLI command execution is described by a RunManifest: the resolved
configuration and its hash, the seeds in play, content hashes of the model
registry and input datasets, per-stage counts, wall-clock timestamps, and
gateway cache statistics. Artifacts live under ``<runs_root>/<run_id>/``.

JSONL artifacts start with a header line naming the manifest that produced
them, so a file copied out of its run directory still says where it came
from. Readers skip the header; payload rows are one record per line.
Timestamps live only in the manifest, never in artifact payloads, so two
runs with identical config and cache produce byte-identical artifacts.
"""

from __future__ import annotations

import dataclasses
import datetime
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InputError
from .estimators import QARecord

MANIFEST_NAMES = {}  # command -> filename, filled by manifest_filename


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def file_digest(path: str | Path) -> str:
    """Content hash used to version registries and dataset files."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def derive_run_id(command: str, config: dict) -> str:
    """Deterministic id: same command + config -> same run directory.

    That is what makes reruns land on their own warm cache without the
    caller having to thread an id around.
    """
    family = command.split(".", 1)[0]
    return f"{family}-{config_hash(config)[:12]}"


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """What a command did: inputs, versions, counts, cache behaviour."""

    run_id: str
    command: str
    config: dict
    config_hash: str
    seeds: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    started_at: str = ""
    finished_at: str = ""

    @classmethod
    def start(
        cls,
        command: str,
        config: dict,
        run_id: str | None = None,
        seeds: dict | None = None,
        versions: dict | None = None,
    ) -> "RunManifest":
        digest = config_hash(config)
        return cls(
            run_id=run_id or derive_run_id(command, config),
            command=command,
            config=config,
            config_hash=digest,
            seeds=dict(seeds or {}),
            versions=dict(versions or {}),
            started_at=_utcnow(),
        )

    def finish(self, cache_stats: dict | None = None) -> "RunManifest":
        self.finished_at = _utcnow()
        if cache_stats is not None:
            self.cache = dict(cache_stats)
        return self

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)

    @property
    def filename(self) -> str:
        return manifest_filename(self.command)


def manifest_filename(command: str) -> str:
    # "bench.run" -> "manifest-bench-run.json"
    return f"manifest-{command.replace('.', '-')}.json"


class RunDir:
    """Layout helper for one run's directory tree."""

    def __init__(self, runs_root: str | Path, run_id: str):
        self.root = Path(runs_root) / run_id
        self.run_id = run_id

    def path(self, name: str) -> Path:
        return self.root / name

    @property
    def cache_dir(self) -> Path:
        return self.root / "cache"

    def ensure(self) -> "RunDir":
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    def write_manifest(self, manifest: RunManifest) -> Path:
        path = self.path(manifest.filename)
        path.write_text(
            json.dumps(manifest.as_dict(), indent=2, sort_keys=True,
                       ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        return path

    def read_manifest(self, command: str) -> RunManifest:
        path = self.path(manifest_filename(command))
        if not path.exists():
            raise InputError(
                f"run {self.run_id!r} has no {command} manifest at {path}"
            )
        return RunManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def header(self, manifest: RunManifest) -> dict:
        return {
            "_header": True,
            "run_id": self.run_id,
            "command": manifest.command,
            "manifest": manifest.filename,
        }

    def write_jsonl(
        self, name: str, rows: Iterable[dict], manifest: RunManifest
    ) -> Path:
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(self.header(manifest)) + "\n")
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        if name not in manifest.artifacts:
            manifest.artifacts.append(name)
        return path

    def write_json(self, name: str, obj: dict, manifest: RunManifest) -> Path:
        path = self.path(name)
        payload = {"_meta": self.header(manifest), **obj}
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        if name not in manifest.artifacts:
            manifest.artifacts.append(name)
        return path

    def write_text(self, name: str, text: str, manifest: RunManifest) -> Path:
        path = self.path(name)
        path.write_text(text, encoding="utf-8")
        if name not in manifest.artifacts:
            manifest.artifacts.append(name)
        return path


def iter_jsonl(path: str | Path) -> Iterator[dict]:
    """Payload rows only; the provenance header is skipped."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if isinstance(row, dict) and row.get("_header"):
                continue
            yield row


def read_jsonl_header(path: str | Path) -> dict | None:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                return row if isinstance(row, dict) and row.get("_header") else None
    return None


def write_qa_records(
    rundir: RunDir, name: str, records: Iterable[QARecord], manifest: RunManifest
) -> Path:
    return rundir.write_jsonl(name, (r.as_dict() for r in records), manifest)


def read_qa_records(path: str | Path) -> list[QARecord]:
    return [QARecord.from_dict(row) for row in iter_jsonl(path)]
