# utils/manifest.py: RunManifest (kto, z czym, dokąd, kiedy)
# Zapis atomowy przed pierwszą mutacją wyjść; po sukcesie dopisujemy finished_at + status.
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .fs import git_blob_sha1, write_json

RUN_MANIFEST = "run_manifest.json"


def _utcnow_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    command: List[str]
    seed: Optional[int]
    resolved_config: Dict[str, Any] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    started_at: str = field(default_factory=_utcnow_iso)
    finished_at: Optional[str] = None
    status: str = "running"

    @classmethod
    def start(cls, path: Path | str, *, seed: Optional[int], inputs: Sequence[Path | str] = (),
              outputs: Optional[Dict[str, Path | str]] = None, config: Optional[Dict[str, Any]] = None,
              argv: Optional[Sequence[str]] = None) -> "RunManifest":
        m = cls(
            command=list(argv if argv is not None else sys.argv),
            seed=seed,
            resolved_config=dict(config or {}),
            inputs={str(p): git_blob_sha1(p) for p in inputs if Path(p).is_file()},
            outputs={k: str(v) for k, v in (outputs or {}).items()},
        )
        m._path = Path(path)
        m.write()
        return m

    def write(self) -> Path:
        return write_json(self._path, asdict(self))

    def finish(self, status: str = "ok") -> Path:
        self.status = status
        self.finished_at = _utcnow_iso()
        return self.write()
