"""
Result persistence: CSV tables, JSON reports and the run manifest
Every file is written through a temporary sibling and os.replace, so a
crashed run never leaves a half-written output behind.
"""

import hashlib
import json
import os
import subprocess
import tempfile
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from loguru import logger

TOOL_NAME = "sle-lab"
TOOL_VERSION = "0.3.0"
FLOAT_FORMAT = "%.17g"


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if not np.isfinite(value):
            return repr(value)
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    if isinstance(value, Path):
        return str(value)
    return value


def _atomic_write(path: Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def dumps_json(payload: Any) -> str:
    """Canonical JSON: sorted keys, 2-space indent, shortest round-trip floats"""
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, payload: Any) -> Path:
    written = _atomic_write(path, dumps_json(payload).encode('utf-8'))
    logger.debug(f"Wrote {written}")
    return written


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    written = _atomic_write(path, text.encode('utf-8'))
    logger.debug(f"Wrote {written} ({len(frame)} rows)")
    return written


def sha256_file(path: Path, block_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        while True:
            chunk = handle.read(block_size)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def git_describe() -> Optional[str]:
    try:
        result = subprocess.run(['git', 'describe', '--always', '--dirty'],
                                cwd=Path(__file__).resolve().parent,
                                capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    if result.returncode != 0:
        return None
    return result.stdout.strip() or None


@lru_cache(maxsize=1)
def build_id() -> Optional[str]:
    """git describe of the source tree, looked up once per process"""
    return git_describe()


@dataclass
class RunManifest:
    """Config snapshot, tool version, timing and checksums of one CLI run"""
    command: str
    config: Dict[str, Any]
    settings: Dict[str, Any] = field(default_factory=dict)
    tool: str = TOOL_NAME
    version: str = TOOL_VERSION
    build: Optional[str] = None
    started_at: float = field(default_factory=time.time)
    wall_time: float = 0.0
    exit_status: Optional[int] = None
    outputs: List[str] = field(default_factory=list)
    checksums: Dict[str, str] = field(default_factory=dict)

    def add_output(self, path: Path) -> None:
        path = Path(path)
        self.outputs.append(path.name)
        self.checksums[path.name] = sha256_file(path)

    def finalize(self, out_dir: Path, name: str = "manifest.json") -> Path:
        self.wall_time = time.time() - self.started_at
        if self.build is None:
            self.build = build_id()
        path = write_json(Path(out_dir) / name, asdict(self))
        logger.info(f"Manifest written to {path} ({len(self.outputs)} outputs, {self.wall_time:.2f}s, "
                    f"exit {self.exit_status})")
        return path
