"""
Run directories and their JSON artifacts.

Floats go through json's repr, the shortest string that reads back to the
same double; non-finite values are written as null.
"""
import hashlib
import json
import logging
import math
import os
import shutil
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np

from annealab.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

STATUS_INCOMPLETE = 'incomplete'
STATUS_COMPLETE = 'complete'
STATUS_FAILED = 'failed'


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(data) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True, allow_nan=False) + '\n'


def atomic_write_text(path: Path, text: str):
    tmp = path.with_name(path.name + '.tmp')
    tmp.write_text(text)
    os.replace(tmp, path)


def write_json(path: Path, data):
    atomic_write_text(Path(path), dumps(data))


def read_json(path: Union[str, Path]):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise InvalidInputError(f"{path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from None


def content_hash(parts: Iterable[bytes]) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(hashlib.sha256(part).digest())
    return digest.hexdigest()


class RunDirectory:
    """One directory per run: config.json, depth.json, schedule.json, tail.csv, fit.json, result.json."""

    CONFIG = 'config.json'
    DEPTH = 'depth.json'
    SCHEDULE = 'schedule.json'
    TAIL = 'tail.csv'
    FIT = 'fit.json'
    RESULT = 'result.json'
    STATUS = 'STATUS'
    BLOCKS = 'blocks'

    ARTIFACTS = (CONFIG, DEPTH, SCHEDULE, TAIL, FIT, RESULT)

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def __repr__(self):
        return f"RunDirectory({str(self.root)!r})"

    def path(self, name: str) -> Path:
        return self.root / name

    @property
    def blocks_dir(self) -> Path:
        return self.root / self.BLOCKS

    def block_path(self, index: int) -> Path:
        return self.blocks_dir / f'block_{index:05d}.npz'

    @property
    def status(self) -> Optional[str]:
        marker = self.path(self.STATUS)
        return marker.read_text().strip() if marker.exists() else None

    def set_status(self, status: str):
        atomic_write_text(self.path(self.STATUS), status + '\n')

    def open(self, config_text: str, resume: bool = False) -> bool:
        """
        Make the directory ready for a run and mark it incomplete.

        Returns True when finished blocks of an earlier run with the same
        config are kept for reuse; otherwise every earlier artifact is removed.
        """
        self.root.mkdir(parents=True, exist_ok=True)
        config_path = self.path(self.CONFIG)
        same_config = config_path.exists() and config_path.read_text() == config_text
        reuse = resume and same_config and self.blocks_dir.is_dir()
        if resume and not reuse:
            logger.warning("%s: nothing to resume (missing blocks or a different config); restarting", self.root)
        if not reuse:
            self.clear()
        self.blocks_dir.mkdir(exist_ok=True)
        atomic_write_text(config_path, config_text)
        self.set_status(STATUS_INCOMPLETE)
        return reuse

    def clear(self):
        for name in self.ARTIFACTS + (self.STATUS,):
            self.path(name).unlink(missing_ok=True)
        if self.blocks_dir.exists():
            shutil.rmtree(self.blocks_dir)

    def hashed_parts(self, config_echo: dict) -> List[bytes]:
        """Deterministic outputs of a run; the output directory itself is left out of the config part."""
        echo = dict(config_echo)
        echo.pop('output_dir', None)
        parts = [dumps(echo).encode()]
        for name in (self.DEPTH, self.SCHEDULE, self.TAIL, self.FIT):
            parts.append(self.path(name).read_bytes())
        return parts
