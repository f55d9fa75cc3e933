"""
File helpers shared by all readers and writers
Outputs are written atomically so a failing command never leaves partial files behind
"""

import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

from .errors import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def require_file(path: PathLike) -> Path:
    """Return the path if it is an existing file, raise ConfigError otherwise"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    return path


def iter_lines(path: PathLike) -> Iterator[Tuple[int, str]]:
    """Yield (1-based line number, line without newline), skipping blanks and '#' comments"""
    path = require_file(path)
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield line_no, line


def iter_tsv(path: PathLike) -> Iterator[Tuple[int, List[str]]]:
    """Yield (line number, tab-separated fields) for every data line"""
    for line_no, line in iter_lines(path):
        yield line_no, line.split("\t")


def with_header(body: str, provenance: Optional[str]) -> str:
    """Prefix a TSV body with the effective-config comment line"""
    if provenance is None:
        return body
    return f"# config: {provenance}\n{body}"


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write text to a temp file next to the target, then rename it into place"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug("wrote %s", path)
    return path


def atomic_write_dir(path: PathLike, files: Dict[str, str]) -> Path:
    """Write a directory of text files, replacing any previous directory at once"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_dir = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        for name, text in files.items():
            with open(tmp_dir / name, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        if path.exists():
            old = path.with_name(f".{path.name}.old")
            if old.exists():
                shutil.rmtree(old)
            os.replace(path, old)
            os.replace(tmp_dir, path)
            shutil.rmtree(old)
        else:
            os.replace(tmp_dir, path)
    except BaseException:
        if tmp_dir.exists():
            shutil.rmtree(tmp_dir)
        raise
    logger.debug("wrote directory %s", path)
    return path
