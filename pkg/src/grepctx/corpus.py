"""Immutable, line-accurate snapshots of a source tree.

Nothing here is persisted: a snapshot is rebuilt from disk every time it is
requested, which keeps retrieval index-free.
"""

from __future__ import annotations

import fnmatch
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional

logger = logging.getLogger(__name__)

DEFAULT_IGNORES = (".git", ".hg", ".svn", ".bzr")
MAX_FILE_BYTES = 4 * 1024 * 1024
BINARY_PROBE_BYTES = 8192

LANGUAGES = ("python", "java", "other")
_EXTENSIONS = {".py": "python", ".pyi": "python", ".java": "java"}


class ConfigError(Exception):
    """Fatal configuration problem (missing root, bad option values)."""


class SliceRangeError(IndexError):
    """Requested line interval falls outside a file."""


def language_of(path: str) -> str:
    return _EXTENSIONS.get(os.path.splitext(path)[1].lower(), "other")


def split_lines(text: str) -> tuple[str, ...]:
    """Split on ``\\n`` only; a trailing newline does not open a new line.

    A ``\\r`` left over from CRLF endings is dropped so that line text is the
    same on every platform.
    """
    if not text:
        return ()
    parts = text.split("\n")
    if parts[-1] == "":
        parts.pop()
    return tuple(p[:-1] if p.endswith("\r") else p for p in parts)


@dataclass(frozen=True)
class SourceFile:
    path: str
    lines: tuple[str, ...]
    language: str

    @property
    def line_count(self) -> int:
        return len(self.lines)

    @cached_property
    def text(self) -> str:
        """Lines joined with ``\\n``; what the search module scans."""
        return "\n".join(self.lines)

    @cached_property
    def line_starts(self) -> list[int]:
        starts = [0] * len(self.lines)
        pos = 0
        for i, line in enumerate(self.lines):
            starts[i] = pos
            pos += len(line) + 1
        return starts

    def slice(self, start: int, end: int) -> str:
        if not 1 <= start <= end <= len(self.lines):
            raise SliceRangeError(
                f"{self.path}: interval [{start}, {end}] outside 1..{len(self.lines)}"
            )
        return "\n".join(self.lines[start - 1 : end])


@dataclass(frozen=True)
class RepoSnapshot:
    root: Path
    files: tuple[SourceFile, ...]
    language_filter: frozenset[str]
    warnings: tuple[str, ...] = ()
    _by_path: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_path = {f.path: f for f in self.files}
        if len(by_path) != len(self.files):
            raise ValueError("duplicate file paths in snapshot")
        object.__setattr__(self, "_by_path", by_path)

    @property
    def total_lines(self) -> int:
        return sum(f.line_count for f in self.files)

    def __contains__(self, path: str) -> bool:
        return path in self._by_path

    def file(self, path: str) -> SourceFile:
        try:
            return self._by_path[path]
        except KeyError:
            raise KeyError(f"{path} is not part of the snapshot") from None

    def slice(self, path: str, interval: tuple[int, int]) -> str:
        """Return lines ``start..end`` (1-based, inclusive) of ``path``."""
        start, end = interval
        return self.file(path).slice(start, end)

    def without(self, path: str) -> "RepoSnapshot":
        """Snapshot view with one file removed (used to hide the file being completed)."""
        if path not in self._by_path:
            return self
        return RepoSnapshot(
            root=self.root,
            files=tuple(f for f in self.files if f.path != path),
            language_filter=self.language_filter,
            warnings=self.warnings,
        )


def _is_ignored(rel: str, patterns: Iterable[str]) -> bool:
    parts = rel.split("/")
    for pat in patterns:
        if fnmatch.fnmatchcase(rel, pat):
            return True
        if any(fnmatch.fnmatchcase(part, pat) for part in parts):
            return True
    return False


def _read(full: str, rel: str, max_bytes: int) -> tuple[Optional[SourceFile], Optional[str]]:
    try:
        size = os.path.getsize(full)
        if size > max_bytes:
            return None, f"{rel}: skipped, {size} bytes exceeds cap of {max_bytes}"
        with open(full, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        return None, f"{rel}: unreadable ({exc.strerror or exc})"
    if b"\x00" in data[:BINARY_PROBE_BYTES]:
        return None, None
    text = data.decode("utf-8", errors="replace")
    return SourceFile(rel, split_lines(text), language_of(rel)), None


def scan_repo(
    root,
    ignore_rules: Iterable[str] = (),
    language_filter: Optional[Iterable[str]] = None,
    max_file_bytes: int = MAX_FILE_BYTES,
    workers: int = 8,
) -> RepoSnapshot:
    """Walk ``root`` and load every non-ignored text file.

    ``ignore_rules`` are fnmatch globs tested against the relative posix path
    and against each path component; VCS metadata directories are always
    ignored. ``language_filter=None`` keeps every language.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"repository root {str(root)!r} does not exist or is not a directory")
    patterns = tuple(DEFAULT_IGNORES) + tuple(ignore_rules)
    langs = frozenset(language_filter) if language_filter is not None else frozenset(LANGUAGES)
    unknown = langs - set(LANGUAGES)
    if unknown:
        raise ConfigError(f"unknown language tags: {sorted(unknown)}")

    candidates: list[tuple[str, str]] = []
    for dirpath, dirnames, filenames in os.walk(root):
        rel_dir = os.path.relpath(dirpath, root).replace(os.sep, "/")
        rel_dir = "" if rel_dir == "." else rel_dir + "/"
        dirnames[:] = [d for d in dirnames if not _is_ignored(rel_dir + d, patterns)]
        for name in filenames:
            rel = rel_dir + name
            if _is_ignored(rel, patterns) or language_of(rel) not in langs:
                continue
            full = os.path.join(dirpath, name)
            if os.path.islink(full) and not os.path.isfile(full):
                continue
            candidates.append((full, rel))
    candidates.sort(key=lambda c: c[1])

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        loaded = list(pool.map(lambda c: _read(c[0], c[1], max_file_bytes), candidates))

    files, warnings = [], []
    for source, warning in loaded:
        if warning:
            logger.warning(warning)
            warnings.append(warning)
        if source is not None:
            files.append(source)
    return RepoSnapshot(root, tuple(files), langs, tuple(warnings))
