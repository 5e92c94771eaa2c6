"""Helper utilities for SoftDropConnect."""

import json
import logging
import threading
from pathlib import Path
from typing import Any, Dict, Optional

PACKAGE_LOGGER = "softdropconnect"


def setup_logging(name: str, level: int = logging.INFO) -> logging.Logger:
    """
    Set up logging for a module.

    Args:
        name: Logger name (usually __name__)
        level: Logging level

    Returns:
        Configured logger
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        handler = logging.StreamHandler()
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.setLevel(level)

    return logger


def set_verbosity(verbose: bool) -> None:
    """Switch every package logger between INFO and DEBUG."""
    level = logging.DEBUG if verbose else logging.INFO
    for name, candidate in logging.Logger.manager.loggerDict.items():
        if name.startswith(PACKAGE_LOGGER) and isinstance(candidate, logging.Logger):
            candidate.setLevel(level)


def ensure_directory(path: Path) -> Path:
    """
    Ensure directory exists, creating if necessary.

    Args:
        path: Directory path

    Returns:
        The path (for chaining)
    """
    path.mkdir(parents=True, exist_ok=True)
    return path


def format_duration(seconds: float) -> str:
    """
    Format a duration in seconds to a human-readable string.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted duration string
    """
    if seconds < 60:
        return f"{seconds:.1f} s"

    minutes, secs = divmod(int(round(seconds)), 60)
    if minutes < 60:
        return f"{minutes} min {secs} s"

    hours, minutes = divmod(minutes, 60)
    return f"{hours} h {minutes} min"


class ResultWriter:
    """
    Single writer for one output directory.

    All result files of a run (or a comparison) are written through the
    instance returned by :meth:`for_directory`, which serializes writes with
    a per-directory lock.
    """

    _registry: Dict[Path, "ResultWriter"] = {}
    _registry_lock = threading.Lock()

    def __init__(self, directory: Path):
        self.directory = ensure_directory(Path(directory))
        self._lock = threading.Lock()

    @classmethod
    def for_directory(cls, directory: Path) -> "ResultWriter":
        """Return the shared writer for ``directory``."""
        key = Path(directory).resolve()
        with cls._registry_lock:
            writer = cls._registry.get(key)
            if writer is None:
                writer = cls(key)
                cls._registry[key] = writer
            return writer

    def write_text(self, name: str, content: str) -> Path:
        """Write a text file into the directory."""
        path = self.directory / name
        with self._lock:
            path.write_text(content, encoding='utf-8')
        return path

    def write_bytes(self, name: str, content: bytes) -> Path:
        """Write a binary file into the directory."""
        path = self.directory / name
        with self._lock:
            path.write_bytes(content)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        """Write canonical (sorted, indented) JSON."""
        return self.write_text(name, json.dumps(data, indent=2, sort_keys=True) + "\n")

    def write_lines(self, name: str, lines: Any, header: Optional[str] = None) -> Path:
        """Write newline-terminated lines, optionally after a header row."""
        body = "".join(f"{line}\n" for line in lines)
        if header is not None:
            body = f"{header}\n{body}"
        return self.write_text(name, body)
