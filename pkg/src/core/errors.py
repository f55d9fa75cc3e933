"""
Error types for the dialect lexicon toolkit
Each error carries the process exit code the command line reports for it
"""

from pathlib import Path
from typing import Optional, Union


class DialexError(Exception):
    """Base class for all errors raised on purpose by dialex"""
    exit_code = 1


class ConfigError(DialexError):
    """Invalid configuration, bad usage, or a missing input file"""
    exit_code = 2


class DataError(DialexError):
    """Malformed or inconsistent input data"""
    exit_code = 1

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None, line_no: Optional[int] = None):
        self.message = message
        self.path = str(path) if path is not None else None
        self.line_no = line_no
        super().__init__(self._render())

    def _render(self) -> str:
        """Prefix the message with path and line number when known"""
        location = ""
        if self.path is not None:
            location = self.path
            if self.line_no is not None:
                location += f":{self.line_no}"
        elif self.line_no is not None:
            location = f"line {self.line_no}"
        return f"{location}: {self.message}" if location else self.message


class RecordFormatError(DataError):
    """A line of a TSV, JSON-lines or trec file does not follow its schema"""


class LabelError(DataError):
    """A pair label is not one of the known tags"""


class ForestFormatError(DataError):
    """A serialized forest document is unreadable or inconsistent"""


class FeatureOrderError(DataError):
    """A forest was trained on a different feature order than the engine computes"""


class IdMismatchError(DataError):
    """Query, document or judgment ids do not line up across inputs"""
