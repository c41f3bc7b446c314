"""Exception types shared across the package.

The CLI maps these to stable exit codes; library callers can catch them
individually.
"""

from __future__ import annotations


class ParseError(ValueError):
    """Malformed line in a change log, call graph, or outcomes file."""

    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        super().__init__(prefix + message)


class LabelError(ValueError):
    """Missing or unusable version label (no fault-revealing tests, absent file)."""


class AlignmentError(ValueError):
    """Two outcome files do not cover the same set of version ids."""

    def __init__(self, missing_in_a: set[str], missing_in_b: set[str]):
        self.missing_in_a = missing_in_a
        self.missing_in_b = missing_in_b
        parts = []
        if missing_in_a:
            parts.append("missing in first file: " + ", ".join(sorted(missing_in_a)))
        if missing_in_b:
            parts.append("missing in second file: " + ", ".join(sorted(missing_in_b)))
        super().__init__("version ids differ; " + "; ".join(parts))
