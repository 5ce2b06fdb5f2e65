"""Small helpers for the fixed-header CSV formats used by the bundles."""

import csv
from contextlib import contextmanager
from pathlib import Path


class InputError(ValueError):
    """Bad user-supplied data: malformed files, unknown ids, violated preconditions."""


def read_rows(path, header):
    """Yield ``(line_number, row_dict)``; the header must match exactly."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise InputError(f"{path}:1: empty file, expected header {','.join(header)}")
        if [h.strip() for h in first] != list(header):
            raise InputError(
                f"{path}:1: header {','.join(first)!r} does not match {','.join(header)!r}"
            )
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            yield lineno, dict(zip(header, (c.strip() for c in row)))


@contextmanager
def field_errors(path, lineno):
    """Re-raise conversion errors with a file/line prefix."""
    try:
        yield
    except InputError:
        raise
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}:{lineno}: {exc}") from exc


def parse_bool(text):
    t = text.strip().lower()
    if t == "true":
        return True
    if t == "false":
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def fmt_float(x):
    """Shortest round-trip text for a float; integers stay integral."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)
