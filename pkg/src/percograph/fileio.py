"""Small CSV/JSON helpers shared by the library and the CLI.

Every CSV written by the package starts with a comment row carrying the
schema name/version and the exact invocation that produced the file, so
outputs are traceable and reruns byte-identical (no timestamps).  Floats
are printed with 12 significant digits.
"""

import json

CSV_SCHEMA_PREFIX = "percograph-csv/1"


def fmt(x):
    """Render a value for CSV: floats at 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def csv_header(schema, invocation=None):
    inv = f" | {invocation}" if invocation else ""
    return f"# {CSV_SCHEMA_PREFIX} {schema}{inv}"


def write_csv(fh, schema, columns, rows, invocation=None, extra_comments=()):
    """Write a commented, schema-tagged CSV to an open text handle."""
    fh.write(csv_header(schema, invocation) + "\n")
    for comment in extra_comments:
        fh.write(f"# {comment}\n")
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(fmt(x) for x in row) + "\n")


def read_csv(fh):
    """Read a package CSV back: returns (comments, columns, rows of str)."""
    comments, columns, rows = [], None, []
    for line in fh:
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        if columns is None:
            columns = line.split(",")
        else:
            rows.append(line.split(","))
    return comments, columns or [], rows


def dump_json(obj, fh):
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")
