"""Artifact files: CSV and JSON with a mandatory provenance header.

Every file starts with (or embeds) the config hash and seed that produced
it. Floats are written with repr(), the shortest round-trip form, so
deterministic values serialize to byte-identical files.
"""

import json
import os


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        # float() first: numpy scalars subclass float but repr as np.float64(x)
        return repr(float(v))
    s = str(v)
    if "," in s or "\n" in s:
        raise ValueError(f"CSV value may not contain separators: {s!r}")
    return s


def meta_line(meta: dict) -> str:
    return "# " + " ".join(f"{k}={_fmt(v)}" for k, v in sorted(meta.items()))


def write_csv(path: str, columns, rows, meta: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    lines = [meta_line(meta), ",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row width {len(row)} != {len(columns)} columns")
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_csv(path: str):
    """Returns (meta, columns, rows-as-string-lists); callers cast values."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    meta = {}
    if lines and lines[0].startswith("#"):
        for part in lines[0][1:].split():
            if "=" in part:
                k, v = part.split("=", 1)
                meta[k] = v
        lines = lines[1:]
    if not lines or not lines[0]:
        raise ValueError(f"{path}: missing CSV header")
    columns = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    return meta, columns, rows


def write_json(path: str, payload: dict, meta: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump({"meta": meta, **payload}, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: str) -> dict:
    with open(path) as f:
        return json.load(f)
