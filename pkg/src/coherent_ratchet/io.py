"""Result bundles and their deterministic CSV serialization.

``emit(bundle, "out.csv")`` writes

* ``out.csv``: the first table;
* ``out.<name>.csv``: every further table;
* ``out.meta.json``: metadata (config echo, code version, timestamps) and
  the list of table files.

Every CSV has a single header row followed by data rows; floats use 9
significant digits. Identical bundles give identical bytes.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__

FLOAT_FORMAT = "{:.9g}"


@dataclass
class Table:
    columns: list
    rows: list

    def __post_init__(self):
        self.columns = [str(c) for c in self.columns]
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row has {len(r)} entries, table has {len(self.columns)} columns")


@dataclass
class ResultBundle:
    metadata: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def add_table(self, name: str, columns: Sequence[str], rows) -> None:
        if name in self.tables:
            raise ValueError(f"duplicate table {name!r}")
        self.tables[name] = Table(list(columns), [list(r) for r in rows])

    def add_columns(self, name: str, **columns) -> None:
        """Add a table from equally long 1-D arrays."""
        arrays = [np.asarray(v) for v in columns.values()]
        self.add_table(name, list(columns), zip(*arrays))


def new_bundle(config=None, **extra) -> ResultBundle:
    """Bundle whose metadata records the code version, a UTC timestamp and the config."""
    meta = {"code_version": __version__,
            "created_utc": _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")}
    if config is not None:
        meta["config"] = config.to_dict()
        meta["seed"] = config.seed
    meta.update(extra)
    return ResultBundle(meta)


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        return FLOAT_FORMAT.format(x)
    return str(x)


def table_text(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def table_paths(path) -> tuple[Path, Path]:
    path = Path(path)
    stem = path.with_suffix("") if path.suffix == ".csv" else path
    return path if path.suffix == ".csv" else path.with_suffix(".csv"), Path(f"{stem}.meta.json")


def emit(bundle: ResultBundle, path) -> list[Path]:
    """Write the bundle next to ``path``; returns the files written."""
    main, meta_path = table_paths(path)
    stem = main.with_suffix("")
    written, files = [], {}
    for i, (name, table) in enumerate(bundle.tables.items()):
        target = main if i == 0 else Path(f"{stem}.{name}.csv")
        with open(target, "w", newline="") as fh:
            fh.write(table_text(table))
        files[name] = target.name
        written.append(target)
    meta = {"metadata": _jsonable(bundle.metadata), "tables": files}
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(meta_path)
    return written


def render(bundle: ResultBundle) -> str:
    """Human-oriented text of all tables (for stdout)."""
    parts = []
    for name, table in bundle.tables.items():
        parts.append(f"# {name}\n{table_text(table)}")
    return "\n".join(parts)


def _value(x: str):
    try:
        return float(x)
    except ValueError:
        return x


def read_table(path) -> Table:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return Table(rows[0], [[_value(x) for x in r] for r in rows[1:]])


def read_bundle(path) -> ResultBundle:
    main, meta_path = table_paths(path)
    with open(meta_path) as fh:
        meta = json.load(fh)
    bundle = ResultBundle(meta["metadata"])
    for name, fname in meta["tables"].items():
        bundle.tables[name] = read_table(meta_path.parent / fname)
    return bundle
