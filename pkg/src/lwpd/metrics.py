"""MetricsRecord and its CSV form."""

from __future__ import annotations

import csv
import dataclasses
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

FIELDS = (
    "scheme", "seed", "sim_time", "updates", "test_loss", "test_accuracy",
    "train_loss", "comm_floats", "decode_mults",
)


@dataclass(frozen=True)
class MetricsRecord:
    scheme: str
    seed: int
    sim_time: float
    updates: int
    test_loss: float
    test_accuracy: float
    train_loss: float
    comm_floats: int
    decode_mults: int

    def row(self) -> list[str]:
        out = []
        for name in FIELDS:
            v = getattr(self, name)
            out.append(repr(v) if isinstance(v, float) else str(v))
        return out


_TYPES = {f.name: f.type for f in dataclasses.fields(MetricsRecord)}


def records_to_csv(records, header=True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(FIELDS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(records, path, append=False) -> None:
    path = Path(path)
    if append and path.exists():
        existing = path.read_text()
        if not existing.startswith(",".join(FIELDS)):
            raise ValueError(f"{path} does not hold a metrics table")
        atomic_write(path, existing + records_to_csv(records, header=False))
    else:
        atomic_write(path, records_to_csv(records))


def read_csv(path) -> list[MetricsRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != FIELDS:
            raise ValueError(f"{path}: expected header {','.join(FIELDS)}")
        out = []
        for row in reader:
            vals = {}
            for name, raw in zip(FIELDS, row):
                typ = _TYPES[name]
                vals[name] = float(raw) if typ == "float" else int(raw) if typ == "int" else raw
            out.append(MetricsRecord(**vals))
    return out
