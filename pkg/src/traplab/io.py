"""Plain-text output formats: XYZ trajectory frames and CSV tables."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["write_xyz", "read_xyz", "write_csv", "format_float"]


def format_float(v: float) -> str:
    return repr(float(v))


def _label(sp) -> str:
    return (getattr(sp, "label", "") or "ion").replace(" ", "_")


def write_xyz(path, frames: Iterable, species: Sequence) -> None:
    """Write ``(time, positions)`` frames; coordinates in micrometres."""
    labels = [_label(s) for s in species]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t, pos in frames:
            pos = np.asarray(pos)
            fh.write(f"{len(pos)}\n")
            fh.write(f"t={float(t):.12e} s\n")
            for lab, p in zip(labels, pos * 1e6):
                fh.write(f"{lab} {p[0]:.9f} {p[1]:.9f} {p[2]:.9f}\n")


def read_xyz(path) -> list:
    """Read frames back as ``[(time, positions_m, labels)]``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    frames, i = [], 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        n = int(lines[i])
        comment = lines[i + 1]
        t = float(comment.split("=")[1].split()[0]) if comment.startswith("t=") else 0.0
        rows = [lines[i + 2 + k].split() for k in range(n)]
        labels = [r[0] for r in rows]
        pos = np.array([[float(c) for c in r[1:4]] for r in rows]) * 1e-6
        frames.append((t, pos, labels))
        i += 2 + n
    if not frames:
        raise ValueError(f"{path}: no XYZ frames found")
    return frames


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
