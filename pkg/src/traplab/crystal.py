"""Structure analysis of ion crystals: dimensionality, layers, spacing."""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "DegenerateInputError",
    "CrystalReport",
    "classify",
    "nn_stats",
    "layer_count",
    "histogram_csv",
]

PLANARITY_THRESHOLD = 0.3
LAYER_GAP = 0.5


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class CrystalReport:
    n_ions: int
    structure: str  # chain-1D | planar-2D | volumetric-3D
    plane_normal: np.ndarray | None
    layer_count: int
    nn_mean: float
    nn_min: float
    planarity_ratio: float
    extents: np.ndarray  # max |deviation| along each principal axis, strongest first
    axes: np.ndarray  # principal directions as rows

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("plane_normal", "extents", "axes"):
            d[k] = None if d[k] is None else np.asarray(d[k]).tolist()
        d["class"] = d.pop("structure")
        return d

    def to_text(self) -> str:
        lines = [
            f"n_ions          {self.n_ions}",
            f"class           {self.structure}",
            f"layer_count     {self.layer_count}",
            f"nn_mean_um      {self.nn_mean * 1e6:.4f}",
            f"nn_min_um       {self.nn_min * 1e6:.4f}",
            f"planarity_ratio {self.planarity_ratio:.4f}",
        ]
        if self.plane_normal is not None:
            lines.append("plane_normal    " + " ".join(f"{c:+.5f}" for c in self.plane_normal))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _check(positions) -> np.ndarray:
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(pos) < 2:
        raise DegenerateInputError("need at least two ions")
    if not np.all(np.isfinite(pos)):
        raise DegenerateInputError("non-finite positions")
    if np.ptp(pos, axis=0).max() == 0:
        raise DegenerateInputError("all ions coincide")
    return pos


def nn_stats(positions, bins: int = 20):
    """Nearest-neighbour distances.

    Returns ``(nn_mean, nn_min, (counts, edges))`` with the histogram taken
    over ``[0, 3 nn_mean]``.
    """
    pos = _check(positions)
    d, _ = cKDTree(pos).query(pos, k=2)
    nn = d[:, 1]
    if np.any(nn == 0):
        raise DegenerateInputError("coincident ions")
    mean = float(nn.mean())
    counts, edges = np.histogram(nn, bins=bins, range=(0.0, 3 * mean))
    return mean, float(nn.min()), (counts, edges)


def histogram_csv(positions, bins: int = 20) -> str:
    _, _, (counts, edges) = nn_stats(positions, bins)
    buf = io.StringIO()
    buf.write("bin_low_um,bin_high_um,count\n")
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        buf.write(f"{lo * 1e6:.6f},{hi * 1e6:.6f},{int(c)}\n")
    return buf.getvalue()


def layer_count(positions, normal, nn_mean: float | None = None, gap: float = LAYER_GAP) -> int:
    """Count layers along ``normal``.

    Projections are split wherever consecutive sorted values differ by more
    than ``gap * nn_mean``.  A cluster thicker than one layer spacing of a
    close-packed stack (sqrt(2/3) nn_mean) is counted as the number of such
    spacings it spans, so a dense 3D ball is not reported as one layer.
    """
    pos = _check(positions)
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    if nn_mean is None:
        nn_mean = nn_stats(pos)[0]
    s = np.sort(pos @ n)
    breaks = np.where(np.diff(s) > gap * nn_mean)[0]
    spacing = np.sqrt(2 / 3) * nn_mean
    count = 0
    for chunk in np.split(s, breaks + 1):
        thickness = chunk[-1] - chunk[0]
        count += 1 + int(round(thickness / spacing)) if thickness > spacing else 1
    return count


def classify(positions, planarity: float = PLANARITY_THRESHOLD, gap: float = LAYER_GAP) -> CrystalReport:
    """Principal-component classification of a crystal."""
    pos = _check(positions)
    nn_mean, nn_min, _ = nn_stats(pos)
    centred = pos - pos.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=len(pos) < 3)
    axes = vt.copy()
    # deterministic orientation: largest component of each axis positive
    for k in range(3):
        if axes[k, np.argmax(np.abs(axes[k]))] < 0:
            axes[k] = -axes[k]
    extents = np.abs(centred @ axes.T).max(axis=0)
    ratio = float(extents[2] / nn_mean)
    normal = axes[2]
    layers = layer_count(pos, normal, nn_mean, gap)
    if extents[1] < planarity * nn_mean and extents[2] < planarity * nn_mean:
        structure = "chain-1D"
        plane_normal = None
    elif ratio < planarity and layers == 1:
        structure = "planar-2D"
        plane_normal = normal
    else:
        structure = "volumetric-3D"
        plane_normal = None
    return CrystalReport(len(pos), structure, plane_normal, layers, nn_mean, nn_min, ratio, extents, axes)
