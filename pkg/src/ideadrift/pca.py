"""Principal component analysis sized by a target explained-variance fraction."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError

_EV_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class PcaModel:
    """Mean vector plus k orthonormal component rows and their variances."""

    mean: np.ndarray
    components: np.ndarray        # k x D, orthonormal rows
    explained_variance: np.ndarray  # length k, non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    flipped = components.copy()
    for row in flipped:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return flipped


def _sort_ties(components: np.ndarray, variances: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Within groups of (near-)equal variances, order rows lexicographically."""
    order = list(range(len(variances)))
    start = 0
    while start < len(order):
        stop = start + 1
        while stop < len(order) and np.isclose(
            variances[stop], variances[start], rtol=_EV_TIE_RTOL, atol=1e-15
        ):
            stop += 1
        if stop - start > 1:
            group = sorted(order[start:stop], key=lambda i: tuple(components[i]))
            order[start:stop] = group
        start = stop
    return components[order], variances[order]


def fit_pca(data: np.ndarray, variance_fraction: float) -> PcaModel:
    """Fit PCA on an n x D matrix, keeping the fewest components whose
    cumulative explained variance reaches ``variance_fraction`` of the total.

    Covariance uses 1/(n-1) normalization; components come from the SVD of
    the centered data, sign-fixed and deterministically ordered. Data with
    zero total variance yields a single zero-variance component.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DataFormatError("data must be a 2-D matrix")
    n, d = data.shape
    if n < 2:
        raise DataFormatError(f"need at least 2 rows to fit, got {n}")
    if not (0.0 < variance_fraction <= 1.0):
        raise DataFormatError(f"variance_fraction must be in (0, 1], got {variance_fraction}")
    mean = data.mean(axis=0)
    centered = data - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    variances = singular**2 / (n - 1)
    total = float(variances.sum())
    if total <= 0.0:
        components = np.zeros((1, d))
        components[0, 0] = 1.0
        return PcaModel(mean=mean, components=components,
                        explained_variance=np.zeros(1))
    # drop numerically-zero directions so fraction=1.0 recovers the rank
    keep = variances > variances[0] * 1e-12
    variances = variances[keep]
    rows = _fix_signs(vt[keep])
    rows, variances = _sort_ties(rows, variances)
    cumulative = np.cumsum(variances)
    threshold = variance_fraction * total * (1.0 - 1e-12)
    k = int(np.searchsorted(cumulative, threshold) + 1)
    k = min(k, len(variances))
    return PcaModel(mean=mean, components=rows[:k].copy(),
                    explained_variance=variances[:k].copy())


def transform(model: PcaModel, vectors: np.ndarray) -> np.ndarray:
    """Project a D-vector (or n x D matrix) onto the model's components."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.shape[-1] != model.dim:
        raise DataFormatError(
            f"vector dimension {vectors.shape[-1]} != model dimension {model.dim}"
        )
    return (vectors - model.mean) @ model.components.T


def save_model(model: PcaModel, path: str | Path) -> None:
    payload = {
        "mean": [float(x) for x in model.mean],
        "components": [[float(x) for x in row] for row in model.components],
        "explained_variance": [float(x) for x in model.explained_variance],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path: str | Path) -> PcaModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        model = PcaModel(
            mean=np.asarray(payload["mean"], dtype=float),
            components=np.asarray(payload["components"], dtype=float),
            explained_variance=np.asarray(payload["explained_variance"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad PCA model file ({exc})") from exc
    gram = model.components @ model.components.T
    if not np.allclose(gram, np.eye(model.k), atol=1e-9):
        raise DataFormatError(f"{path}: component rows are not orthonormal")
    return model
