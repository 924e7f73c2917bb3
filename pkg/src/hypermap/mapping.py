"""Whole-image mapping: SAM classification, matched filtering, MTMF
infeasibility, and class statistics.

The matched filter is scene-adaptive: background mean and covariance are
estimated from the cube being scored, giving 0 at the background mean
and 1 at the target by construction. MTMF adds an infeasibility score
that grows with the component of a pixel orthogonal (in whitened space)
to the background-to-target line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .endmember import EndmemberSet
from .envi_io import SpectralCube
from .numerics import symmetric_eig

_RIDGE = 1e-10

# Residual std shrinks linearly from 1 at the background to this at the
# target when scaling MTMF infeasibility.
_TARGET_RESIDUAL_STD = 0.01


@dataclass
class ClassMap:
    """Per-pixel class assignment (0 = unclassified) and rule angles."""

    class_index: np.ndarray
    rule_angles: np.ndarray
    max_angle: float
    n_classes: int

    def __post_init__(self):
        self.class_index = np.asarray(self.class_index, dtype=np.int32)
        if self.class_index.ndim != 2:
            raise ValueError("class_index must be 2-D")
        if self.rule_angles.shape != self.class_index.shape + (self.n_classes,):
            raise ValueError("rule_angles must be (lines, samples, n_classes)")


@dataclass
class MtmfResult:
    """Matched-filter score and infeasibility per pixel."""

    mf_score: np.ndarray
    infeasibility: np.ndarray


def sam_classify(cube: SpectralCube, endmembers: EndmemberSet,
                 max_angle: float = 0.10) -> ClassMap:
    """Assign each pixel to the endmember with the smallest spectral angle.

    Pixels whose best angle exceeds `max_angle` stay unclassified (0);
    exact ties go to the lowest class id. Zero-norm pixels get angle
    pi/2 to every class and therefore stay unclassified.
    """
    spectra = endmembers.reflectance_means
    if spectra.shape[1] != cube.bands:
        raise ValueError(
            f"endmember spectra have {spectra.shape[1]} bands, cube has {cube.bands}")
    if max_angle < 0:
        raise ValueError("max_angle must be non-negative")
    x = cube.pixels()
    xn = np.linalg.norm(x, axis=1)
    en = np.linalg.norm(spectra, axis=1)
    if np.any(en == 0.0):
        raise ValueError("endmember spectra must be nonzero")
    safe_xn = np.where(xn == 0.0, 1.0, xn)
    cos = (x @ spectra.T) / (safe_xn[:, None] * en[None, :])
    cos[xn == 0.0, :] = 0.0
    angles = np.arccos(np.clip(cos, -1.0, 1.0))

    best = np.argmin(angles, axis=1)
    best_angle = angles[np.arange(x.shape[0]), best]
    assigned = np.where(best_angle <= max_angle, best + 1, 0).astype(np.int32)

    shape = (cube.lines, cube.samples)
    return ClassMap(class_index=assigned.reshape(shape),
                    rule_angles=angles.reshape(shape + (endmembers.k,)),
                    max_angle=max_angle, n_classes=endmembers.k)


def _background_stats(cube: SpectralCube):
    x = cube.pixels()
    mu = x.mean(axis=0)
    centered = x - mu
    cov = centered.T @ centered / max(x.shape[0] - 1, 1)
    b = cube.bands
    vals, vecs = symmetric_eig(cov + np.eye(b) * (_RIDGE * np.trace(cov) / b))
    if vals[-1] <= 0.0:
        raise ValueError("background covariance is singular beyond repair")
    return x, mu, vals, vecs


def matched_filter(mnf_cube: SpectralCube, target_mnf) -> np.ndarray:
    """Matched-filter score image: 0 at the scene mean, 1 at the target.

    MF(x) = (x - mu)^T S^-1 (t - mu) / ((t - mu)^T S^-1 (t - mu)) with mu
    and S estimated from the cube itself; S is inverted through its
    eigendecomposition with a small ridge.
    """
    target = np.asarray(target_mnf, dtype=np.float64)
    if target.shape != (mnf_cube.bands,):
        raise ValueError(
            f"target has {target.size} components, cube has {mnf_cube.bands}")
    x, mu, vals, vecs = _background_stats(mnf_cube)
    d = target - mu
    w = vecs @ ((vecs.T @ d) / vals)
    denom = float(d @ w)
    if denom <= 0.0:
        raise ValueError("target coincides with the scene mean")
    scores = (x - mu) @ w / denom
    return scores.reshape(mnf_cube.lines, mnf_cube.samples)


def mtmf(mnf_cube: SpectralCube, target_mnf) -> MtmfResult:
    """Matched filter plus mixture-tuned infeasibility.

    In background-whitened space each pixel splits into a component along
    the unit target direction and an orthogonal residual r. The expected
    residual std shrinks linearly from 1 (background) to 0.01 (target) as
    the MF score goes 0 to 1, and infeasibility is |r| in units of that
    std: infeasibility = |r| / (std(mf) * sqrt(b - 1)).
    """
    target = np.asarray(target_mnf, dtype=np.float64)
    if target.shape != (mnf_cube.bands,):
        raise ValueError(
            f"target has {target.size} components, cube has {mnf_cube.bands}")
    b = mnf_cube.bands
    if b < 2:
        raise ValueError("MTMF needs at least 2 components")
    x, mu, vals, vecs = _background_stats(mnf_cube)

    inv_sqrt = 1.0 / np.sqrt(vals)
    whiten = inv_sqrt[:, None] * vecs.T
    tw = whiten @ (target - mu)
    t_norm = float(np.linalg.norm(tw))
    if t_norm == 0.0:
        raise ValueError("target coincides with the scene mean")
    t_hat = tw / t_norm

    p = (x - mu) @ whiten.T
    alpha = p @ t_hat
    mf = alpha / t_norm
    residual = p - alpha[:, None] * t_hat[None, :]
    r_norm = np.linalg.norm(residual, axis=1)

    sigma = 1.0 + (np.clip(mf, 0.0, 1.0)) * (_TARGET_RESIDUAL_STD - 1.0)
    infeasibility = r_norm / (sigma * np.sqrt(b - 1.0))

    shape = (mnf_cube.lines, mnf_cube.samples)
    return MtmfResult(mf_score=mf.reshape(shape),
                      infeasibility=infeasibility.reshape(shape))


def class_statistics(class_map: ClassMap) -> list[tuple[int, int, float]]:
    """Rows of (class_id, pixel_count, percent) for classes 0..k."""
    total = class_map.class_index.size
    rows = []
    for cid in range(class_map.n_classes + 1):
        count = int(np.count_nonzero(class_map.class_index == cid))
        rows.append((cid, count, 100.0 * count / total))
    return rows


def class_statistics_csv(class_map: ClassMap) -> str:
    """CSV of :func:`class_statistics`: class_id,pixel_count,percent."""
    rows = ["class_id,pixel_count,percent"]
    for cid, count, percent in class_statistics(class_map):
        rows.append(f"{cid},{count},{percent:.6f}")
    return "\n".join(rows) + "\n"
