"""Minimum Noise Fraction transform with shift-difference noise estimation.

The transform whitens the estimated noise, then rotates into the
eigenbasis of the noise-whitened data covariance, ordering components by
signal-to-noise instead of raw variance. In the output space the noise
covariance is (up to estimation error) the identity, which is what makes
a fixed PPI threshold meaningful in sigma-like units.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .envi_io import SpectralCube
from .numerics import check_symmetric, symmetric_eig

_RIDGE = 1e-10


@dataclass
class NoiseEstimate:
    """Noise covariance plus the estimator it came from."""

    cov: np.ndarray
    method_tag: str = "shift_difference_horizontal"

    def __post_init__(self):
        self.cov = check_symmetric(self.cov)
        values = np.linalg.eigvalsh(self.cov)
        if values.min() < -1e-10 * max(1.0, float(values.max())):
            raise ValueError("noise covariance is not positive semi-definite")


@dataclass
class MnfModel:
    """Fitted statistics and the forward/inverse component transforms.

    Rows of `forward` are MNF components ordered by descending eigenvalue;
    `forward @ inverse` is the identity to ~1e-8.
    """

    band_mean: np.ndarray
    noise_cov: np.ndarray
    data_cov: np.ndarray
    eigenvalues: np.ndarray
    forward: np.ndarray
    inverse: np.ndarray
    source_units_tag: str = "reflectance"
    source_wavelengths: np.ndarray | None = None

    @property
    def bands(self) -> int:
        return self.band_mean.size


def estimate_noise_covariance(cube: SpectralCube) -> NoiseEstimate:
    """Estimate noise from horizontal neighbor differences.

    d(line, s) = (x(line, s) - x(line, s+1)) / sqrt(2); the covariance of
    these difference vectors estimates the per-band noise covariance when
    the underlying signal varies slowly along a line.
    """
    if cube.samples < 2:
        raise ValueError("noise estimation needs at least 2 samples per line")
    diffs = (cube.values[:, :-1, :] - cube.values[:, 1:, :]) / np.sqrt(2.0)
    d = diffs.reshape(-1, cube.bands)
    centered = d - d.mean(axis=0)
    denom = max(d.shape[0] - 1, 1)
    cov = centered.T @ centered / denom
    return NoiseEstimate(cov=cov)


def fit_mnf(cube: SpectralCube, noise: NoiseEstimate) -> MnfModel:
    """Fit the MNF model: noise whitening followed by a variance rotation.

    Steps:
      1. Ridge-regularize the noise covariance (1e-10 * trace / b on the
         diagonal) and eigendecompose it.
      2. Whiten: W = diag(1/sqrt(ln)) @ Un^T, so W N W^T = I.
      3. Eigendecompose the whitened data covariance W D W^T = V L V^T.
      4. forward = V^T W; inverse = Un @ diag(sqrt(ln)) @ V.

    Eigenvalues are the whitened-data eigenvalues, descending; values near
    1 indicate noise-only components.
    """
    b = cube.bands
    noise_cov = check_symmetric(noise.cov)
    if noise_cov.shape != (b, b):
        raise ValueError(f"noise covariance is {noise_cov.shape}, cube has {b} bands")

    flat = cube.pixels()
    band_mean = flat.mean(axis=0)
    centered = flat - band_mean
    data_cov = centered.T @ centered / max(flat.shape[0] - 1, 1)

    ridge = _RIDGE * np.trace(noise_cov) / b
    regularized = noise_cov + np.eye(b) * ridge
    noise_vals, noise_vecs = symmetric_eig(regularized)
    if noise_vals[-1] <= 0.0:
        raise ValueError("noise covariance is numerically singular beyond repair")

    inv_sqrt = 1.0 / np.sqrt(noise_vals)
    whiten = inv_sqrt[:, None] * noise_vecs.T
    whitened_data_cov = whiten @ data_cov @ whiten.T
    # The triple product picks up ~eps asymmetry; restore it before solving.
    whitened_data_cov = 0.5 * (whitened_data_cov + whitened_data_cov.T)
    eigenvalues, v = symmetric_eig(whitened_data_cov)

    forward = v.T @ whiten
    inverse = noise_vecs @ (np.sqrt(noise_vals)[:, None] * v)

    return MnfModel(band_mean=band_mean, noise_cov=noise_cov, data_cov=data_cov,
                    eigenvalues=eigenvalues, forward=forward, inverse=inverse,
                    source_units_tag=cube.units_tag,
                    source_wavelengths=cube.wavelengths.copy())


def forward_mnf(model: MnfModel, cube: SpectralCube) -> SpectralCube:
    """Project a cube into MNF component space, descending eigenvalue order."""
    if cube.bands != model.bands:
        raise ValueError(f"cube has {cube.bands} bands, model expects {model.bands}")
    flat = cube.pixels() - model.band_mean
    components = flat @ model.forward.T
    values = components.reshape(cube.lines, cube.samples, model.bands)
    return SpectralCube(values=values,
                        wavelengths=np.arange(1, model.bands + 1, dtype=np.float64),
                        bad_band_mask=np.ones(model.bands, dtype=bool),
                        units_tag="mnf_component")


def inverse_mnf(model: MnfModel, mnf_cube: SpectralCube, keep_k: int) -> SpectralCube:
    """Reconstruct from the first `keep_k` MNF components (the rest zeroed)."""
    if mnf_cube.bands != model.bands:
        raise ValueError(f"cube has {mnf_cube.bands} bands, model expects {model.bands}")
    if not 1 <= keep_k <= model.bands:
        raise ValueError(f"keep_k must be in 1..{model.bands}, got {keep_k}")
    components = mnf_cube.pixels().copy()
    components[:, keep_k:] = 0.0
    flat = components @ model.inverse.T + model.band_mean
    values = flat.reshape(mnf_cube.lines, mnf_cube.samples, model.bands)
    wavelengths = model.source_wavelengths
    if wavelengths is None:
        wavelengths = np.arange(1, model.bands + 1, dtype=np.float64)
    return SpectralCube(values=values, wavelengths=wavelengths,
                        bad_band_mask=np.ones(model.bands, dtype=bool),
                        units_tag=model.source_units_tag)


# ---------------------------------------------------------------------------
# CSV bundle persistence (pipeline restarts)


def _write_matrix_csv(path: str, m: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        for row in np.atleast_2d(m):
            writer.writerow([repr(float(v)) for v in row])


def _read_matrix_csv(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fp:
        rows = [[float(c) for c in row] for row in csv.reader(fp) if row]
    return np.asarray(rows, dtype=np.float64)


def save_mnf_model(model: MnfModel, directory) -> None:
    """Write the model as a CSV bundle under `directory`."""
    directory = str(directory)
    os.makedirs(directory, exist_ok=True)
    _write_matrix_csv(os.path.join(directory, "mean.csv"), model.band_mean)
    _write_matrix_csv(os.path.join(directory, "eigenvalues.csv"), model.eigenvalues)
    _write_matrix_csv(os.path.join(directory, "forward.csv"), model.forward)
    _write_matrix_csv(os.path.join(directory, "inverse.csv"), model.inverse)
    _write_matrix_csv(os.path.join(directory, "noise_cov.csv"), model.noise_cov)
    _write_matrix_csv(os.path.join(directory, "data_cov.csv"), model.data_cov)
    if model.source_wavelengths is not None:
        _write_matrix_csv(os.path.join(directory, "wavelengths.csv"),
                          model.source_wavelengths)
    with open(os.path.join(directory, "meta.csv"), "w", encoding="utf-8") as fp:
        fp.write("key,value\nsource_units_tag,%s\n" % model.source_units_tag)


def load_mnf_model(directory) -> MnfModel:
    """Read back a CSV bundle written by :func:`save_mnf_model`."""
    directory = str(directory)
    units = "reflectance"
    meta_path = os.path.join(directory, "meta.csv")
    if os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as fp:
            for row in csv.reader(fp):
                if row and row[0] == "source_units_tag":
                    units = row[1]
    wl_path = os.path.join(directory, "wavelengths.csv")
    wavelengths = _read_matrix_csv(wl_path).ravel() if os.path.exists(wl_path) else None
    return MnfModel(
        band_mean=_read_matrix_csv(os.path.join(directory, "mean.csv")).ravel(),
        noise_cov=_read_matrix_csv(os.path.join(directory, "noise_cov.csv")),
        data_cov=_read_matrix_csv(os.path.join(directory, "data_cov.csv")),
        eigenvalues=_read_matrix_csv(os.path.join(directory, "eigenvalues.csv")).ravel(),
        forward=_read_matrix_csv(os.path.join(directory, "forward.csv")),
        inverse=_read_matrix_csv(os.path.join(directory, "inverse.csv")),
        source_units_tag=units, source_wavelengths=wavelengths)
