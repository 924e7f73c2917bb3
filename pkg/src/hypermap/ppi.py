"""Pixel Purity Index: count how often each pixel is an extreme of random
1-D projections (skewers) of the MNF data cloud.

Each skewer direction comes from its own spawned child stream keyed by
the iteration index, so the count image is identical for any worker
count; workers only change how the iteration range is partitioned.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .envi_io import SpectralCube
from .numerics import spawned_gaussians

_CHUNK = 256


@dataclass(frozen=True)
class PpiParams:
    n_iterations: int = 10000
    threshold: float = 2.5
    seed: int = 0

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be at least 1")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")


@dataclass
class PpiImage:
    """Per-pixel extremity counts plus the parameters that produced them."""

    counts: np.ndarray
    params: PpiParams
    trace: list[int] | None = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2:
            raise ValueError("counts must be a (lines, samples) grid")
        if self.counts.min() < 0 or self.counts.max() > 2 * self.params.n_iterations:
            raise ValueError("counts outside [0, 2 * n_iterations]")


def _skewer_directions(seed: int, start: int, stop: int, k: int) -> np.ndarray:
    g = spawned_gaussians(seed, start, stop, k)
    norms = np.linalg.norm(g, axis=1)
    if np.any(norms == 0.0):
        raise RuntimeError("degenerate zero-length skewer draw")
    return g / norms[:, None]


def run_ppi(mnf_cube: SpectralCube, params: PpiParams | None = None,
            use_k_components: int | None = None, n_workers: int = 1,
            progress=None, trace: bool = False) -> PpiImage:
    """Run the PPI over `params.n_iterations` random skewers.

    Per skewer: project all pixels (restricted to the first
    `use_k_components` MNF components) onto a random unit direction and
    increment every pixel whose projection lies within `params.threshold`
    of the maximum, and likewise of the minimum. Deterministic for a
    fixed seed regardless of `n_workers`.

    `progress`, if given, is called with the cumulative iteration count
    after each processed chunk. With `trace=True` the returned image also
    carries, per iteration, the cumulative number of distinct pixels
    counted at least once.
    """
    if params is None:
        params = PpiParams()
    k = mnf_cube.bands if use_k_components is None else int(use_k_components)
    if not 1 <= k <= mnf_cube.bands:
        raise ValueError(f"use_k_components must be in 1..{mnf_cube.bands}, got {k}")
    if n_workers < 1:
        raise ValueError("n_workers must be at least 1")

    pixels = np.ascontiguousarray(mnf_cube.pixels()[:, :k])
    n_pixels = pixels.shape[0]
    n_iter = params.n_iterations
    chunks = [(s, min(s + _CHUNK, n_iter)) for s in range(0, n_iter, _CHUNK)]

    def process(bounds):
        start, stop = bounds
        dirs = _skewer_directions(params.seed, start, stop, k)
        proj = pixels @ dirs.T
        hi = proj >= (proj.max(axis=0) - params.threshold)
        lo = proj <= (proj.min(axis=0) + params.threshold)
        counts = hi.sum(axis=1, dtype=np.int64) + lo.sum(axis=1, dtype=np.int64)
        touched = (hi | lo) if trace else None
        return counts, touched

    totals = np.zeros(n_pixels, dtype=np.int64)
    trace_values: list[int] = []
    seen = np.zeros(n_pixels, dtype=bool) if trace else None
    done = 0

    if n_workers == 1:
        results = map(process, chunks)
    else:
        pool = ThreadPoolExecutor(max_workers=n_workers)
        results = pool.map(process, chunks)

    # Chunk boundaries are fixed, so accumulating in submission order makes
    # the output independent of scheduling.
    for (start, stop), (counts, touched) in zip(chunks, results):
        totals += counts
        if trace:
            for j in range(stop - start):
                seen |= touched[:, j]
                trace_values.append(int(seen.sum()))
        done = stop
        if progress is not None:
            progress(done)
    if n_workers > 1:
        pool.shutdown()

    image = totals.reshape(mnf_cube.lines, mnf_cube.samples)
    return PpiImage(counts=image, params=params,
                    trace=trace_values if trace else None)


def select_pure_pixels(ppi: PpiImage, min_count: int = 1,
                       max_pixels: int = 10000) -> list[tuple[int, int]]:
    """Pixels with count >= min_count, by count descending then raster
    order, truncated to `max_pixels`."""
    samples = ppi.counts.shape[1]
    flat = ppi.counts.ravel()
    keep = np.flatnonzero(flat >= min_count)
    if keep.size == 0:
        return []
    line_idx, sample_idx = np.divmod(keep, samples)
    order = np.lexsort((sample_idx, line_idx, -flat[keep]))
    chosen = keep[order][:max_pixels]
    return [(int(i // samples), int(i % samples)) for i in chosen]


def pure_pixels_csv(ppi: PpiImage, pixels: list[tuple[int, int]]) -> str:
    """CSV of selected pure pixels: line,sample,count."""
    lines = ["line,sample,count"]
    for line, sample in pixels:
        lines.append(f"{line},{sample},{int(ppi.counts[line, sample])}")
    return "\n".join(lines) + "\n"


def read_pure_pixels_csv(text: str) -> list[tuple[int, int]]:
    """Read back a pure-pixel CSV written by :func:`pure_pixels_csv`."""
    rows = [r for r in csv.reader(text.splitlines()) if r]
    if not rows or rows[0][:2] != ["line", "sample"]:
        raise ValueError("expected CSV header 'line,sample,count'")
    return [(int(r[0]), int(r[1])) for r in rows[1:]]


def trace_csv(ppi: PpiImage) -> str:
    """CSV of the cumulative pure-pixel total per iteration."""
    if ppi.trace is None:
        raise ValueError("PPI image carries no trace; rerun with trace=True")
    lines = ["iteration,cumulative_pure_pixels"]
    for i, v in enumerate(ppi.trace, start=1):
        lines.append(f"{i},{v}")
    return "\n".join(lines) + "\n"
