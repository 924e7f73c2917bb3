#!/usr/bin/env python3
"""Radiance to reflectance: gains, bad bands, and scene-relative scaling.

Simulates a radiance cube with an illumination curve and a dead band,
then walks it through the preprocessing chain: per-band gains, bad-band
removal, internal-average-relative reflectance, and standardization.
"""

import numpy as np

from hypermap import (
    SpectralCube,
    reflectance_iarr,
    remove_bad_bands,
    scale_radiance,
    standardize,
)

rng = np.random.default_rng(2)
bands = 8
wavelengths = np.linspace(450.0, 2450.0, bands)

# true reflectances modulated by a smooth illumination curve
illumination = 120.0 * np.exp(-0.5 * ((wavelengths - 900.0) / 800.0) ** 2)
reflectance = rng.uniform(0.2, 0.8, size=(16, 16, bands))
radiance = reflectance * illumination
radiance[:, :, 5] = 0.0  # dead detector band

cube = SpectralCube(values=radiance, wavelengths=wavelengths,
                    bad_band_mask=np.ones(bands, dtype=bool),
                    units_tag="radiance")
print("input radiance range:", np.round([cube.values.min(), cube.values.max()], 2))

cube = scale_radiance(cube, np.full(bands, 40.0))
print("after gain division:  ", np.round([cube.values.min(), cube.values.max()], 2))

keep = np.ones(bands, dtype=bool)
keep[5] = False
cube = remove_bad_bands(cube, keep)
print(f"bad band removed: {bands} -> {cube.bands} bands")

cube = reflectance_iarr(cube)
print("IARR reflectance range:", np.round([cube.values.min(), cube.values.max()], 3))
print("scene mean per band (should be ~1):",
      np.round(cube.pixels().mean(axis=0), 6))

standardized, means, stds = standardize(cube)
flat = standardized.pixels()
print("standardized band means:", np.round(flat.mean(axis=0), 12))
print("standardized band stds: ", np.round(flat.std(axis=0), 12))
