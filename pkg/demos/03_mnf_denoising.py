#!/usr/bin/env python3
"""MNF denoising on a planted low-rank scene.

The scene is a rank-2 smooth signal plus per-pixel noise. The eigenvalue
spectrum separates signal components (large) from noise components
(near 1), and truncated inversion beats full reconstruction against the
clean signal.
"""

import numpy as np

from hypermap import (
    RandomSource,
    SpectralCube,
    estimate_noise_covariance,
    fit_mnf,
    forward_mnf,
    inverse_mnf,
)

rs = RandomSource(3)
lines, samples, bands = 32, 32, 20

basis = rs.gaussians(2 * bands).reshape(2, bands)
xg, yg = np.meshgrid(np.linspace(0, 1, samples), np.linspace(0, 1, lines))
coeff = np.stack([3.0 * xg.ravel(), 2.0 * np.sin(4.0 * yg.ravel())], axis=1)
clean = (coeff @ basis).reshape(lines, samples, bands)
noise = 0.2 * rs.gaussians(lines * samples * bands).reshape(lines, samples, bands)

cube = SpectralCube(values=clean + noise,
                    wavelengths=np.linspace(450.0, 2400.0, bands),
                    bad_band_mask=np.ones(bands, dtype=bool),
                    units_tag="reflectance")

model = fit_mnf(cube, estimate_noise_covariance(cube))
print("leading MNF eigenvalues (signal-to-noise per component):")
print(np.round(model.eigenvalues[:6], 2), "...")
print("trailing eigenvalues hover near 1 (pure noise):",
      np.round(model.eigenvalues[-4:], 2))

mnf_cube = forward_mnf(model, cube)
for keep_k in (2, 5, bands):
    restored = inverse_mnf(model, mnf_cube, keep_k=keep_k)
    err = np.sqrt(np.mean((restored.values - clean) ** 2))
    print(f"keep_k={keep_k:2d}: RMS error to clean signal = {err:.4f}")
print("(the noise floor is 0.2; truncation removes most of it)")
