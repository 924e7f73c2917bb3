#!/usr/bin/env python3
"""Endmember derivation: cluster pure pixels, average their reflectance.

Plants four noisy endmember populations, clusters them in a toy MNF
space with seeded k-means, and compares every derived class mean to the
planted spectrum it should recover.
"""

import numpy as np

from hypermap import RandomSource, SpectralCube, derive_endmembers, sam_angle
from hypermap.synthcube import synthetic_mineral_library

rs = RandomSource(5)
library = synthetic_mineral_library(4, seed=12)
endmembers = np.stack([e.reflectance for e in library.entries])
k, bands = endmembers.shape

lines = samples = 10
reflectance = np.zeros((lines, samples, bands))
mnf_like = np.zeros((lines, samples, k))
pure_pixels = []
for i in range(lines * samples):
    line, sample = divmod(i, samples)
    which = i % k
    noise = 0.005 * rs.gaussians(bands)
    reflectance[line, sample] = endmembers[which] + noise
    mnf_like[line, sample, which] = 8.0 + rs.next_gaussian() * 0.2
    pure_pixels.append((line, sample))

corrected = SpectralCube(values=reflectance,
                         wavelengths=library.entries[0].wavelengths,
                         bad_band_mask=np.ones(bands, dtype=bool),
                         units_tag="reflectance")
mnf_cube = SpectralCube(values=mnf_like, wavelengths=np.arange(1.0, k + 1),
                        bad_band_mask=np.ones(k, dtype=bool),
                        units_tag="mnf_component")

es = derive_endmembers(corrected, mnf_cube, pure_pixels, k=k, seed=7)
print(f"derived {es.k} classes; member counts: {es.member_counts.tolist()}")
print()
for name, spectrum in zip(library.names(), endmembers):
    angles = [sam_angle(mean, spectrum) for mean in es.reflectance_means]
    best = int(np.argmin(angles))
    print(f"{name}: closest class {best + 1}, SAM angle {angles[best]:.5f} rad")
