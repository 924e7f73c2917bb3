#!/usr/bin/env python3
"""ENVI cube I/O: one cube, three interleaves, identical contents.

Builds a small cube, serializes it as BSQ, BIL and BIP, and reads each
back to show the interleave only affects the byte layout.
"""

import numpy as np

from hypermap import SpectralCube, parse_envi_header, read_cube, write_cube

rng = np.random.default_rng(1)
values = rng.uniform(0.1, 0.9, size=(3, 4, 5))
cube = SpectralCube(values=values,
                    wavelengths=np.linspace(450.0, 850.0, 5),
                    bad_band_mask=np.ones(5, dtype=bool),
                    units_tag="reflectance")

print(f"cube: {cube.samples} samples x {cube.lines} lines x {cube.bands} bands")

payloads = {}
for interleave in ("bsq", "bil", "bip"):
    header_text, payload = write_cube(cube, interleave=interleave, data_type="float32")
    payloads[interleave] = payload
    back = read_cube(parse_envi_header(header_text), payload)
    print(f"{interleave}: {len(payload)} payload bytes, "
          f"identical after read: {np.array_equal(back.values, cube.values)}")

print("\npayloads differ byte-wise between interleaves:",
      payloads["bsq"] != payloads["bil"] != payloads["bip"])

header_text, _ = write_cube(cube, interleave="bil", data_type="float32")
print("\nserialized header:")
print(header_text)
