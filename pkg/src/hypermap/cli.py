"""Staged pipeline driver.

Each stage reads the artifacts of the stages before it from the output
directory and persists its own under fixed names, so every intermediate
is inspectable and a run can resume anywhere. Invocation:

    hypermap <stage> --config <path> [--seed N] [--out DIR]

Stages: info, preprocess, mnf, ppi, endmembers, match, classify, mtmf,
synth, report, all. `hypermap init --out DIR` writes a default config
plus the stock Hyperion band-mask and gain tables. Exit codes: 0 ok,
2 config error, 3 missing-dependency error, 4 data error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .endmember import (
    EndmemberSet,
    derive_endmembers,
    endmember_library_csv,
    manifest_csv,
    mnf_means_csv,
    read_endmember_library_csv,
    read_mnf_means_csv,
)
from .envi_io import (
    SpectralCube,
    parse_envi_header,
    read_cube,
    read_spectral_library_file,
    write_cube_file,
)
from .mapping import class_statistics_csv, mtmf, sam_classify
from .mnf import estimate_noise_covariance, fit_mnf, forward_mnf, save_mnf_model
from .numerics import RandomSource
from .ppi import PpiParams, pure_pixels_csv, read_pure_pixels_csv, run_ppi, select_pure_pixels, trace_csv
from .preprocess import (
    Roi,
    read_band_mask_csv,
    read_gains_csv,
    reflectance_flat_field,
    reflectance_iarr,
    remove_bad_bands,
    scale_radiance,
    standardize,
    subset_roi,
)
from .spectral_match import AnalystWeights, rank_matches, rankings_csv, resample_library
from .synthcube import MixingScenario, generate, plant_pure_pixels, random_abundance_field

STAGES = ("info", "preprocess", "mnf", "ppi", "endmembers", "match",
          "classify", "mtmf", "synth", "report", "all")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_DATA = 4


class ConfigError(Exception):
    """Bad or missing configuration value."""


class DependencyError(Exception):
    """A prior stage's artifacts are missing."""


# ---------------------------------------------------------------------------
# configuration

_TRUE = ("true", "1", "yes")
_FALSE = ("false", "0", "no")


@dataclass
class PipelineConfig:
    input_header: str = "scene.hdr"
    input_image: str = "scene.img"
    band_mask_csv: str = ""
    gains_csv: str = ""
    library_csv: str = "library.csv"
    output_dir: str = "out"
    seed: int = 42

    roi_first_line: int = 0
    roi_first_sample: int = 0
    roi_n_lines: int = 0
    roi_n_samples: int = 0

    reflectance_method: str = "iarr"
    flat_field_first_line: int = 0
    flat_field_first_sample: int = 0
    flat_field_n_lines: int = 0
    flat_field_n_samples: int = 0
    standardize_before_mnf: bool = False

    mnf_keep_k: int = 48

    ppi_iterations: int = 10000
    ppi_threshold: float = 2.5
    ppi_min_count: int = 1
    ppi_max_pixels: int = 10000
    ppi_workers: int = 1
    ppi_trace: bool = True

    endmember_k: int = 48

    weight_sam: float = 1.0
    weight_sff: float = 1.0
    weight_be: float = 1.0

    sam_max_angle: float = 0.10

    synth_lines: int = 64
    synth_samples: int = 64
    synth_block_size: int = 1
    synth_noise_sigma: float = 0.0
    synth_noise_relative: float = 0.0
    synth_pure_per_endmember: int = 5
    synth_pure_plan_csv: str = ""
    synth_library_csv: str = ""
    synth_panel_lines: int = 0
    synth_panel_level: float = 1.0

    base_dir: str = "."

    def resolve(self, path: str) -> str:
        if not path:
            return path
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    @property
    def out(self) -> str:
        return self.resolve(self.output_dir)

    def artifact(self, name: str) -> str:
        return os.path.join(self.out, name)


_POSITIVE_INT = {"mnf_keep_k", "ppi_iterations", "ppi_min_count", "ppi_max_pixels",
                 "ppi_workers", "endmember_k", "synth_lines", "synth_samples",
                 "synth_block_size", "synth_pure_per_endmember"}
_NON_NEGATIVE_INT = {"roi_first_line", "roi_first_sample", "roi_n_lines",
                     "roi_n_samples", "flat_field_first_line", "flat_field_first_sample",
                     "flat_field_n_lines", "flat_field_n_samples", "seed",
                     "synth_panel_lines"}
_NON_NEGATIVE_FLOAT = {"ppi_threshold", "weight_sam", "weight_sff", "weight_be",
                       "sam_max_angle", "synth_noise_sigma", "synth_noise_relative"}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse `key = value` lines; `;` starts a comment; keys lowercased."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        key = " ".join(key.strip().lower().split())
        value = value.split(";", 1)[0].strip()
        out[key] = value
    return out


def config_from_text(text: str, base_dir: str = ".") -> PipelineConfig:
    raw = parse_config_text(text)
    cfg = PipelineConfig(base_dir=base_dir)
    known = {f.name for f in fields(PipelineConfig)}
    for key, value in raw.items():
        if key not in known or key == "base_dir":
            raise ConfigError(f"unknown config key '{key}'")
        current = getattr(cfg, key)
        try:
            if isinstance(current, bool):
                low = value.lower()
                if low in _TRUE:
                    parsed = True
                elif low in _FALSE:
                    parsed = False
                else:
                    raise ValueError
            elif isinstance(current, int):
                parsed = int(value)
            elif isinstance(current, float):
                parsed = float(value)
            else:
                parsed = value
        except ValueError:
            raise ConfigError(
                f"config key '{key}': cannot parse {value!r} as "
                f"{type(current).__name__}") from None
        setattr(cfg, key, parsed)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: PipelineConfig) -> None:
    for key in _POSITIVE_INT:
        if getattr(cfg, key) < 1:
            raise ConfigError(f"config key '{key}': must be an integer >= 1")
    for key in _NON_NEGATIVE_INT:
        if getattr(cfg, key) < 0:
            raise ConfigError(f"config key '{key}': must be an integer >= 0")
    for key in _NON_NEGATIVE_FLOAT:
        if getattr(cfg, key) < 0:
            raise ConfigError(f"config key '{key}': must be a number >= 0")
    if cfg.reflectance_method not in ("iarr", "flat_field"):
        raise ConfigError(
            "config key 'reflectance_method': must be 'iarr' or 'flat_field'")
    if max(cfg.weight_sam, cfg.weight_sff, cfg.weight_be) <= 0:
        raise ConfigError(
            "config keys 'weight_sam'/'weight_sff'/'weight_be': at least one must be > 0")
    if cfg.reflectance_method == "flat_field" and \
            (cfg.flat_field_n_lines < 1 or cfg.flat_field_n_samples < 1):
        raise ConfigError(
            "config keys 'flat_field_n_lines'/'flat_field_n_samples': must be >= 1 "
            "when reflectance_method = flat_field")
    if cfg.synth_panel_level <= 0:
        raise ConfigError("config key 'synth_panel_level': must be > 0")


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fp:
            text = fp.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    return config_from_text(text, base_dir=os.path.dirname(os.path.abspath(path)))


DEFAULT_CONFIG_NAME = "default.cfg"
HYPERION_BAND_MASK_NAME = "hyperion_bad_bands.csv"
HYPERION_GAINS_NAME = "hyperion_gains.csv"

HYPERION_BANDS = 242
# Stock calibrated-band keep list (1-based, inclusive) and radiance gains.
HYPERION_KEEP_RANGES = ((8, 57), (79, 224))
HYPERION_VNIR_GAIN = 40.0
HYPERION_SWIR_GAIN = 80.0
HYPERION_VNIR_LAST_BAND = 70


def default_config_text() -> str:
    cfg = PipelineConfig()
    lines = [
        "; hypermap pipeline configuration (generated defaults)",
        "",
        "; --- inputs ---",
        f"input_header = {cfg.input_header}",
        f"input_image = {cfg.input_image}",
        f"band_mask_csv = {HYPERION_BAND_MASK_NAME}",
        f"gains_csv = {HYPERION_GAINS_NAME}",
        f"library_csv = {cfg.library_csv}",
        f"output_dir = {cfg.output_dir}",
        f"seed = {cfg.seed}",
        "",
        "; --- spatial subset (0 extent = full scene) ---",
        f"roi_first_line = {cfg.roi_first_line}",
        f"roi_first_sample = {cfg.roi_first_sample}",
        f"roi_n_lines = {cfg.roi_n_lines}",
        f"roi_n_samples = {cfg.roi_n_samples}",
        "",
        "; --- reflectance retrieval ---",
        f"reflectance_method = {cfg.reflectance_method}   ; iarr | flat_field",
        f"flat_field_first_line = {cfg.flat_field_first_line}",
        f"flat_field_first_sample = {cfg.flat_field_first_sample}",
        f"flat_field_n_lines = {cfg.flat_field_n_lines}",
        f"flat_field_n_samples = {cfg.flat_field_n_samples}",
        f"standardize_before_mnf = {'true' if cfg.standardize_before_mnf else 'false'}",
        "",
        "; --- noise reduction ---",
        f"mnf_keep_k = {cfg.mnf_keep_k}",
        "",
        "; --- pure pixel search ---",
        f"ppi_iterations = {cfg.ppi_iterations}",
        f"ppi_threshold = {cfg.ppi_threshold}",
        f"ppi_min_count = {cfg.ppi_min_count}",
        f"ppi_max_pixels = {cfg.ppi_max_pixels}",
        f"ppi_workers = {cfg.ppi_workers}",
        f"ppi_trace = {'true' if cfg.ppi_trace else 'false'}",
        "",
        "; --- endmember clustering ---",
        f"endmember_k = {cfg.endmember_k}",
        "",
        "; --- spectral analyst weights ---",
        f"weight_sam = {cfg.weight_sam}",
        f"weight_sff = {cfg.weight_sff}",
        f"weight_be = {cfg.weight_be}",
        "",
        "; --- mapping ---",
        f"sam_max_angle = {cfg.sam_max_angle}",
        "",
        "; --- synthetic scene generation ---",
        f"synth_lines = {cfg.synth_lines}",
        f"synth_samples = {cfg.synth_samples}",
        f"synth_block_size = {cfg.synth_block_size}",
        f"synth_noise_sigma = {cfg.synth_noise_sigma}",
        f"synth_noise_relative = {cfg.synth_noise_relative}",
        f"synth_pure_per_endmember = {cfg.synth_pure_per_endmember}",
        f"synth_pure_plan_csv = {cfg.synth_pure_plan_csv}",
        f"synth_library_csv = {cfg.synth_library_csv}",
        f"synth_panel_lines = {cfg.synth_panel_lines}",
        f"synth_panel_level = {cfg.synth_panel_level}",
        "",
    ]
    return "\n".join(lines)


def hyperion_band_mask_csv() -> str:
    rows = ["band_index,keep"]
    for band in range(1, HYPERION_BANDS + 1):
        keep = any(lo <= band <= hi for lo, hi in HYPERION_KEEP_RANGES)
        rows.append(f"{band},{1 if keep else 0}")
    return "\n".join(rows) + "\n"


def hyperion_gains_csv() -> str:
    rows = ["band_index,gain"]
    for band in range(1, HYPERION_BANDS + 1):
        gain = HYPERION_VNIR_GAIN if band <= HYPERION_VNIR_LAST_BAND else HYPERION_SWIR_GAIN
        rows.append(f"{band},{gain:g}")
    return "\n".join(rows) + "\n"


def write_default_configs(directory: str) -> list[str]:
    """Write default.cfg plus the stock Hyperion band tables; returns paths."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for name, text in ((DEFAULT_CONFIG_NAME, default_config_text()),
                       (HYPERION_BAND_MASK_NAME, hyperion_band_mask_csv()),
                       (HYPERION_GAINS_NAME, hyperion_gains_csv())):
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8") as fp:
            fp.write(text)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# artifacts and dependencies

_STAGE_ARTIFACTS = {
    "preprocess": ("reflectance.hdr", "reflectance.img"),
    "mnf": ("mnf_cube.hdr", "mnf_cube.img", os.path.join("mnf_model", "forward.csv")),
    "ppi": ("ppi_counts.hdr", "ppi_counts.img", "pure_pixels.csv"),
    "endmembers": ("endmembers.csv", "endmember_manifest.csv", "endmember_mnf_means.csv"),
    "match": ("match_summary.csv",),
    "classify": ("sam_class_map.hdr", "sam_class_map.img", "class_statistics.csv",
                 "class_legend.csv"),
    "synth": ("truth_pure_pixels.csv",),
}


def _require(cfg: PipelineConfig, *producers: str) -> None:
    for producer in producers:
        for name in _STAGE_ARTIFACTS[producer]:
            path = cfg.artifact(name)
            if not os.path.exists(path):
                raise DependencyError(
                    f"missing artifact '{name}' from stage '{producer}'; "
                    f"run 'hypermap {producer}' first")


def _write_text(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(text)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fp:
        return fp.read()


def _single_band_cube(grid: np.ndarray, units: str = "score") -> SpectralCube:
    return SpectralCube(values=grid[:, :, None].astype(np.float64),
                        wavelengths=np.array([1.0]),
                        bad_band_mask=np.array([True]),
                        units_tag=units)


# ---------------------------------------------------------------------------
# stages


def _load_input_cube(cfg: PipelineConfig) -> SpectralCube:
    header_path = cfg.resolve(cfg.input_header)
    image_path = cfg.resolve(cfg.input_image)
    for path in (header_path, image_path):
        if not os.path.exists(path):
            raise ConfigError(f"input file {path!r} does not exist")
    with open(header_path, "r", encoding="utf-8") as fp:
        header = parse_envi_header(fp.read())
    with open(image_path, "rb") as fp:
        raw = fp.read()
    return read_cube(header, raw)


def stage_info(cfg: PipelineConfig) -> None:
    header_path = cfg.resolve(cfg.input_header)
    if not os.path.exists(header_path):
        raise ConfigError(f"input file {header_path!r} does not exist")
    with open(header_path, "r", encoding="utf-8") as fp:
        header = parse_envi_header(fp.read())
    print(f"input: {header_path}")
    print(f"dimensions: {header.samples} x {header.lines} x {header.bands} "
          "(samples x lines x bands)")
    print(f"interleave: {header.interleave}")
    print(f"data type: {header.data_type}")
    print(f"byte order: {header.byte_order}")
    print(f"wavelengths: {'present' if header.wavelengths else 'absent'}")
    if header.extra:
        print(f"extra keys: {', '.join(sorted(header.extra))}")


def stage_preprocess(cfg: PipelineConfig) -> None:
    cube = _load_input_cube(cfg)

    if cfg.gains_csv:
        gains = read_gains_csv(_read_text(cfg.resolve(cfg.gains_csv)), cube.bands)
        cube = scale_radiance(cube, gains)
    if cfg.band_mask_csv:
        keep = read_band_mask_csv(_read_text(cfg.resolve(cfg.band_mask_csv)), cube.bands)
        cube = remove_bad_bands(cube, keep)

    roi = None
    if cfg.roi_n_lines > 0 or cfg.roi_n_samples > 0:
        if cfg.roi_n_lines < 1 or cfg.roi_n_samples < 1:
            raise ConfigError(
                "config keys 'roi_n_lines'/'roi_n_samples': set both >= 1 or both 0")
        roi = Roi(cfg.roi_first_line, cfg.roi_first_sample,
                  cfg.roi_n_lines, cfg.roi_n_samples)

    if cfg.reflectance_method == "flat_field":
        # The flat-field region may lie outside the analysis ROI, so divide
        # on the full extent first and crop afterwards.
        field = Roi(cfg.flat_field_first_line, cfg.flat_field_first_sample,
                    cfg.flat_field_n_lines, cfg.flat_field_n_samples)
        cube = reflectance_flat_field(cube, field)
        if roi is not None:
            cube = subset_roi(cube, roi)
    else:
        if roi is not None:
            cube = subset_roi(cube, roi)
        cube = reflectance_iarr(cube)

    write_cube_file(cube, cfg.artifact("reflectance.hdr"))
    print(f"preprocess: wrote reflectance cube "
          f"{cube.samples} x {cube.lines} x {cube.bands}")


def stage_mnf(cfg: PipelineConfig) -> None:
    _require(cfg, "preprocess")
    cube = _read_artifact_cube(cfg, "reflectance.hdr")
    if not 1 <= cfg.mnf_keep_k <= cube.bands:
        raise ConfigError(
            f"config key 'mnf_keep_k': must be in 1..{cube.bands} for this cube")
    fit_input = cube
    if cfg.standardize_before_mnf:
        fit_input, means, stds = standardize(cube)
        stats = ["band,mean,std"]
        for i in range(means.size):
            stats.append(f"{i + 1},{repr(float(means[i]))},{repr(float(stds[i]))}")
        _write_text(cfg.artifact("band_stats.csv"), "\n".join(stats) + "\n")
    noise = estimate_noise_covariance(fit_input)
    model = fit_mnf(fit_input, noise)
    mnf_cube = forward_mnf(model, fit_input)
    save_mnf_model(model, cfg.artifact("mnf_model"))
    write_cube_file(mnf_cube, cfg.artifact("mnf_cube.hdr"))
    print(f"mnf: eigenvalue range [{model.eigenvalues[-1]:.4g}, "
          f"{model.eigenvalues[0]:.4g}], keep_k = {cfg.mnf_keep_k}")


def _read_artifact_cube(cfg: PipelineConfig, header_name: str) -> SpectralCube:
    with open(cfg.artifact(header_name), "r", encoding="utf-8") as fp:
        header = parse_envi_header(fp.read())
    with open(cfg.artifact(header_name[:-4] + ".img"), "rb") as fp:
        raw = fp.read()
    return read_cube(header, raw)


def stage_ppi(cfg: PipelineConfig) -> None:
    _require(cfg, "mnf")
    mnf_cube = _read_artifact_cube(cfg, "mnf_cube.hdr")
    if not 1 <= cfg.mnf_keep_k <= mnf_cube.bands:
        raise ConfigError(
            f"config key 'mnf_keep_k': must be in 1..{mnf_cube.bands} for this cube")
    params = PpiParams(n_iterations=cfg.ppi_iterations,
                       threshold=cfg.ppi_threshold, seed=cfg.seed)
    image = run_ppi(mnf_cube, params, use_k_components=cfg.mnf_keep_k,
                    n_workers=cfg.ppi_workers, trace=cfg.ppi_trace)
    pixels = select_pure_pixels(image, min_count=cfg.ppi_min_count,
                                max_pixels=cfg.ppi_max_pixels)
    write_cube_file(_single_band_cube(image.counts), cfg.artifact("ppi_counts.hdr"),
                    data_type="int32")
    _write_text(cfg.artifact("pure_pixels.csv"), pure_pixels_csv(image, pixels))
    if cfg.ppi_trace:
        _write_text(cfg.artifact("ppi_trace.csv"), trace_csv(image))
    nonzero = int(np.count_nonzero(image.counts))
    print(f"ppi: {nonzero} pixels counted at least once; "
          f"{len(pixels)} selected as pure candidates")


def stage_endmembers(cfg: PipelineConfig) -> None:
    _require(cfg, "preprocess", "mnf", "ppi")
    corrected = _read_artifact_cube(cfg, "reflectance.hdr")
    mnf_cube = _read_artifact_cube(cfg, "mnf_cube.hdr")
    pixels = read_pure_pixels_csv(_read_text(cfg.artifact("pure_pixels.csv")))
    if not pixels:
        raise ValueError("no pure pixels were selected; lower ppi_min_count")
    es = derive_endmembers(corrected, mnf_cube, pixels, k=cfg.endmember_k,
                           seed=cfg.seed, use_k_components=cfg.mnf_keep_k)
    _write_text(cfg.artifact("endmembers.csv"), endmember_library_csv(es))
    _write_text(cfg.artifact("endmember_manifest.csv"), manifest_csv(es))
    _write_text(cfg.artifact("endmember_mnf_means.csv"), mnf_means_csv(es))
    print(f"endmembers: derived {es.k} classes from {len(pixels)} pure pixels")


def _load_endmember_arrays(cfg: PipelineConfig):
    names, wavelengths, spectra = read_endmember_library_csv(
        _read_text(cfg.artifact("endmembers.csv")))
    return names, wavelengths, spectra


def stage_match(cfg: PipelineConfig) -> None:
    _require(cfg, "endmembers")
    library_path = cfg.resolve(cfg.library_csv)
    if not os.path.exists(library_path):
        raise ConfigError(f"library file {library_path!r} does not exist")
    lib = read_spectral_library_file(library_path)
    _, wavelengths, spectra = _load_endmember_arrays(cfg)
    resampled = resample_library(lib, wavelengths)
    weights = AnalystWeights(cfg.weight_sam, cfg.weight_sff, cfg.weight_be)

    summary = ["class_id,top_mineral,weighted_score"]
    for class_id, unknown in enumerate(spectra, start=1):
        scores = rank_matches(unknown, resampled, weights)
        _write_text(cfg.artifact(f"match_class_{class_id}.csv"), rankings_csv(scores))
        summary.append(f"{class_id},{scores[0].mineral_name},{scores[0].weighted:.6f}")
    _write_text(cfg.artifact("match_summary.csv"), "\n".join(summary) + "\n")
    print(f"match: ranked {len(resampled.entries)} library entries "
          f"against {len(spectra)} classes")


def _read_match_summary(cfg: PipelineConfig) -> dict[int, tuple[str, float]]:
    rows = [r for r in csv.reader(_read_text(cfg.artifact("match_summary.csv")).splitlines()) if r]
    out: dict[int, tuple[str, float]] = {}
    for row in rows[1:]:
        out[int(row[0])] = (row[1], float(row[2]))
    return out


def _endmember_set_for_mapping(cfg: PipelineConfig):
    """Rebuild a minimal EndmemberSet view from persisted artifacts.

    Source pixel positions are not persisted, so placeholder positions
    stand in; mapping only needs the spectra and counts.
    """
    _, wavelengths, spectra = _load_endmember_arrays(cfg)
    mnf_means = read_mnf_means_csv(_read_text(cfg.artifact("endmember_mnf_means.csv")))
    counts_rows = [r for r in csv.reader(
        _read_text(cfg.artifact("endmember_manifest.csv")).splitlines()) if r]
    counts = np.array([int(r[1]) for r in counts_rows[1:]], dtype=np.int64)
    k = spectra.shape[0]
    placeholder = [[(0, 0)] * int(c) for c in counts]
    return EndmemberSet(k=k, mnf_means=mnf_means, reflectance_means=spectra,
                        member_counts=counts, source_pixels=placeholder,
                        wavelengths=wavelengths)


def stage_classify(cfg: PipelineConfig) -> None:
    _require(cfg, "preprocess", "endmembers", "match")
    corrected = _read_artifact_cube(cfg, "reflectance.hdr")
    es = _endmember_set_for_mapping(cfg)
    cmap = sam_classify(corrected, es, max_angle=cfg.sam_max_angle)
    write_cube_file(_single_band_cube(cmap.class_index.astype(np.float64)),
                    cfg.artifact("sam_class_map.hdr"), data_type="int32")
    _write_text(cfg.artifact("class_statistics.csv"), class_statistics_csv(cmap))

    top = _read_match_summary(cfg)
    legend = ["class_id,matched_mineral,weighted_score"]
    for cid in range(1, es.k + 1):
        mineral, score = top.get(cid, ("", 0.0))
        legend.append(f"{cid},{mineral},{score:.6f}")
    _write_text(cfg.artifact("class_legend.csv"), "\n".join(legend) + "\n")
    classified = int(np.count_nonzero(cmap.class_index))
    print(f"classify: {classified}/{cmap.class_index.size} pixels classified "
          f"at max angle {cfg.sam_max_angle}")


def stage_mtmf(cfg: PipelineConfig) -> None:
    _require(cfg, "mnf", "endmembers")
    mnf_cube = _read_artifact_cube(cfg, "mnf_cube.hdr")
    mnf_means = read_mnf_means_csv(_read_text(cfg.artifact("endmember_mnf_means.csv")))
    d = mnf_means.shape[1]
    if d > mnf_cube.bands:
        raise ValueError("endmember MNF means have more components than the cube")
    truncated = SpectralCube(values=mnf_cube.values[:, :, :d],
                             wavelengths=mnf_cube.wavelengths[:d],
                             bad_band_mask=mnf_cube.bad_band_mask[:d],
                             units_tag=mnf_cube.units_tag)
    for class_id in range(1, mnf_means.shape[0] + 1):
        result = mtmf(truncated, mnf_means[class_id - 1])
        stacked = np.stack([result.mf_score, result.infeasibility], axis=2)
        cube = SpectralCube(values=stacked, wavelengths=np.array([1.0, 2.0]),
                            bad_band_mask=np.array([True, True]), units_tag="score")
        write_cube_file(cube, cfg.artifact(f"mtmf_class_{class_id}.hdr"))
    print(f"mtmf: wrote MF/infeasibility images for {mnf_means.shape[0]} classes")


def _read_plan_csv(text: str) -> list[tuple[int, int, int]]:
    rows = [r for r in csv.reader(text.splitlines()) if r]
    if not rows or rows[0][:3] != ["line", "sample", "endmember_index"]:
        raise ValueError("expected CSV header 'line,sample,endmember_index'")
    return [(int(r[0]), int(r[1]), int(r[2])) for r in rows[1:]]


def stage_synth(cfg: PipelineConfig) -> None:
    library_path = cfg.resolve(cfg.synth_library_csv or cfg.library_csv)
    if not os.path.exists(library_path):
        raise ConfigError(f"synth library file {library_path!r} does not exist")
    lib = read_spectral_library_file(library_path)
    endmembers = np.stack([e.reflectance for e in lib.entries])
    wavelengths = lib.entries[0].wavelengths
    k = endmembers.shape[0]
    lines, samples = cfg.synth_lines, cfg.synth_samples

    root = RandomSource(cfg.seed)
    if cfg.synth_block_size > 1:
        # Spatially patchy scene: one Dirichlet draw per block, upsampled.
        # Keeps in-patch pixel differences noise-only, which is the premise
        # of shift-difference noise estimation.
        block = cfg.synth_block_size
        if lines % block or samples % block:
            raise ConfigError(
                "config key 'synth_block_size': must divide synth_lines and synth_samples")
        coarse = random_abundance_field(lines // block, samples // block, k,
                                        seed=root.spawn(0).seed)
        field = np.repeat(np.repeat(coarse, block, axis=0), block, axis=1)
    else:
        field = random_abundance_field(lines, samples, k, seed=root.spawn(0).seed)
    if cfg.synth_pure_plan_csv:
        plan = _read_plan_csv(_read_text(cfg.resolve(cfg.synth_pure_plan_csv)))
    else:
        total = k * cfg.synth_pure_per_endmember
        if total > lines * samples:
            raise ConfigError(
                "config key 'synth_pure_per_endmember': too many pure pixels "
                "for the scene extent")
        stride = (lines * samples) // total
        plan = []
        for i in range(total):
            pos = i * stride
            plan.append((pos // samples, pos % samples, i % k))
    field = plant_pure_pixels(field, plan)

    sigma = cfg.synth_noise_sigma
    if cfg.synth_noise_relative > 0:
        clean = field.reshape(-1, k) @ endmembers
        sigma = cfg.synth_noise_relative * float(np.mean(np.abs(clean)))
    scenario = MixingScenario(endmembers=endmembers, wavelengths=wavelengths,
                              abundance_field=field, noise_sigma=sigma,
                              pure_pixel_plan=plan, seed=root.spawn(1).seed)
    cube, truth = generate(scenario)

    if cfg.synth_panel_lines > 0:
        # Spectrally flat calibration strip appended below the scene; used
        # as the flat-field region for absolute-reflectance recovery.
        strip = np.full((cfg.synth_panel_lines, samples, endmembers.shape[1]),
                        cfg.synth_panel_level)
        if sigma > 0:
            g = root.spawn(2).gaussians(strip.size).reshape(strip.shape)
            strip = strip + sigma * g
        cube = SpectralCube(values=np.concatenate([cube.values, strip], axis=0),
                            wavelengths=cube.wavelengths,
                            bad_band_mask=cube.bad_band_mask,
                            units_tag=cube.units_tag)

    header_path = cfg.resolve(cfg.input_header)
    os.makedirs(os.path.dirname(header_path) or ".", exist_ok=True)
    write_cube_file(cube, header_path, cfg.resolve(cfg.input_image),
                    interleave="bil", data_type="float64")

    abundance_rows = ["line,sample," + ",".join(f"a_{i + 1}" for i in range(k))]
    for line in range(lines):
        for sample in range(samples):
            cells = [str(line), str(sample)]
            cells += [repr(float(v)) for v in truth.abundances[line, sample]]
            abundance_rows.append(",".join(cells))
    _write_text(cfg.artifact("truth_abundances.csv"), "\n".join(abundance_rows) + "\n")

    plan_rows = ["line,sample,endmember_index,endmember_name"]
    for line, sample, idx in truth.pure_pixels:
        plan_rows.append(f"{line},{sample},{idx},{lib.entries[idx].name}")
    _write_text(cfg.artifact("truth_pure_pixels.csv"), "\n".join(plan_rows) + "\n")
    print(f"synth: wrote {cube.samples} x {cube.lines} x {cube.bands} scene "
          f"with {len(plan)} pure pixels (sigma = {sigma:.6g})")


def stage_report(cfg: PipelineConfig) -> None:
    _require(cfg, "mnf", "ppi", "endmembers", "match", "classify")
    top = _read_match_summary(cfg)
    stats_rows = [r for r in csv.reader(
        _read_text(cfg.artifact("class_statistics.csv")).splitlines()) if r]
    stats = {int(r[0]): (int(r[1]), float(r[2])) for r in stats_rows[1:]}

    report = ["class_id,top_mineral,weighted_score,pixel_count,percent"]
    for cid in sorted(top):
        mineral, score = top[cid]
        count, percent = stats.get(cid, (0, 0.0))
        report.append(f"{cid},{mineral},{score:.6f},{count},{percent:.6f}")
    _write_text(cfg.artifact("report.csv"), "\n".join(report) + "\n")

    _write_text(cfg.artifact("plot_endmember_spectra.csv"),
                _read_text(cfg.artifact("endmembers.csv")))

    counts_cube = _read_artifact_cube(cfg, "ppi_counts.hdr")
    counts = counts_cube.values[:, :, 0].astype(np.int64)
    values, freq = np.unique(counts, return_counts=True)
    hist = ["count,pixels"]
    hist += [f"{int(v)},{int(f)}" for v, f in zip(values, freq)]
    _write_text(cfg.artifact("plot_ppi_histogram.csv"), "\n".join(hist) + "\n")

    eig_rows = _read_text(os.path.join(cfg.artifact("mnf_model"), "eigenvalues.csv"))
    eigenvalues = [float(c) for r in csv.reader(eig_rows.splitlines()) for c in r]
    curve = ["component,eigenvalue"]
    curve += [f"{i + 1},{repr(v)}" for i, v in enumerate(eigenvalues)]
    _write_text(cfg.artifact("plot_eigenvalues.csv"), "\n".join(curve) + "\n")
    print(f"report: wrote report.csv with {len(report) - 1} classes")


_PIPELINE_ORDER = ("preprocess", "mnf", "ppi", "endmembers", "match",
                   "classify", "mtmf", "report")

_STAGE_FUNCS = {
    "info": stage_info,
    "preprocess": stage_preprocess,
    "mnf": stage_mnf,
    "ppi": stage_ppi,
    "endmembers": stage_endmembers,
    "match": stage_match,
    "classify": stage_classify,
    "mtmf": stage_mtmf,
    "synth": stage_synth,
    "report": stage_report,
}


def run_stage(stage: str, cfg: PipelineConfig) -> None:
    """Run one pipeline stage (or `all`); raises on failure."""
    if stage == "all":
        for name in _PIPELINE_ORDER:
            _STAGE_FUNCS[name](cfg)
        return
    if stage not in _STAGE_FUNCS:
        raise ConfigError(f"unknown stage '{stage}'")
    _STAGE_FUNCS[stage](cfg)


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypermap",
        description="Hyperspectral mineral mapping pipeline")
    parser.add_argument("--version", action="version",
                        version=f"hypermap {__version__}")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the '{stage}' stage")
        p.add_argument("--config", required=True, help="pipeline config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the config output directory")
    init = sub.add_parser("init", help="write default.cfg and stock band tables")
    init.add_argument("--out", default=".", help="directory to write into")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.stage == "init":
            for path in write_default_configs(args.out):
                print(f"wrote {path}")
            return EXIT_OK
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be a non-negative integer")
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
        run_stage(args.stage, cfg)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except (ValueError, OSError, RuntimeError, KeyError, AssertionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
