"""Readers and writers: NPY arrays, ENVI BSQ cubes, endmember CSV, PGM
abundance maps and the JSON run report."""

from __future__ import annotations

import csv
import json
import math
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from numpy.lib import format as npy_format

from archetype import __version__
from archetype.core import DataError, HsiImage

_NPY_VERSIONS = {(1, 0): npy_format.read_array_header_1_0, (2, 0): npy_format.read_array_header_2_0}
_ENVI_DTYPES = {4: np.dtype("<f4"), 5: np.dtype("<f8")}
_ENVI_DATA_SUFFIXES = ("", ".img", ".dat", ".raw", ".bsq", ".bin")


def _check_npy_dtype(dtype, path):
    little = dtype.byteorder == "<" or (dtype.byteorder == "=" and sys.byteorder == "little")
    if dtype.kind != "f" or dtype.itemsize not in (4, 8) or not little:
        raise DataError(f"{path}: unsupported dtype {dtype.str}; expected little-endian float32 or float64")


def read_npy(path) -> np.ndarray:
    """Read a C-order float32/float64 NPY file (format versions 1.0 and 2.0)."""
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            version = npy_format.read_magic(fh)
        except ValueError as exc:
            raise DataError(f"{path}: not an NPY file ({exc})") from None
        if version not in _NPY_VERSIONS:
            raise DataError(f"{path}: unsupported NPY version {version[0]}.{version[1]}")
        try:
            shape, fortran_order, dtype = _NPY_VERSIONS[version](fh)
        except ValueError as exc:
            raise DataError(f"{path}: malformed NPY header ({exc})") from None
        if fortran_order:
            raise DataError(f"{path}: Fortran-ordered arrays are not supported")
        _check_npy_dtype(dtype, path)
        nbytes = math.prod(shape) * dtype.itemsize
        payload = fh.read(nbytes)
    if len(payload) != nbytes:
        raise DataError(f"{path}: truncated data, expected {nbytes} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_npy(path, array) -> None:
    arr = np.asarray(array)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    with open(path, "wb") as fh:
        npy_format.write_array(fh, np.ascontiguousarray(arr), allow_pickle=False)


def image_from_array(arr) -> HsiImage:
    """2-D arrays are (L, N); 3-D arrays are (H, W, L) band-last cubes."""
    if arr.ndim == 2:
        return HsiImage(arr)
    if arr.ndim == 3:
        return HsiImage.from_cube(arr)
    raise DataError(f"expected a 2-D or 3-D array, got shape {arr.shape}")


def parse_envi_header(text: str) -> dict[str, str]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ENVI":
        raise DataError("ENVI header must start with 'ENVI'")
    fields: dict[str, str] = {}
    body = "\n".join(lines[1:])
    pos = 0
    pattern = re.compile(r"\s*([^=\n]+?)\s*=\s*")
    while pos < len(body):
        m = pattern.match(body, pos)
        if not m:
            nl = body.find("\n", pos)
            pos = len(body) if nl < 0 else nl + 1
            continue
        key = m.group(1).strip().lower()
        pos = m.end()
        if body.startswith("{", pos):
            end = body.find("}", pos)
            if end < 0:
                raise DataError(f"unterminated brace value for '{key}'")
            value = body[pos + 1 : end]
            pos = end + 1
        else:
            nl = body.find("\n", pos)
            end = len(body) if nl < 0 else nl
            value = body[pos:end]
            pos = end
        fields[key] = value.strip()
    return fields


def _envi_int(fields, key, required=True, default=None):
    if key not in fields:
        if required:
            raise DataError(f"ENVI header missing required field '{key}'")
        return default
    try:
        return int(fields[key])
    except ValueError:
        raise DataError(f"ENVI field '{key}' is not an integer: {fields[key]!r}") from None


def read_envi(header_path, data_path=None) -> HsiImage:
    """Load a band-sequential ENVI cube of float32 or float64 samples."""
    header_path = Path(header_path)
    fields = parse_envi_header(header_path.read_text())
    samples = _envi_int(fields, "samples")
    lines = _envi_int(fields, "lines")
    bands = _envi_int(fields, "bands")
    dtype_code = _envi_int(fields, "data type")
    byte_order = _envi_int(fields, "byte order", required=False, default=0)
    offset = _envi_int(fields, "header offset", required=False, default=0)
    interleave = fields.get("interleave", "bsq").lower()
    if interleave != "bsq":
        raise DataError(f"unsupported interleave '{interleave}'; only bsq is supported")
    if dtype_code not in _ENVI_DTYPES:
        raise DataError(f"unsupported data type {dtype_code}; only 4 (float32) and 5 (float64)")
    if byte_order != 0:
        raise DataError(f"unsupported byte order {byte_order}; only little-endian (0)")

    if data_path is None:
        data_path = find_envi_data(header_path)
    dtype = _ENVI_DTYPES[dtype_code]
    count = samples * lines * bands
    raw = Path(data_path).read_bytes()[offset:]
    if len(raw) < count * dtype.itemsize:
        raise DataError(f"{data_path}: truncated, expected {count * dtype.itemsize} bytes after offset")
    cube = np.frombuffer(raw[: count * dtype.itemsize], dtype=dtype).reshape(bands, lines, samples)

    wavelengths = None
    if "wavelength" in fields:
        try:
            wavelengths = [float(v) for v in fields["wavelength"].split(",") if v.strip()]
        except ValueError:
            raise DataError("ENVI wavelength list is not numeric") from None
    return HsiImage.from_cube(cube.transpose(1, 2, 0), wavelengths=wavelengths)


def find_envi_data(header_path) -> Path:
    header_path = Path(header_path)
    stem = header_path.with_suffix("")
    for suffix in _ENVI_DATA_SUFFIXES:
        candidate = stem.with_name(stem.name + suffix)
        if candidate.is_file() and candidate != header_path:
            return candidate
    raise DataError(f"no data file found next to {header_path}")


def read_image(path) -> HsiImage:
    """Load an image from ``.npy`` or an ENVI ``.hdr`` header."""
    path = Path(path)
    if path.suffix.lower() == ".hdr":
        return read_envi(path)
    return image_from_array(read_npy(path))


def write_endmembers_csv(path, e) -> None:
    e = np.asarray(e, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([str(k) for k in range(e.shape[1])])
        for row in e:
            w.writerow([format(v, ".17g") for v in row])


def read_endmembers_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path}: endmember CSV needs a header and at least one row")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(rows[0]):
        raise DataError(f"{path}: ragged endmember CSV")
    return data


def read_matrix(path) -> np.ndarray:
    """Ground-truth matrices may come as NPY or as endmember-style CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_endmembers_csv(path)
    return read_npy(path).astype(np.float64)


def write_pgm(path, values, height: int, width: int) -> None:
    """8-bit binary PGM of values in [0, 1], scaled by 255 and rounded."""
    v = np.asarray(values, dtype=np.float64).reshape(height, width)
    pixels = np.round(255.0 * np.clip(v, 0.0, 1.0)).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise DataError(f"{path}: not a binary PGM")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise DataError(f"{path}: only maxval 255 is supported")
    return np.frombuffer(data[m.end() : m.end() + width * height], dtype=np.uint8).reshape(height, width)


@dataclass
class RunReport:
    input_path: str
    bands: int
    pixels: int
    spatial: tuple[int, int] | None
    config: dict
    selection: dict
    zero_pixels: int
    version: str = field(default=__version__)

    def to_dict(self) -> dict:
        H, W = self.spatial if self.spatial else (None, None)
        return {
            "tool": {"name": "archetype", "version": self.version},
            "input": {"path": self.input_path, "bands": self.bands, "pixels": self.pixels, "height": H, "width": W},
            "config": self.config,
            "runs": self.selection["per_run"],
            "selection": {k: v for k, v in self.selection.items() if k != "per_run"},
            "zero_pixels": self.zero_pixels,
        }


def build_report(input_path, image: HsiImage, ens_config, report, normalize=True) -> RunReport:
    solver = ens_config.solver
    selection = report.to_dict()
    chosen = report.per_run[report.selected]
    selection["seed"] = chosen.seed
    selection["gamma"] = chosen.gamma
    return RunReport(
        input_path=str(input_path),
        bands=image.bands,
        pixels=image.pixels,
        spatial=image.spatial,
        config={
            "p": solver.p,
            "T": solver.T,
            "K1": solver.K1,
            "K2": solver.K2,
            "runs": ens_config.runs,
            "base_seed": ens_config.base_seed,
            "gamma_set": list(ens_config.gamma_set),
            "fit_slack": ens_config.fit_slack,
            "normalize": bool(normalize),
        },
        selection=selection,
        zero_pixels=len(image.zero_pixels),
    )


def report_schema() -> dict:
    text = resources.files("archetype").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def write_outputs(out_dir, result, report: RunReport, spatial=None) -> None:
    """Write endmembers.csv, abundances.npy, report.json and, given a
    spatial shape, one PGM map per endmember under maps/."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_endmembers_csv(out / "endmembers.csv", result.endmembers)
        write_npy(out / "abundances.npy", np.asarray(result.abundances, dtype=np.float64))
        with open(out / "report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, allow_nan=False)
            fh.write("\n")
        if spatial is not None:
            H, W = spatial
            maps = out / "maps"
            maps.mkdir(exist_ok=True)
            for k, row in enumerate(result.abundances):
                write_pgm(maps / f"endmember_{k}.pgm", row, H, W)
    except OSError as exc:
        raise OSError(f"writing outputs to {out}: {exc}") from exc
