import json
import struct

import jsonschema
import numpy as np
import pytest

from archetype.core import DataError, l2_normalize
from archetype.edaa import SolverConfig, run
from archetype.ensemble import EnsembleConfig, run_ensemble
from archetype.fileio import (
    build_report,
    read_endmembers_csv,
    read_envi,
    read_image,
    read_npy,
    read_pgm,
    report_schema,
    write_endmembers_csv,
    write_npy,
    write_outputs,
    write_pgm,
)

ENVI_HEADER = """ENVI
description = {tiny test cube}
samples = 2
lines = 2
bands = 3
header offset = 0
file type = ENVI Standard
data type = 4
interleave = bsq
byte order = 0
wavelength = {
 400.0, 500.0,
 600.0}
"""


def envi_value(band, line, sample):
    return 100.0 * band + 10.0 * line + sample + 0.5


@pytest.fixture
def envi_fixture(tmp_path):
    hdr = tmp_path / "tiny.hdr"
    hdr.write_text(ENVI_HEADER)
    values = [envi_value(b, r, c) for b in range(3) for r in range(2) for c in range(2)]
    (tmp_path / "tiny.img").write_bytes(struct.pack("<12f", *values))
    return hdr


class TestNpy:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_round_trip(self, tmp_path, rng, dtype):
        arr = rng.random((4, 7)).astype(dtype)
        write_npy(tmp_path / "a.npy", arr)
        back = read_npy(tmp_path / "a.npy")
        assert back.dtype == dtype
        assert back.tobytes() == arr.tobytes()

    def test_cube_pixel_order(self, tmp_path):
        cube = np.zeros((2, 2, 5))
        for r in range(2):
            for c in range(2):
                cube[r, c] = 1000 * r + 100 * c + np.arange(5)
        np.save(tmp_path / "c.npy", cube)
        img = read_image(tmp_path / "c.npy")
        assert img.data.shape == (5, 4)
        assert img.spatial == (2, 2)
        for i, (r, c) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            np.testing.assert_array_equal(img.data[:, i], 1000 * r + 100 * c + np.arange(5))

    def test_version_two(self, tmp_path, rng):
        arr = rng.random((3, 3))
        with open(tmp_path / "v2.npy", "wb") as fh:
            np.lib.format.write_array(fh, arr, version=(2, 0))
        np.testing.assert_array_equal(read_npy(tmp_path / "v2.npy"), arr)

    def test_truncated(self, tmp_path, rng):
        write_npy(tmp_path / "t.npy", rng.random((10, 10)))
        data = (tmp_path / "t.npy").read_bytes()
        (tmp_path / "t.npy").write_bytes(data[:-8])
        with pytest.raises(DataError, match="truncated"):
            read_npy(tmp_path / "t.npy")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.npy").write_bytes(b"NOTNUMPY" + b"\0" * 100)
        with pytest.raises(DataError, match="not an NPY"):
            read_npy(tmp_path / "bad.npy")

    def test_fortran_rejected(self, tmp_path, rng):
        np.save(tmp_path / "f.npy", np.asfortranarray(rng.random((3, 4))))
        with pytest.raises(DataError, match="Fortran"):
            read_npy(tmp_path / "f.npy")

    @pytest.mark.parametrize("arr", [np.arange(6).reshape(2, 3), np.ones((2, 2), dtype=">f8")])
    def test_dtype_rejected(self, tmp_path, arr):
        np.save(tmp_path / "d.npy", arr)
        with pytest.raises(DataError, match="unsupported dtype"):
            read_npy(tmp_path / "d.npy")


class TestEnvi:
    def test_fixture_values(self, envi_fixture):
        img = read_envi(envi_fixture)
        assert (img.bands, img.pixels, img.spatial) == (3, 4, (2, 2))
        assert img.wavelengths == (400.0, 500.0, 600.0)
        for i, (r, c) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            assert img.data[:, i].tolist() == [envi_value(b, r, c) for b in range(3)]

    def test_explicit_data_path(self, envi_fixture, tmp_path):
        moved = tmp_path / "elsewhere.bin"
        moved.write_bytes((tmp_path / "tiny.img").read_bytes())
        assert read_envi(envi_fixture, moved).pixels == 4

    def test_missing_bands(self, envi_fixture):
        envi_fixture.write_text(ENVI_HEADER.replace("bands = 3\n", ""))
        with pytest.raises(DataError, match="bands"):
            read_envi(envi_fixture)

    def test_byte_order(self, envi_fixture):
        envi_fixture.write_text(ENVI_HEADER.replace("byte order = 0", "byte order = 1"))
        with pytest.raises(DataError, match="byte order"):
            read_envi(envi_fixture)

    def test_interleave(self, envi_fixture):
        envi_fixture.write_text(ENVI_HEADER.replace("interleave = bsq", "interleave = bil"))
        with pytest.raises(DataError, match="interleave"):
            read_envi(envi_fixture)

    def test_data_type(self, envi_fixture):
        envi_fixture.write_text(ENVI_HEADER.replace("data type = 4", "data type = 2"))
        with pytest.raises(DataError, match="data type"):
            read_envi(envi_fixture)

    def test_float64(self, tmp_path):
        hdr = tmp_path / "d.hdr"
        hdr.write_text(ENVI_HEADER.replace("data type = 4", "data type = 5"))
        values = np.arange(12, dtype="<f8")
        (tmp_path / "d.dat").write_bytes(values.tobytes())
        img = read_envi(hdr)
        assert img.data[:, 0].tolist() == [0.0, 4.0, 8.0]

    def test_truncated(self, envi_fixture, tmp_path):
        (tmp_path / "tiny.img").write_bytes(b"\0" * 20)
        with pytest.raises(DataError, match="truncated"):
            read_envi(envi_fixture)


class TestOutputs:
    def test_pgm_endpoints(self, tmp_path):
        write_pgm(tmp_path / "m.pgm", [1.0, 0.0, 0.5, 0.25], 2, 2)
        raw = (tmp_path / "m.pgm").read_bytes()
        assert raw.startswith(b"P5\n2 2\n255\n")
        assert read_pgm(tmp_path / "m.pgm").tolist() == [[255, 0], [128, 64]]

    def test_csv_round_trip(self, tmp_path, rng):
        E = rng.random((6, 3)) * 1e-3
        write_endmembers_csv(tmp_path / "e.csv", E)
        header = (tmp_path / "e.csv").read_text().splitlines()[0]
        assert header == "0,1,2"
        np.testing.assert_allclose(read_endmembers_csv(tmp_path / "e.csv"), E, rtol=0, atol=1e-12)
        assert np.array_equal(read_endmembers_csv(tmp_path / "e.csv"), E)

    def test_write_and_replay(self, tmp_path, pure_cube):
        img, _, _ = pure_cube
        x = l2_normalize(img)
        cfg = EnsembleConfig(SolverConfig(p=3, T=10), runs=4, base_seed=2)
        result, selection = run_ensemble(x, cfg, workers=1)
        report = build_report("cube.npy", x, cfg, selection)
        write_outputs(tmp_path, result, report, spatial=(20, 25))

        payload = json.loads((tmp_path / "report.json").read_text())
        jsonschema.validate(payload, report_schema())
        assert sorted(p.name for p in (tmp_path / "maps").iterdir()) == [
            "endmember_0.pgm",
            "endmember_1.pgm",
            "endmember_2.pgm",
        ]
        assert read_pgm(tmp_path / "maps" / "endmember_1.pgm").shape == (20, 25)

        # the echoed configuration reproduces the selected run bitwise
        c = payload["config"]
        sel = payload["selection"]
        replay = run(x, SolverConfig(p=c["p"], T=c["T"], K1=c["K1"], K2=c["K2"], gamma=sel["gamma"], seed=sel["seed"]))
        saved = read_npy(tmp_path / "abundances.npy")
        assert saved.tobytes() == replay.abundances.tobytes()
        assert np.array_equal(read_endmembers_csv(tmp_path / "endmembers.csv"), replay.endmembers)

    def test_schema_rejects_garbage(self):
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate({"tool": {}}, report_schema())

    def test_no_maps_without_spatial(self, tmp_path, pure_cube):
        img, _, _ = pure_cube
        cfg = EnsembleConfig(SolverConfig(p=3, T=2), runs=1)
        result, selection = run_ensemble(img, cfg, workers=1)
        write_outputs(tmp_path, result, build_report("x", img, cfg, selection, normalize=False))
        assert not (tmp_path / "maps").exists()
