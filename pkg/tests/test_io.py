import numpy as np
import pytest

from tvos.io import (BadMagicError, FormatError, MaxvalError, NonFiniteError, TruncatedError,
                     UnsupportedVariantError, list_frames, read_emb1, read_head, read_pgm, read_ppm,
                     write_emb1, write_head, write_pgm, write_ppm)


class TestNetpbm:
    def test_ppm_round_trip(self, tmp_path, rng):
        img = rng.integers(0, 256, (7, 11, 3), dtype=np.uint8)
        write_ppm(tmp_path / "a.ppm", img)
        np.testing.assert_array_equal(read_ppm(tmp_path / "a.ppm"), img)

    def test_pgm_round_trip(self, tmp_path, rng):
        img = rng.integers(0, 256, (5, 3), dtype=np.uint8)
        write_pgm(tmp_path / "a.pgm", img)
        np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)

    def test_writer_bytes(self, tmp_path):
        write_pgm(tmp_path / "a.pgm", np.array([[1, 2]], np.uint8))
        assert (tmp_path / "a.pgm").read_bytes() == b"P5\n2 1\n255\n\x01\x02"

    def test_comments(self, tmp_path):
        (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 # width\n1\n255\n\x07\x09")
        np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[7, 9]])

    def test_ascii_variant(self, tmp_path):
        (tmp_path / "a.ppm").write_bytes(b"P3\n1 1\n255\n1 2 3\n")
        with pytest.raises(UnsupportedVariantError, match="P3"):
            read_ppm(tmp_path / "a.ppm")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "a.ppm").write_bytes(b"GIF89a")
        with pytest.raises(BadMagicError, match="a.ppm"):
            read_ppm(tmp_path / "a.ppm")

    def test_wrong_kind(self, tmp_path):
        write_pgm(tmp_path / "a.pgm", np.zeros((2, 2), np.uint8))
        with pytest.raises(BadMagicError):
            read_ppm(tmp_path / "a.pgm")

    def test_maxval(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(MaxvalError):
            read_pgm(tmp_path / "a.pgm")

    @pytest.mark.parametrize("data", [b"P5\n4 4\n255\n\x00\x00", b"P5\n4", b"P5\n4 4\n255"])
    def test_truncated(self, tmp_path, data):
        (tmp_path / "a.pgm").write_bytes(data)
        with pytest.raises(TruncatedError):
            read_pgm(tmp_path / "a.pgm")

    def test_errors_distinct(self):
        kinds = {BadMagicError, UnsupportedVariantError, MaxvalError, TruncatedError}
        assert all(issubclass(k, FormatError) for k in kinds)
        assert len({k.__name__ for k in kinds}) == 4

    def test_writer_validation(self, tmp_path):
        with pytest.raises(ValueError):
            write_ppm(tmp_path / "a.ppm", np.zeros((2, 2), np.uint8))
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "a.pgm", np.full((2, 2), 300))


class TestEmb1:
    def test_round_trip(self, tmp_path, rng):
        arr = rng.normal(size=(2, 3, 4, 5)).astype(np.float32)
        write_emb1(tmp_path / "e.emb1", arr)
        np.testing.assert_array_equal(read_emb1(tmp_path / "e.emb1"), arr)

    def test_layout(self, tmp_path):
        arr = np.arange(6, dtype=np.float32).reshape(1, 1, 2, 3)
        write_emb1(tmp_path / "e.emb1", arr)
        data = (tmp_path / "e.emb1").read_bytes()
        assert data[:4] == b"EMB1"
        assert np.frombuffer(data[4:20], "<u4").tolist() == [1, 1, 2, 3]
        assert np.frombuffer(data[20:], "<f4").tolist() == list(range(6))
        assert len(data) == 16 + 4 + 4 * 6

    def test_truncated(self, tmp_path):
        write_emb1(tmp_path / "e.emb1", np.ones((1, 2, 2, 2)))
        (tmp_path / "e.emb1").write_bytes((tmp_path / "e.emb1").read_bytes()[:-4])
        with pytest.raises(TruncatedError):
            read_emb1(tmp_path / "e.emb1")

    def test_trailing_bytes(self, tmp_path):
        write_emb1(tmp_path / "e.emb1", np.ones((1, 1, 1, 1)))
        with open(tmp_path / "e.emb1", "ab") as fh:
            fh.write(b"\0")
        with pytest.raises(FormatError, match="trailing"):
            read_emb1(tmp_path / "e.emb1")

    def test_non_finite(self, tmp_path):
        with pytest.raises(NonFiniteError):
            write_emb1(tmp_path / "e.emb1", np.full((1, 1, 1, 2), np.inf))
        raw = b"EMB1" + np.array([1, 1, 1, 1], "<u4").tobytes() + np.array([np.nan], "<f4").tobytes()
        (tmp_path / "n.emb1").write_bytes(raw)
        with pytest.raises(NonFiniteError):
            read_emb1(tmp_path / "n.emb1")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "e.emb1").write_bytes(b"EMB")
        with pytest.raises(BadMagicError):
            read_emb1(tmp_path / "e.emb1")


class TestHead:
    def test_round_trip(self, tmp_path, rng):
        w, b = rng.normal(size=(6, 4)), rng.normal(size=4)
        write_head(tmp_path / "h.txt", w, b)
        lines = (tmp_path / "h.txt").read_text().splitlines()
        assert lines[0] == "TVOSHEAD 6 4" and len(lines) == 8
        w2, b2 = read_head(tmp_path / "h.txt")
        np.testing.assert_array_equal(w2, w)
        np.testing.assert_array_equal(b2, b)

    def test_bad_header(self, tmp_path):
        (tmp_path / "h.txt").write_text("HEAD 1 1\n0\n0\n")
        with pytest.raises(BadMagicError):
            read_head(tmp_path / "h.txt")

    def test_short(self, tmp_path):
        (tmp_path / "h.txt").write_text("TVOSHEAD 2 1\n0\n0\n")
        with pytest.raises(TruncatedError):
            read_head(tmp_path / "h.txt")

    def test_ragged(self, tmp_path):
        (tmp_path / "h.txt").write_text("TVOSHEAD 1 2\n0 1\n0\n")
        with pytest.raises(FormatError):
            read_head(tmp_path / "h.txt")


def test_list_frames(tmp_path):
    for name in ("00001.pgm", "00000.pgm", "notes.txt"):
        (tmp_path / name).write_bytes(b"")
    assert [p.name for p in list_frames(tmp_path, ".pgm")] == ["00000.pgm", "00001.pgm"]
    with pytest.raises(FileNotFoundError, match="ppm"):
        list_frames(tmp_path, ".ppm")
