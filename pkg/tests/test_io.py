import numpy as np
import pytest

from nufrecon.io import (read_fourier_csv, read_matrix_csv, read_pbm, read_pgm, write_fourier_csv,
                         write_matrix_csv, write_pbm, write_pgm, write_rows_csv)
from nufrecon.sampling import FourierData, FrequencySet, Provenance, jittered_frequencies_1d, jittered_frequencies_2d


def test_pgm_round_trip(tmp_path):
    a = np.linspace(-1, 3, 35).reshape(5, 7)
    lo, hi = write_pgm(tmp_path / "a.pgm", a)
    assert (lo, hi) == (-1.0, 3.0)
    q = read_pgm(tmp_path / "a.pgm")
    assert q.shape == (5, 7)
    assert q.min() == 0 and q.max() == 65535
    back = lo + q / 65535 * (hi - lo)
    assert np.max(np.abs(back - a)) <= (hi - lo) / 65535


def test_pgm_fixed_range_clips(tmp_path):
    write_pgm(tmp_path / "b.pgm", np.array([-20.0, -8.0, 1.0]), lo=-16, hi=0)
    assert read_pgm(tmp_path / "b.pgm").ravel().tolist() == [0, 32768, 65535]


def test_pgm_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "c.pgm", np.array([0.0, np.nan]))


def test_pbm_round_trip(tmp_path):
    bits = (np.random.default_rng(0).random((6, 13)) > 0.5).astype(np.uint8)
    write_pbm(tmp_path / "m.pbm", bits)
    assert np.array_equal(read_pbm(tmp_path / "m.pbm"), bits)
    with pytest.raises(ValueError):
        write_pbm(tmp_path / "x.pbm", np.array([0, 2]))


def test_matrix_csv_is_exact(tmp_path):
    a = np.random.default_rng(1).standard_normal((4, 3))
    write_matrix_csv(tmp_path / "a.csv", a)
    assert np.array_equal(read_matrix_csv(tmp_path / "a.csv"), a)


@pytest.mark.parametrize("dims", [1, 2])
def test_fourier_csv_round_trip(tmp_path, dims):
    fr = jittered_frequencies_1d(3, 0) if dims == 1 else jittered_frequencies_2d(2, 0)
    vals = np.random.default_rng(2).standard_normal(len(fr)) + 1j * np.random.default_rng(3).standard_normal(len(fr))
    write_fourier_csv(tmp_path / "d.csv", FourierData(fr, vals, Provenance.MEASURED))
    back = read_fourier_csv(tmp_path / "d.csv", M=fr.M)
    assert np.array_equal(back.values, vals)
    assert np.array_equal(back.freqs.lambdas, fr.lambdas)
    assert np.array_equal(back.freqs.nominal, fr.nominal)


def test_fourier_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_fourier_csv(p)
    p.write_text("")
    with pytest.raises(ValueError):
        read_fourier_csv(p)


def test_rows_csv(tmp_path):
    write_rows_csv(tmp_path / "r.csv", [{"a": 1, "b": 2, "c": 3}], ["a", "b"])
    assert (tmp_path / "r.csv").read_text().splitlines() == ["a,b", "1,2"]
