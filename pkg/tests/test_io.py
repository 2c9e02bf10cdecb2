# tests/test_io.py
import numpy as np
import pytest

from app.models.operator_model import Sinogram, SparseOperator
from app.models.solver_model import DualSolution
from app.utils.io import (
    parse_float_list,
    read_binary_image,
    read_dual_report,
    read_operator_triplets,
    read_pgm,
    read_rows_csv,
    read_sinogram_csv,
    write_binary_image,
    write_dual_report,
    write_operator_triplets,
    write_pgm,
    write_rows_csv,
    write_sinogram_csv,
)
from app.utils.validators import InputFormatError


def test_small_pgm_is_ascii(tmp_path):
    path = tmp_path / "small.pgm"
    codes = np.array([[0, 1, 2], [2, 1, 0]])
    write_pgm(str(path), codes, maxval=2)
    assert path.read_text().startswith("P2\n3 2\n2\n")
    image, maxval = read_pgm(str(path))
    assert maxval == 2
    assert np.array_equal(image, codes)


def test_large_pgm_is_binary(tmp_path):
    path = tmp_path / "large.pgm"
    codes = (np.arange(100 * 70) % 2).reshape(70, 100)
    write_pgm(str(path), codes, maxval=1)
    assert path.read_bytes()[:2] == b"P5"
    image, _ = read_pgm(str(path))
    assert np.array_equal(image, codes)


def test_pgm_header_comments_are_skipped(tmp_path):
    path = tmp_path / "comment.pgm"
    path.write_text("P2\n# made by hand\n2 1\n1\n0 1\n")
    image, maxval = read_pgm(str(path))
    assert image.tolist() == [[0, 1]]
    assert maxval == 1


def test_pgm_rejects_bad_input(tmp_path):
    with pytest.raises(InputFormatError):
        write_pgm(str(tmp_path / "x.pgm"), np.array([[0, 3]]), maxval=2)
    bad = tmp_path / "bad.pgm"
    bad.write_text("P3\n1 1\n1\n0\n")
    with pytest.raises(InputFormatError):
        read_pgm(str(bad))
    short = tmp_path / "short.pgm"
    short.write_text("P2\n2 2\n1\n0 1 1\n")
    with pytest.raises(InputFormatError):
        read_pgm(str(short))


def test_binary_image_levels(tmp_path):
    path = tmp_path / "img.pgm"
    image = np.array([[-1.0, 1.0], [1.0, -1.0]])
    write_binary_image(str(path), image, -1.0, 1.0)
    assert np.array_equal(read_binary_image(str(path), -1.0, 1.0), image)
    write_pgm(str(path), np.array([[0, 1, 2]]), maxval=2)
    with pytest.raises(InputFormatError):
        read_binary_image(str(path))


def test_sinogram_csv_keeps_metadata_and_weights(tmp_path):
    path = tmp_path / "sino.csv"
    sinogram = Sinogram(values=[1.5, 0.25, 3.0], weights=[1.0, 2.0, 0.5], geometry="parallel",
                        metadata={"angles": [0.0, 0.5], "detectors": 3})
    index = [(0, 0), (0, 1), (1, 0)]
    write_sinogram_csv(str(path), sinogram, index)
    loaded, loaded_index = read_sinogram_csv(str(path))
    assert loaded_index == index
    assert np.array_equal(loaded.values, sinogram.values)
    assert np.array_equal(loaded.weights, sinogram.weights)
    assert loaded.geometry == "parallel"
    assert loaded.metadata["detectors"] == "3"
    assert parse_float_list(loaded.metadata["angles"]) == [0.0, 0.5]


def test_sinogram_csv_requires_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(InputFormatError):
        read_sinogram_csv(str(path))
    with pytest.raises(InputFormatError):
        write_sinogram_csv(str(path), Sinogram(values=[1.0, 2.0]), [(0, 0)])


def test_operator_triplets(tmp_path):
    path = tmp_path / "A.txt"
    A = SparseOperator(matrix=np.array([[1.0, 0.0, 0.5], [0.0, 0.0, 2.0]]))
    write_operator_triplets(str(path), A)
    assert path.read_text().splitlines()[0] == "2 3 3"
    loaded = read_operator_triplets(str(path))
    assert np.array_equal(loaded.toarray(), A.toarray())


def test_dual_report(tmp_path):
    path = tmp_path / "dual.txt"
    solution = DualSolution(
        mu=np.array([0.5]),
        nu=np.array([0.25, -0.75]),
        subgradient=np.array([1.0, -1.0]),
        y_effective=np.array([1.0]),
        objective_value=1.125,
        data_term=0.125,
        penalty_term=1.0,
        kkt_residual=1e-9,
        iterations=42,
    )
    write_dual_report(str(path), solution)
    report = read_dual_report(str(path))
    assert report["objective"] == 1.125
    assert report["iterations"] == 42
    assert report["nu"].tolist() == [0.25, -0.75]


def test_rows_csv_appends_without_repeating_header(tmp_path):
    path = tmp_path / "out" / "metrics.csv"
    columns = ["method", "rms"]
    write_rows_csv(str(path), [{"method": "dp", "rms": 0.5}], columns, append=True)
    write_rows_csv(str(path), [{"method": "lsq", "rms": 1.0}], columns, append=True)
    rows = read_rows_csv(str(path))
    assert [row["method"] for row in rows] == ["dp", "lsq"]
    assert float(rows[1]["rms"]) == 1.0
