# tests/test_enumeration.py
import numpy as np
import pytest

from app.models.geometry_model import LatticeGeometry
from app.models.solver_model import SolverConfig
from app.services.enumeration_service import (
    all_images,
    class_size_profile,
    enumerate_all,
    enumeration_service,
    EnumerationService,
    hvd_convexity_check,
    intersection_of,
    summarize_counts,
    symmetries_preserving,
    transformed_size_profile,
    verify_dual_conjecture,
    write_summary_csv,
)
from app.utils.io import read_rows_csv
from app.utils.validators import EnumerationError


# (directions, n) -> (total, unique, multiple)
TABLE_COUNTS = {
    ("hv", 2): (16, 14, 2),
    ("hv", 3): (512, 230, 282),
    ("hvd", 2): (16, 16, 0),
    ("hvd", 3): (512, 496, 16),
    ("hvda", 2): (16, 16, 0),
    ("hvda", 3): (512, 512, 0),
}


def test_all_images_bit_order():
    images = all_images(2)
    assert images.shape == (16, 4)
    assert set(np.unique(images)) == {-1, 1}
    # index 1 sets only pixel 0
    assert images[1].tolist() == [1, -1, -1, -1]


def test_all_images_rejects_sizes_outside_two_to_four():
    for n in (0, 1, 5):
        with pytest.raises(EnumerationError):
            all_images(n)


def test_enumeration_rejects_single_pixel():
    with pytest.raises(EnumerationError):
        enumerate_all(1, LatticeGeometry.from_code("hv"))


@pytest.mark.parametrize("key", sorted(TABLE_COUNTS))
def test_enumeration_counts(key):
    directions, n = key
    summary = summarize_counts(n, LatticeGeometry.from_code(directions))
    assert (summary.total, summary.unique_count, summary.multiple_count) == TABLE_COUNTS[key]
    assert not summary.verified


def test_classes_partition_every_image():
    classes = enumerate_all(3, LatticeGeometry.from_code("hv"))
    assert sum(c.size for c in classes.values()) == 512
    for instance in classes.values():
        assert instance.solutions.shape[1:] == (3, 3)


def test_intersection_marks_disagreeing_pixels():
    a = np.array([[1.0, -1.0], [-1.0, 1.0]])
    b = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    inter = intersection_of([a, b])
    assert np.array_equal(inter.undetermined, [[True, True], [False, False]])
    assert np.array_equal(inter.values[1], [-1.0, 1.0])


def test_intersection_of_nothing_raises():
    with pytest.raises(EnumerationError):
        intersection_of([])


def test_switching_component_class():
    # the two 2 x 2 checkerboards share every row and column sum
    classes = enumerate_all(2, LatticeGeometry.from_code("hv"))
    multiple = [c for c in classes.values() if not c.unique]
    assert len(multiple) == 1
    assert multiple[0].size == 2
    assert multiple[0].intersection.undetermined_count == 4


@pytest.mark.parametrize("directions", ["hv", "hvd", "hvda"])
def test_verify_dual_on_two_by_two(directions):
    cfg = SolverConfig(tol_kkt=1e-7, seed=3)
    summary = verify_dual_conjecture(2, LatticeGeometry.from_code(directions), cfg, workers=1)
    assert summary.verified
    assert summary.total == 16
    assert summary.dual_failures == 0
    assert summary.dual_correct_unique == summary.unique_count
    assert summary.dual_correct_multiple == summary.multiple_count


@pytest.mark.slow
@pytest.mark.parametrize("directions", ["hv", "hvd", "hvda"])
def test_verify_dual_on_three_by_three(directions):
    cfg = SolverConfig(tol_kkt=1e-7, seed=3)
    summary = verify_dual_conjecture(3, LatticeGeometry.from_code(directions), cfg, workers=2)
    assert summary.total == 512
    assert summary.dual_failures == 0
    assert summary.dual_correct_unique == summary.unique_count
    assert summary.dual_correct_multiple == summary.multiple_count


def test_sampled_verification_covers_only_checked_classes():
    cfg = SolverConfig(tol_kkt=1e-7, seed=3)
    summary = verify_dual_conjecture(3, LatticeGeometry.from_code("hvda"), cfg, sample=5, workers=1)
    assert summary.sampled
    assert summary.class_count == 5
    assert summary.total == summary.unique_count + summary.multiple_count


def test_service_counts_and_modes():
    summary = enumeration_service.run(2, "hv", mode="counts")
    assert summary.table_row() == {"m": "2", "n": "2", "total": "16", "unique": "14", "multiple": "2", "failures": "0"}
    with pytest.raises(EnumerationError):
        enumeration_service.run(2, "hv", mode="bogus")
    with pytest.raises(EnumerationError):
        EnumerationService(max_n=3).run(4, "hv")


def test_summary_csv(tmp_path):
    path = tmp_path / "table" / "counts.csv"
    summaries = [summarize_counts(2, LatticeGeometry.from_code(code)) for code in ("hv", "hvd")]
    write_summary_csv(summaries, str(path))
    rows = read_rows_csv(str(path))
    assert [row["m"] for row in rows] == ["2", "3"]
    assert rows[0]["multiple"] == "2"


def test_hvd_convexity():
    square = -np.ones((4, 4))
    square[1:3, 1:3] = 1.0
    assert hvd_convexity_check(square)
    broken = -np.ones((3, 3))
    broken[0, 0] = broken[0, 2] = 1.0
    assert not hvd_convexity_check(broken)


def test_symmetries_of_direction_sets():
    assert set(symmetries_preserving(LatticeGeometry.from_code("hv"))) == {
        "identity", "rot90", "rot180", "rot270", "flip_rows", "flip_cols", "transpose", "antitranspose",
    }
    assert "rot90" not in symmetries_preserving(LatticeGeometry.from_code("hvd"))
    assert "transpose" in symmetries_preserving(LatticeGeometry.from_code("hvd"))


def test_preserving_transform_keeps_class_sizes():
    geom = LatticeGeometry.from_code("hvd")
    profile = class_size_profile(enumerate_all(3, geom))
    assert transformed_size_profile(3, geom, "transpose") == profile
