import pytest

from rankbias import (
    AttributeSchema,
    GroundTruth,
    InputError,
    ProfileError,
    RankedList,
    ResultItem,
    SchemaError,
    UserProfile,
)
from rankbias.types import UNANNOTATED

from conftest import annotated_list, stance_schema


def test_result_item_validates_weights():
    ResultItem("x", {"stance": {"a1": 0.4, "a2": 0.6}})
    with pytest.raises(InputError):
        ResultItem("x", {"stance": {"a1": 0.4, "a2": 0.5}})
    with pytest.raises(InputError):
        ResultItem("x", {"stance": {"a1": -0.1, "a2": 1.1}})
    with pytest.raises(InputError):
        ResultItem("")


def test_result_item_unannotated_marker():
    item = ResultItem("x", {"stance": UNANNOTATED})
    assert item.annotation_for("stance") == {}
    assert item.annotation_for("missing") == {}


def test_ranked_list_rejects_duplicates():
    items = (ResultItem("a"), ResultItem("a"))
    with pytest.raises(InputError):
        RankedList("q", "u", items)


def test_ranked_list_depth_and_truncation():
    lst = annotated_list(["a1", "a2", "a1"])
    assert lst.depth == 3
    assert lst.truncated(2).item_ids() == lst.item_ids()[:2]
    assert lst.truncated(10) is lst


def test_profile_protected_other_disjoint():
    with pytest.raises(ProfileError):
        UserProfile("u", {"gender": "f"}, {"gender": "x"})


def test_schema_invariants():
    with pytest.raises(SchemaError):
        AttributeSchema("a", ("only",))
    with pytest.raises(SchemaError):
        AttributeSchema("a", ("x", "x"))
    with pytest.raises(SchemaError):
        AttributeSchema("a", ("x", "y"), kind="bogus")
    with pytest.raises(SchemaError):
        AttributeSchema("a", ("x", UNANNOTATED))


def test_ground_truth_validates():
    GroundTruth("stance", {"a1": 0.5, "a2": 0.5})
    with pytest.raises(SchemaError):
        GroundTruth("stance", {"a1": 0.5, "a2": 0.6})
    with pytest.raises(SchemaError):
        GroundTruth("stance", {"a1": -0.5, "a2": 1.5})


def test_ground_truth_from_ideal_list():
    ideal = annotated_list(["a1", "a1", "a2", None], user="ideal")
    gt = GroundTruth.from_ranked_list(ideal, stance_schema())
    # three annotated items: 2/3 vs 1/3 after dropping the unannotated one
    assert gt.probabilities["a1"] == pytest.approx(2 / 3)
    assert gt.probabilities["a2"] == pytest.approx(1 / 3)
