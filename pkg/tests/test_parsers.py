import pytest

from src.utils.parsers import parse_ebn0, parse_stage_mask


def test_parse_ebn0_range_is_inclusive() -> None:
    assert parse_ebn0("2.0:3.0:0.25") == [2.0, 2.25, 2.5, 2.75, 3.0]


def test_parse_ebn0_list_and_single_value() -> None:
    assert parse_ebn0("1.5, 2.7") == [1.5, 2.7]
    assert parse_ebn0("2.7") == [2.7]


@pytest.mark.parametrize("value", ["", "3:2:0.5", "1:2", "1:2:0"])
def test_parse_ebn0_rejects_bad_values(value: str) -> None:
    with pytest.raises(ValueError):
        parse_ebn0(value)


def test_parse_stage_mask() -> None:
    assert parse_stage_mask("1,3,4") == (1, 3, 4)
    assert parse_stage_mask("4,1") == (1, 4)
    with pytest.raises(ValueError):
        parse_stage_mask("0,2")
    with pytest.raises(ValueError):
        parse_stage_mask("")
