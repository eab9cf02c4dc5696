import json
from pathlib import Path

import pytest

from lib.csit_model import validate_profile
from lib.errors import OutOfRange, ParseError
from lib.link_simulator import SweepRow
from lib.profile_store import (
    dump_profile,
    format_profile,
    load_profile,
    parse_profile,
    plan_document,
    region_document,
    write_compare_csv,
    write_sweep_csv,
)
from lib.scheme_synthesis import synthesize, validate_plan

PROFILES = Path(__file__).resolve().parent.parent / "profiles"


def test_parse_profile():
    p = parse_profile('{"L": 2, "a": [0.9, 0.5], "b": [0.4, 0.7]}')
    assert p == validate_profile(2, (0.9, 0.5), (0.4, 0.7))


def test_empty_file_is_a_parse_error(tmp_path):
    path = tmp_path / "empty.profile"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_profile(path)
    assert info.value.line == 1
    assert "empty" in str(info.value)


def test_malformed_json_reports_line():
    with pytest.raises(ParseError) as info:
        parse_profile('{\n  "L": 2,\n  "a": [0.9, 0.5\n}')
    assert info.value.line == 4


def test_missing_and_mistyped_fields():
    with pytest.raises(ParseError) as info:
        parse_profile('{"L": 1, "a": [0.5]}')
    assert info.value.field == "b"

    with pytest.raises(ParseError) as info:
        parse_profile('{\n  "L": 1,\n  "a": "0.5",\n  "b": [0.5]\n}')
    assert info.value.field == "a"
    assert info.value.line == 3

    with pytest.raises(ParseError):
        parse_profile("[0.5, 0.5]")


def test_out_of_range_values_surface_validation_error():
    with pytest.raises(OutOfRange):
        parse_profile('{"L": 1, "a": [1.5], "b": [0.5]}')


def test_profile_round_trip(tmp_path):
    for p in [
        validate_profile(4, (0.7, 0.6, 0.4, 0.3), (0.3, 0.4, 0.7, 0.6)),
        validate_profile(2, (0.123456789012345, 1.0), (0.0, 0.999999999999999)),
        validate_profile(1, (0.1 + 0.2,), (1 / 3,)),
    ]:
        path = dump_profile(p, tmp_path / "p.profile")
        assert load_profile(path) == p


def test_format_profile_uses_short_decimals():
    text = format_profile(validate_profile(2, (0.7, 0.3), (0.3, 0.7)))
    assert text == '{"L": 2, "a": [0.7, 0.3], "b": [0.3, 0.7]}\n'


@pytest.mark.parametrize("name", ["fig4", "fig5a", "fig5b", "p2_unmatched", "q2", "p3"])
def test_shipped_profiles_load_and_compose(name):
    p = load_profile(PROFILES / f"{name}.profile")
    doc = region_document(p)
    assert doc["composition_residual"] <= 1e-9
    assert json.loads(json.dumps(doc)) == doc


def test_region_document_fig4():
    doc = region_document(load_profile(PROFILES / "fig4.profile"))
    assert doc["class"] == "P_L"
    assert doc["balanced_partition"] == [[1, 2, 3, 4]]
    assert doc["weights"]["r_bar"] == pytest.approx(1.4)
    assert doc["weights"]["r_hat"] == pytest.approx(1.2)
    assert doc["weights"]["r_tilde"] == pytest.approx(1.4)
    assert [0.5, 1.0] in [pytest.approx(v) for v in doc["vertices"]]


def test_plan_document_marks_floor():
    plan = synthesize(load_profile(PROFILES / "p2_unmatched.profile"))
    doc = plan_document(plan, validate_plan(plan))
    rows = {s["key"]: s for s in doc["subbands"][0]["symbols"]}
    assert rows["u1"]["power_lo"] == "floor"
    assert rows["c1"]["power_lo"] == 0.7
    assert doc["subbands"][0]["decode_order"]["user2"]["known"] == ["u0(1)@1"]
    assert all(check["passed"] for check in doc["checks"])


def test_sweep_csv_format(tmp_path):
    rows = [
        SweepRow(snr_db=20.0, message="c1", context="user1@subband1", rate_bits=1.0 / 3.0),
        SweepRow(snr_db=30.0, message="u0(1)", context="user2@subband2", rate_bits=2.5),
    ]
    path = write_sweep_csv(tmp_path / "sweep.csv", rows)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").splitlines() == [
        "snr_db,message_id,context,rate_bits",
        "20,c1,user1@subband1,0.333333333333",
        "30,u0(1),user2@subband2,2.5",
    ]


def test_compare_csv_flags(tmp_path):
    row = dict(
        alpha=0.0, beta=1.0, d_sub=4.0 / 3.0, d_opt=1.5, gap=1.5 - 4.0 / 3.0, strict_gap=True,
        opt_zfbf_uses=0.0, opt_s32_uses=2.0, opt_fdma_uses=0.0,
        sub_zfbf_uses=0.0, sub_mat_uses=3.0, sub_fdma_uses=0.0,
    )
    path = write_compare_csv(tmp_path / "compare.csv", [row])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("alpha,beta,d_sub,d_opt,gap,strict_gap")
    assert lines[1].split(",")[:6] == ["0", "1", "1.33333333333", "1.5", "0.166666666667", "1"]


def test_region_document_rounds_to_15_digits():
    doc = region_document(load_profile(PROFILES / "p3.profile"))
    assert doc["min_avg"] == 0.533333333333333
    for v in doc["vertices"] + doc["corner_points"]:
        assert all(x == float(f"{x:.15g}") for x in v)
