import xml.etree.ElementTree as ET

import pytest

from msde.oracles import format_text, junit_xml, oracle_names, run_oracle_suite


def test_full_suite_passes():
    results = run_oracle_suite()
    assert [r.name for r in results] == list(oracle_names())
    failed = [r.name for r in results if not r.passed]
    assert failed == []
    for r in results:
        assert r.margin >= 0.0
        assert r.seconds >= 0.0
        assert abs(r.observed - r.expected) <= r.tolerance


def test_exact_cases_match_bit_for_bit():
    results = run_oracle_suite(["tamed-step", "implicit-step", "deviation-exponent"])
    for r in results:
        assert r.tolerance <= 1e-15
        assert r.observed == r.expected
    assert results[2].tolerance == 0.0  # exponent arithmetic is exact


def test_subset_selection_preserves_request_order():
    names = ["dbl-point-masses", "implicit-step"]
    results = run_oracle_suite(names)
    assert [r.name for r in results] == names


def test_unknown_case_raises_keyerror():
    with pytest.raises(KeyError, match="no-such-case"):
        run_oracle_suite(["no-such-case"])


def test_format_text_one_line_per_case():
    results = run_oracle_suite(["quartic-moments", "green-kubo-rate-1"])
    text = format_text(results)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    assert len(lines) == 3  # one per case plus a summary line
    assert "2/2 oracle cases passed" in lines[-1]
    for line in lines[:-1]:
        assert line.startswith("PASS")
        assert "observed=" in line and "expected=" in line and "margin=" in line


def test_junit_xml_parses_and_counts():
    results = run_oracle_suite(["ou-stationary-variance", "dsl-power-tower"])
    root = ET.fromstring(junit_xml(results))
    assert root.tag == "testsuite"
    assert root.get("tests") == "2"
    assert root.get("failures") == "0"
    cases = root.findall("testcase")
    assert [c.get("name") for c in cases] == [r.name for r in results]


def test_results_are_deterministic():
    first = run_oracle_suite(["averaged-drift-table"])[0]
    second = run_oracle_suite(["averaged-drift-table"])[0]
    assert first.observed == second.observed
