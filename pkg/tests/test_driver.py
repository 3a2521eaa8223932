"""End-to-end pipeline orchestration, report rendering, and the CLI.

The JSON report layout asserted here is the contract documented in
docs/report-schema.md; the schema test enumerates exact key sets so any
drift fails loudly.
"""

import json

import pytest

from conftest import fixture_path
from sicheck.driver import AnalysisConfig, Report, analyze, main, render


def run(name: str, **kw) -> Report:
    cfg = AnalysisConfig(**kw)
    return analyze([fixture_path(name)], cfg)


# ---------------------------------------------------------------------------
# analyze() and the report object


def test_safe_contract_yields_safe_outcome_and_no_findings():
    report = run("vault_guarded_owner_update.sol")
    (entry,) = report.contracts
    assert entry["contract"] == "GuardedVault"
    assert entry["outcome"] == "safe"
    assert entry["findings"] == []
    assert not report.has_findings and not report.has_errors


def test_unsafe_contract_yields_confirmed_findings():
    report = run("stale_balance_withdraw.sol")
    (entry,) = report.contracts
    assert entry["outcome"] == "unsafe"
    assert entry["findings"]
    assert all(f["verdict"] == "confirmed" for f in entry["findings"])
    assert report.has_findings


def test_static_only_mode_reports_potentials_and_skips_refinement():
    report = run("stale_balance_withdraw.sol", mode="so")
    (entry,) = report.contracts
    assert entry["outcome"] == "unsafe"
    assert all(f["verdict"] == "potential" for f in entry["findings"])
    assert entry["timings"]["vsa"] == 0.0
    assert entry["timings"]["refine"] == 0.0


def test_summary_refinement_can_flip_a_contract_to_safe():
    # scoped to re-entrancy: a mutex stops mid-call re-entry, but cannot
    # stop two separate transactions from being reordered, so the ordering
    # detectors legitimately keep the wallet unsafe in every mode
    assert run("mutex_guarded_wallet.sol", mode="st-vs",
               detectors=("reentrancy",)).contracts[0]["outcome"] == "safe"
    assert run("mutex_guarded_wallet.sol", mode="st-hv",
               detectors=("reentrancy",)).contracts[0]["outcome"] == "unsafe"


def test_detector_scoping_limits_the_findings():
    report = run("stale_balance_withdraw.sol", detectors=("suicide",))
    (entry,) = report.contracts
    assert entry["outcome"] == "safe"
    assert entry["findings"] == []


def test_tiny_budget_times_out_without_aborting_the_batch():
    cfg = AnalysisConfig(timeout_secs=1e-9)
    report = analyze([fixture_path("stale_balance_withdraw.sol"),
                      fixture_path("vault_guarded_owner_update.sol")], cfg)
    assert [c["outcome"] for c in report.contracts] == ["timeout", "timeout"]


def test_directory_input_collects_sources_recursively(tmp_path):
    sub = tmp_path / "nested"
    sub.mkdir()
    (tmp_path / "a.sol").write_text(
        fixture_path("vault_guarded_owner_update.sol").read_text())
    (sub / "b.sol").write_text(
        fixture_path("self_kill_open.sol").read_text())
    report = analyze([tmp_path], AnalysisConfig())
    assert [c["contract"] for c in report.contracts] == ["GuardedVault",
                                                         "SelfKillOpen"]
    assert [c["outcome"] for c in report.contracts] == ["safe", "unsafe"]


def test_missing_path_raises():
    with pytest.raises(FileNotFoundError):
        analyze(["/no/such/file.sol"], AnalysisConfig())


def test_syntax_error_becomes_a_file_level_error_entry(tmp_path):
    bad = tmp_path / "bad.sol"
    bad.write_text("contract { nope")
    report = analyze([bad], AnalysisConfig())
    (entry,) = report.contracts
    assert entry["outcome"] == "error" and entry["contract"] == ""
    assert "error" in entry
    assert report.has_errors


def test_unsupported_feature_errors_only_that_contract(tmp_path):
    # recursion is rejected when the contract is lowered, so the failure is
    # scoped to Bad while Ok still analyzes
    src = tmp_path / "mixed.sol"
    src.write_text(
        """contract Ok {
    uint x;
    function set(uint v) public { x = v; }
}
contract Bad {
    uint y;
    function spin(uint n) internal returns (uint) { return spin(n); }
    function f() public { y = spin(1); }
}
"""
    )
    report = analyze([src], AnalysisConfig())
    outcomes = {c["contract"]: c["outcome"] for c in report.contracts}
    assert outcomes["Ok"] == "safe"
    assert outcomes["Bad"] == "error"


def test_multi_contract_file_gets_one_entry_per_contract():
    report = run("inherited_market_struct.sol")
    assert len(report.contracts) == 2
    assert len({c["contract"] for c in report.contracts}) == 2


# ---------------------------------------------------------------------------
# schema and rendering


CONTRACT_KEYS = {"file", "contract", "outcome", "findings", "timings"}
FINDING_KEYS = {"kind", "var", "verdict", "lines", "cex_lines"}
LINE_KEYS = {"anchor", "s1", "s2"}
TIMING_KEYS = {"explore", "vsa", "refine"}
OUTCOMES = {"safe", "unsafe", "timeout", "error"}
VERDICTS = {"potential", "confirmed"}  # refuted findings are pruned
KINDS = {"reentrancy", "tod_amount", "tod_receiver", "tod_transfer",
         "cond_suicide", "uncond_suicide", "eth_withdrawal"}


def assert_schema(obj: dict) -> None:
    assert set(obj) == {"mode", "detectors", "contracts"}
    assert obj["detectors"] == sorted(obj["detectors"])
    for c in obj["contracts"]:
        assert set(c) - {"error"} == CONTRACT_KEYS
        assert c["outcome"] in OUTCOMES
        assert ("error" in c) == (c["outcome"] == "error")
        assert set(c["timings"]) == TIMING_KEYS
        for f in c["findings"]:
            assert set(f) == FINDING_KEYS
            assert f["kind"] in KINDS
            assert f["verdict"] in VERDICTS
            assert set(f["lines"]) == LINE_KEYS
            assert isinstance(f["lines"]["anchor"], int)
            assert all(isinstance(x, int) for x in f["cex_lines"])


def test_report_schema_holds_for_safe_unsafe_and_error_entries(tmp_path):
    bad = tmp_path / "bad.sol"
    bad.write_text("contract { nope")
    report = analyze([fixture_path("stale_balance_withdraw.sol"),
                      fixture_path("vault_guarded_owner_update.sol"),
                      fixture_path("self_kill_open.sol"), bad],
                     AnalysisConfig())
    assert_schema(report.to_obj())


def test_json_rendering_round_trips_and_is_stable():
    report = run("stale_balance_withdraw.sol")
    text = render(report, "json")
    assert json.loads(text) == report.to_obj()
    assert render(report, "json") == text


def test_text_rendering_one_line_per_finding():
    report = run("stale_balance_withdraw.sol", detectors=("reentrancy",))
    lines = render(report, "text").splitlines()
    (entry,) = report.contracts
    assert len(lines) == len(entry["findings"])
    assert all(" reentrancy on accounts [confirmed]" in ln for ln in lines)
    assert lines[0].startswith(entry["file"] + ":")


def test_findings_are_rendered_in_a_deterministic_order():
    a = run("stale_balance_withdraw.sol").contracts[0]["findings"]
    b = run("stale_balance_withdraw.sol").contracts[0]["findings"]
    assert a == b
    keys = [(f["kind"], f["var"], f["lines"]["anchor"]) for f in a]
    assert keys == sorted(keys)


def test_unconditional_finding_has_null_pair_lines():
    report = run("self_kill_open.sol", detectors=("suicide",))
    (finding,) = report.contracts[0]["findings"]
    assert finding["kind"] == "uncond_suicide"
    assert finding["var"] is None
    assert finding["lines"]["s1"] is None and finding["lines"]["s2"] is None
    assert finding["lines"]["anchor"] == 3


# ---------------------------------------------------------------------------
# configuration validation


def test_config_rejects_unknown_mode():
    with pytest.raises(ValueError, match="mode"):
        AnalysisConfig(mode="fast")


def test_config_rejects_unknown_detector():
    with pytest.raises(ValueError, match="detector"):
        AnalysisConfig(detectors=("reentrancy", "spectre"))


def test_config_rejects_nonpositive_timeout():
    with pytest.raises(ValueError, match="timeout"):
        AnalysisConfig(timeout_secs=0)


# ---------------------------------------------------------------------------
# command line


def test_cli_exit_zero_on_safe(capsys):
    rc = main(["analyze", str(fixture_path("vault_guarded_owner_update.sol"))])
    assert rc == 0
    assert capsys.readouterr().out == ""


def test_cli_exit_one_on_findings_with_text_output(capsys):
    rc = main(["analyze", str(fixture_path("stale_balance_withdraw.sol")),
               "--detect", "reentrancy"])
    assert rc == 1
    out = capsys.readouterr().out
    assert "reentrancy on accounts [confirmed]" in out


def test_cli_exit_two_on_missing_path(capsys):
    rc = main(["analyze", "/no/such/file.sol"])
    assert rc == 2
    assert "sicheck:" in capsys.readouterr().err


def test_cli_exit_two_on_unparsable_source(tmp_path, capsys):
    bad = tmp_path / "bad.sol"
    bad.write_text("contract { nope")
    rc = main(["analyze", str(bad)])
    assert rc == 2
    assert "bad.sol" in capsys.readouterr().err


def test_cli_rejects_bad_flag_values():
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "x.sol", "--detect", "spectre"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["analyze", "x.sol", "--mode", "warp"])


def test_cli_json_format_emits_the_schema(capsys):
    rc = main(["analyze", str(fixture_path("stale_balance_withdraw.sol")),
               "--format", "json"])
    assert rc == 1
    obj = json.loads(capsys.readouterr().out)
    assert_schema(obj)
    assert obj["mode"] == "st-vs"


def test_cli_dump_writes_artifacts_to_stderr(capsys):
    main(["analyze", str(fixture_path("stale_balance_withdraw.sol")),
          "--dump", "facts", "--dump", "summary", "--mode", "so"])
    err = capsys.readouterr().err
    assert "Bank facts ==" in err
    assert "Bank summary ==" in err  # forced even though so-mode skips it
