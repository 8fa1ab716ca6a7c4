"""End-to-end audit orchestration tests: measure/simulate/compare flows,
skip policy, report determinism, and injected-bias recovery through the
full pipeline."""

import json

import numpy as np

import pytest

from rankbias import ConfigError, InputError
from rankbias.audit import compare_audit, run_audit
from rankbias.io import (
    AuditManifest,
    SignificanceSpec,
    ground_truth_text,
    schema_text,
    write_profiles,
    write_result_lists,
)
from rankbias.measures import MeasureConfig
from rankbias.simulator import generate_profiles, serve_all
from test_simulator import scenario

ALL_MEASURES = {
    "individual_user_bias",
    "group_user_bias",
    "probabilistic_group_bias",
    "combined_bias",
    "content_bias",
    "echo_chamber_test",
}


def file_manifest(tmp_path, cfg=None, with_gt=True, config=None):
    """Materialize a small scenario as data files plus a file-mode manifest."""
    cfg = cfg or scenario(n_users=12, delta_content_p=0.2, delta_content_pbar=-0.2, seed=9)
    profiles = generate_profiles(cfg)
    lists = serve_all(cfg, profiles)
    write_profiles(profiles, tmp_path / "profiles.jsonl")
    write_result_lists(lists, tmp_path / "results.jsonl")
    schemas = [cfg.queries[0].attribute, cfg.protected]
    (tmp_path / "schema.json").write_text(
        schema_text(schemas, cfg.numeric_ranges()), encoding="utf-8"
    )
    if with_gt:
        (tmp_path / "gt.json").write_text(
            ground_truth_text(cfg.queries[0].ground_truth), encoding="utf-8"
        )
    return AuditManifest(
        profiles_path=tmp_path / "profiles.jsonl",
        results_path=tmp_path / "results.jsonl",
        schema_path=tmp_path / "schema.json",
        ground_truth_path=(tmp_path / "gt.json") if with_gt else None,
        output_dir=tmp_path / "out",
        protected_attribute="group",
        protected_value="x",
        differentiating_attribute="stance",
        config=config or MeasureConfig(k=8, relevant_attrs=("persona", "age")),
    )


def test_run_audit_file_mode_all_measures(tmp_path):
    report = run_audit(file_manifest(tmp_path))
    assert set(report.verdicts) == ALL_MEASURES
    assert report.skipped == {}
    assert (tmp_path / "out" / "report.json").exists()
    assert (tmp_path / "out" / "summary.txt").exists()
    assert (tmp_path / "out" / "per_query.csv").exists()
    # verdicts carry their thresholds and the biased flag is consistent
    for verdict in report.verdicts.values():
        assert verdict["biased"] == (verdict["magnitude"] > verdict["threshold"])
    # matched-pair populations show no protected/other attribute association
    associations = report.dataset["attribute_associations"]
    assert set(associations) == {"persona", "age"}
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in associations.values())


def test_attribute_association_flags_confounding():
    from conftest import build_audit, make_list, profile
    from rankbias.measures import attribute_associations

    # persona perfectly predicts the protected class: association 1
    profiles = [profile(f"u{i}", "x" if i < 4 else "y", persona="p0" if i < 4 else "p1",
                        age=float(i)) for i in range(8)]
    lists = [make_list(["x1"], user=p.user_id) for p in profiles]
    inp = build_audit(lists, profiles)
    associations = attribute_associations(inp)
    assert associations["persona"] == pytest.approx(1.0)
    # point-biserial of 0..7 split in half: 4 / sqrt(21) = 0.873
    assert associations["age"] == pytest.approx(4 / np.sqrt(21), abs=1e-9)


def test_run_audit_without_ground_truth_skips_content_measures(tmp_path):
    report = run_audit(file_manifest(tmp_path, with_gt=False))
    assert "content_bias" in report.skipped
    assert "echo_chamber_test" in report.skipped
    assert "group_user_bias" in report.verdicts
    assert "individual_user_bias" in report.verdicts


def test_run_audit_skips_individual_without_relevant_attrs(tmp_path):
    manifest = file_manifest(tmp_path, config=MeasureConfig(k=8))
    report = run_audit(manifest)
    assert report.skipped["individual_user_bias"] == "relevant_attrs not configured"


def test_run_audit_single_class_skips_group_measures(tmp_path):
    manifest = file_manifest(tmp_path)
    # flip the protected designation to a value nobody has
    manifest = AuditManifest(
        **{
            **{f: getattr(manifest, f) for f in manifest.__dataclass_fields__},
            "protected_value": "zzz",
        }
    )
    report = run_audit(manifest)
    assert "group_user_bias" in report.skipped
    assert "probabilistic_group_bias" in report.skipped
    assert "combined_bias" in report.skipped
    assert "content_bias" in report.verdicts


def test_run_audit_nothing_applicable_is_config_error(tmp_path):
    manifest = file_manifest(tmp_path, with_gt=False, config=MeasureConfig())
    manifest = AuditManifest(
        **{
            **{f: getattr(manifest, f) for f in manifest.__dataclass_fields__},
            "protected_value": "zzz",
        }
    )
    with pytest.raises(ConfigError, match="no applicable measures"):
        run_audit(manifest)


def test_simulate_mode_recovers_injected_combined_bias(tmp_path):
    cfg = scenario(
        n_users=1600,
        delta_content_p=0.15,
        delta_content_pbar=-0.15,
        item_pool_size=50,
        list_depth=10,
        seed=17,
    )
    manifest = AuditManifest(
        scenario=cfg,
        output_dir=tmp_path / "out",
        config=MeasureConfig(k=10, dr_kind="topk", relevant_attrs=("persona", "age")),
    )
    report = run_audit(manifest)
    assert report.verdicts["combined_bias"]["magnitude"] == pytest.approx(0.30, abs=0.04)
    # simulate mode also writes the generated data for reuse
    for name in ("profiles.jsonl", "results.jsonl", "schema.json", "ground_truth.json"):
        assert (tmp_path / "out" / name).exists()


def test_simulate_report_byte_identical_across_runs(tmp_path):
    for d in ("a", "b"):
        manifest = AuditManifest(
            scenario=scenario(n_users=30, delta_rank=0.4, seed=5),
            output_dir=tmp_path / d,
            config=MeasureConfig(relevant_attrs=("persona", "age")),
            significance=SignificanceSpec(measures=("group_user_bias",), n_permutations=100, seed=5),
        )
        run_audit(manifest)
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_significance_attached_and_validated(tmp_path):
    manifest = AuditManifest(
        scenario=scenario(n_users=20, delta_rank=0.6, seed=2),
        output_dir=None,
        config=MeasureConfig(relevant_attrs=("persona",)),
        significance=SignificanceSpec(measures=("group_user_bias", "combined_bias"), n_permutations=100, seed=1),
    )
    report = run_audit(manifest)
    assert set(report.significance) == {"group_user_bias", "combined_bias"}
    assert 0 < report.significance["group_user_bias"]["p_value"] <= 1
    assert report.notes  # the sampling-unit caveat is recorded

    bad = AuditManifest(
        scenario=scenario(n_users=20, seed=2),
        config=MeasureConfig(),
        significance=SignificanceSpec(measures=("individual_user_bias",), seed=1),
    )
    with pytest.raises(ConfigError):
        run_audit(bad)


def test_report_json_round_trips(tmp_path):
    report = run_audit(file_manifest(tmp_path))
    parsed = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))
    assert parsed["report_version"] == 1
    assert set(parsed["measures"]) == ALL_MEASURES
    assert parsed["dataset"]["class_sizes"] == {"P": 6, "P-bar": 6}


# --------------------------------------------------------------------------
# comparative mode


def test_compare_manifest_with_itself_is_zero(tmp_path):
    manifest = AuditManifest(scenario=scenario(n_users=12, seed=4), config=MeasureConfig(k=8))
    report = compare_audit(manifest, manifest, output_dir=tmp_path / "cmp")
    verdict = report.verdicts["comparative_bias"]
    assert verdict["magnitude"] == 0.0
    assert verdict["diagnostics"]["list_channel"]["magnitude"] == 0.0
    assert (tmp_path / "cmp" / "report.json").exists()


def test_compare_detects_content_shift(tmp_path):
    base = scenario(n_users=2000, seed=11, item_pool_size=40, list_depth=10)
    shifted = scenario(
        n_users=2000, seed=11, item_pool_size=40, list_depth=10,
        delta_content_p=0.2, delta_content_pbar=0.2,  # same-direction: pooled shift 0.2
    )
    a = AuditManifest(scenario=base, config=MeasureConfig(k=10))
    b = AuditManifest(scenario=shifted, config=MeasureConfig(k=10))
    report = compare_audit(a, b)
    assert report.verdicts["comparative_bias"]["magnitude"] == pytest.approx(0.2, abs=0.04)


def test_compare_disjoint_batteries_rejected():
    from rankbias.simulator import QuerySpec
    from test_simulator import STANCE, UNIFORM_GT

    a = AuditManifest(scenario=scenario(n_users=8), config=MeasureConfig())
    b = AuditManifest(
        scenario=scenario(n_users=8, queries=(QuerySpec("other", STANCE, UNIFORM_GT),)),
        config=MeasureConfig(),
    )
    with pytest.raises(InputError, match="shared query battery"):
        compare_audit(a, b)
