use super::*;
use crate::exec::mock::{MockBackend, MockScript};
use crate::registry::SyntaxRegistry;

fn test_registry() -> SyntaxRegistry {
    SyntaxRegistry::from_json(
        r#"{
        "app": "demo",
        "families": {
            "Mesh": [{"name": "GeneratedMesh"}],
            "Kernels": [{"name": "Diffusion"}, {"name": "ADDiffusion"}, {"name": "BodyForce"}],
            "BCs": [{"name": "DirichletBC", "parameters": {"variable": {"required": true}}}]
        }
    }"#,
    )
    .unwrap()
}

fn config_in(dir: &std::path::Path) -> PrecheckConfig {
    PrecheckConfig {
        working_dir: dir.to_path_buf(),
        substitution: SubstitutionPolicy {
            auto_threshold: 0.4,
            margin: 0.05,
            force: false,
        },
        ..Default::default()
    }
}

fn ok_backend() -> MockBackend {
    MockBackend::new(MockScript::default())
}

#[test]
fn clean_input_passes_first_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let reg = test_registry();
    let text = "[Mesh]\n  type = GeneratedMesh\n[]\n";
    let report = precheck(
        &PrecheckSource::Text(text.into()),
        &config_in(dir.path()),
        &RegistryState::Ready(&reg),
        &ok_backend(),
    )
    .unwrap();
    assert!(report.passed);
    assert_eq!(report.iterations_used, 1);
    assert!(report.substitutions.is_empty());
    assert!(report.sanitation_summary.edits.is_empty());
    assert_eq!(report.final_text, text);
    assert_eq!(report.check_report.unwrap().exit_code, 0);
    let stages = &report.stage_log[0].stages;
    assert!(stages
        .iter()
        .all(|s| matches!(s.status, StageStatus::Ok | StageStatus::Skipped)));
}

#[test]
fn compound_mutations_are_fixed_in_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let reg = test_registry();
    // NBSP after `type`, missing final `[]`, and a typo'd kernel name.
    let text = "[Mesh]\n  type\u{00A0}= GeneratedMesh\n[]\n[Kernels]\n  [d]\n    type = Diffusionn\n  []\n";
    let report = precheck(
        &PrecheckSource::Text(text.into()),
        &config_in(dir.path()),
        &RegistryState::Ready(&reg),
        &ok_backend(),
    )
    .unwrap();
    assert!(report.passed, "{report:#?}");
    assert_eq!(report.iterations_used, 1);
    assert_eq!(report.sanitation_summary.edits.len(), 1);
    assert_eq!(report.substitutions.len(), 1);
    assert_eq!(report.substitutions[0].from, "Diffusionn");
    assert_eq!(report.substitutions[0].to, "Diffusion");
    assert!(report.final_text.contains("type = Diffusion\n"));
    assert!(crate::hit::parse(&report.final_text).is_ok());
}

#[test]
fn failing_backend_exhausts_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let script =
        MockScript::from_json(r#"{"default": {"exit_code": 1, "stderr": "solve failed"}}"#)
            .unwrap();
    let report = precheck(
        &PrecheckSource::Text("[Mesh]\n  dim = 1\n[]\n".into()),
        &config_in(dir.path()),
        &RegistryState::Disabled,
        &MockBackend::new(script),
    )
    .unwrap();
    assert!(!report.passed);
    assert_eq!(report.iterations_used, DEFAULT_MAX_ITERATIONS);
    assert_eq!(report.stage_log.len(), DEFAULT_MAX_ITERATIONS);
    assert_eq!(report.check_report.unwrap().exit_code, 1);
}

#[test]
fn give_up_pattern_stops_the_loop() {
    let dir = tempfile::tempdir().unwrap();
    let script = MockScript::from_json(
        r#"{"default": {"exit_code": 1, "stderr": "Unable to open file mesh.e"}}"#,
    )
    .unwrap();
    let report = precheck(
        &PrecheckSource::Text("[Mesh]\n  dim = 1\n[]\n".into()),
        &config_in(dir.path()),
        &RegistryState::Disabled,
        &MockBackend::new(script),
    )
    .unwrap();
    assert!(!report.passed);
    assert_eq!(report.iterations_used, 1);
}

#[test]
fn unresolved_type_issue_fails_fast() {
    let dir = tempfile::tempdir().unwrap();
    let reg = test_registry();
    // Nothing in Kernels is remotely close: substitution gate refuses.
    let text = "[Kernels]\n  [x]\n    type = Zebra\n  []\n[]\n";
    let report = precheck(
        &PrecheckSource::Text(text.into()),
        &config_in(dir.path()),
        &RegistryState::Ready(&reg),
        &ok_backend(),
    )
    .unwrap();
    assert!(!report.passed);
    assert_eq!(report.iterations_used, 1);
    let last = report.stage_log.last().unwrap().stages.last().unwrap();
    assert_eq!(last.stage, StageKind::TypeCheck);
    assert_eq!(last.status, StageStatus::Failed);
    // candidates are carried in the diagnostics for clarification
    assert!(last.diagnostics["issues"][0]["candidates"].is_array());
}

#[test]
fn param_issues_fail_without_backend_call() {
    let dir = tempfile::tempdir().unwrap();
    let reg = test_registry();
    let text = "[BCs]\n  [left]\n    type = DirichletBC\n  []\n[]\n";
    let report = precheck(
        &PrecheckSource::Text(text.into()),
        &config_in(dir.path()),
        &RegistryState::Ready(&reg),
        &ok_backend(),
    )
    .unwrap();
    assert!(!report.passed);
    assert!(report.check_report.is_none());
    let last = report.stage_log.last().unwrap().stages.last().unwrap();
    assert_eq!(last.stage, StageKind::ParamCheck);
    assert_eq!(last.status, StageStatus::Failed);
}

#[test]
fn registry_load_failure_is_a_failed_stage() {
    let dir = tempfile::tempdir().unwrap();
    let report = precheck(
        &PrecheckSource::Text("[Mesh]\n  dim = 1\n[]\n".into()),
        &config_in(dir.path()),
        &RegistryState::Failed("registry.json: no such file".into()),
        &ok_backend(),
    )
    .unwrap();
    assert!(!report.passed);
    let last = report.stage_log.last().unwrap().stages.last().unwrap();
    assert_eq!(last.stage, StageKind::TypeCheck);
    assert_eq!(last.status, StageStatus::Failed);
}

#[test]
fn backend_construction_error_is_a_failed_stage() {
    let dir = tempfile::tempdir().unwrap();
    let report = precheck(
        &PrecheckSource::Text("[Mesh]\n  dim = 1\n[]\n".into()),
        &config_in(dir.path()),
        &RegistryState::Disabled,
        &FailingBackend("no executable configured".into()),
    )
    .unwrap();
    assert!(!report.passed);
    let last = report.stage_log.last().unwrap().stages.last().unwrap();
    assert_eq!(last.stage, StageKind::BackendCheck);
    assert_eq!(last.status, StageStatus::Failed);
}

#[test]
fn rerunning_on_final_text_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let reg = test_registry();
    let text = "[Kernels]\n  [d]\n    type = Diffusionn\n  []\n"; // typo + missing closer
    let cfg = config_in(dir.path());
    let first = precheck(
        &PrecheckSource::Text(text.into()),
        &cfg,
        &RegistryState::Ready(&reg),
        &ok_backend(),
    )
    .unwrap();
    assert!(first.passed);
    let second = precheck(
        &PrecheckSource::Text(first.final_text.clone()),
        &cfg,
        &RegistryState::Ready(&reg),
        &ok_backend(),
    )
    .unwrap();
    assert!(second.passed);
    assert_eq!(second.iterations_used, 1);
    assert!(second.substitutions.is_empty());
    assert!(second.sanitation_summary.edits.is_empty());
    assert_eq!(second.final_text, first.final_text);
    let mutating = second.stage_log[0]
        .stages
        .iter()
        .filter(|s| s.status == StageStatus::Fixed)
        .count();
    assert_eq!(mutating, 0);
}

#[test]
fn stage_handoff_chain_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let reg = test_registry();
    let text = "[Kernels]\n  [d]\n    type = Diffusionn\n  []\n";
    let report = precheck(
        &PrecheckSource::Text(text.into()),
        &config_in(dir.path()),
        &RegistryState::Ready(&reg),
        &ok_backend(),
    )
    .unwrap();
    // The last stage's hash is the hash of final_text, and hashes only
    // change at stages that reported a mutation.
    let stages = &report.stage_log.last().unwrap().stages;
    assert_eq!(stages.last().unwrap().text_sha256, sha(&report.final_text));
    for pair in stages.windows(2) {
        if pair[1].status != StageStatus::Fixed {
            assert_eq!(pair[0].text_sha256, pair[1].text_sha256);
        }
    }
}

#[test]
fn empty_source_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = precheck(
        &PrecheckSource::Text(String::new()),
        &config_in(dir.path()),
        &RegistryState::Disabled,
        &ok_backend(),
    )
    .unwrap_err();
    assert!(matches!(err, PrecheckError::EmptySource));
}

mod extraction {
    use super::*;

    #[test]
    fn last_moose_fence_wins() {
        let transcript = "Here is a draft:\n```moose\n[Mesh]\nfirst = 1\n[]\n```\nRevised:\n```moose\n[Mesh]\nsecond = 2\n[]\n```\ndone\n";
        let got = extract_final_input(transcript, None).unwrap();
        assert_eq!(got, "[Mesh]\nsecond = 2\n[]\n");
    }

    #[test]
    fn non_moose_tags_are_ignored() {
        let transcript = "```python\nprint('x')\n```\n```MOOSE\n[Mesh]\n[]\n```\n```text\nnot this\n```\n";
        let got = extract_final_input(transcript, None).unwrap();
        assert_eq!(got, "[Mesh]\n[]\n");
    }

    #[test]
    fn fallback_file_when_no_fence() {
        let dir = tempfile::tempdir().unwrap();
        let fallback = dir.path().join("current.i");
        std::fs::write(&fallback, "[Outputs]\n[]\n").unwrap();
        let got = extract_final_input("no fences here", Some(&fallback)).unwrap();
        assert_eq!(got, "[Outputs]\n[]\n");
    }

    #[test]
    fn neither_is_an_error() {
        assert!(extract_final_input("plain text", None).is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(extract_final_input("plain", Some(&dir.path().join("missing.i"))).is_err());
    }

    #[test]
    fn unclosed_moose_fence_extends_to_eof() {
        let got = extract_final_input("```moose\n[Mesh]\n[]\n", None).unwrap();
        assert_eq!(got, "[Mesh]\n[]\n");
    }

    #[test]
    fn moose_fence_with_attributes() {
        let got = extract_final_input("```moose title=case.i\n[Mesh]\n[]\n```\n", None).unwrap();
        assert_eq!(got, "[Mesh]\n[]\n");
    }
}
