//! The composite input precheck pipeline: sanitize → repair → type
//! check/correct → parameter check → backend check → optional smoke run,
//! iterated in a bounded loop until the candidate passes or the budget is
//! exhausted.
//!
//! Every stage emits a structured outcome and hands the (possibly rewritten)
//! candidate text to the next stage. A failed backend check feeds its stderr
//! through a small pattern table to pick the follow-up; unmatched failures
//! retry the loop anyway — the budget, not the table, bounds the work. Type
//! and parameter diagnostics that the pipeline cannot fix confidently stop
//! the loop immediately: they are deterministic, so another iteration cannot
//! change them, and inventing parameter values is exactly the failure class
//! this tool exists to catch.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::exec::{
    BackendKind, ExecError, ExecutionBackend, ExecutionMode, ExecutionRequest, ExecutionResult,
    DEFAULT_TIME_LIMIT,
};
use crate::hit;
use crate::registry::{
    apply_substitution, fill_candidates, validate_params, validate_types, ScoreWeights,
    SubstitutionPolicy, SyntaxRegistry, TypeIssue,
};
use crate::repair::{repair, DEFAULT_BUDGET};
use crate::sanitize::{sanitize, SanitationReport};

pub const DEFAULT_MAX_ITERATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Sanitize,
    Repair,
    TypeCheck,
    ParamCheck,
    BackendCheck,
    SmokeRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Fixed,
    Failed,
    Skipped,
}

/// One stage's outcome within one iteration. `diagnostics` is the owning
/// module's structured payload; `text_sha256` fingerprints the candidate
/// text after the stage, making the hand-off chain auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: StageKind,
    pub status: StageStatus,
    pub diagnostics: serde_json::Value,
    pub text_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub stages: Vec<StageOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedSubstitution {
    pub block_path: String,
    pub family: String,
    pub from: String,
    pub to: String,
    pub score: f64,
}

/// Complete report of a precheck run; emitted even on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecheckReport {
    pub iterations_used: usize,
    pub final_text: String,
    pub passed: bool,
    pub stage_log: Vec<IterationLog>,
    pub substitutions: Vec<AppliedSubstitution>,
    pub sanitation_summary: SanitationReport,
    pub check_report: Option<ExecutionResult>,
    pub run_report: Option<ExecutionResult>,
}

/// Follow-up action chosen from a failed backend check's stderr.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackAction {
    RerunRepair,
    RerunTypeCheck,
    GiveUp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StderrRule {
    pub pattern: String,
    pub action: FeedbackAction,
}

/// Built-in stderr patterns; extend or replace via
/// [`PrecheckConfig::stderr_rules`] (JSON: `[{"pattern", "action"}]`).
pub fn default_stderr_rules() -> Vec<StderrRule> {
    let rule = |pattern: &str, action| StderrRule {
        pattern: pattern.to_owned(),
        action,
    };
    vec![
        rule(
            r"(?i)unknown (object )?type|is not a registered object",
            FeedbackAction::RerunTypeCheck,
        ),
        rule(
            r"(?i)unterminated|unbalanced|missing '\]'|syntax error",
            FeedbackAction::RerunRepair,
        ),
        rule(
            r"(?i)no such file|cannot open|unable to open",
            FeedbackAction::GiveUp,
        ),
    ]
}

fn match_stderr(rules: &[StderrRule], stderr: &str) -> Option<FeedbackAction> {
    for rule in rules {
        if let Ok(re) = regex::Regex::new(&rule.pattern) {
            if re.is_match(stderr) {
                return Some(rule.action);
            }
        }
    }
    None
}

/// Registry binding for the type/param stages.
pub enum RegistryState<'a> {
    /// Type checking disabled; stages report `skipped`.
    Disabled,
    Ready(&'a SyntaxRegistry),
    /// Configured but unusable (load error); the stage fails with this
    /// message instead of crashing.
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct PrecheckConfig {
    pub max_iterations: usize,
    pub repair_budget: usize,
    pub auto_substitute: bool,
    pub substitution: SubstitutionPolicy,
    pub suggest_k: usize,
    pub weights: ScoreWeights,
    pub run_smoke: bool,
    pub time_limit: f64,
    /// Where candidate files and artifacts go; one precheck per directory
    /// when running candidates in parallel.
    pub working_dir: PathBuf,
    pub stderr_rules: Vec<StderrRule>,
}

impl Default for PrecheckConfig {
    fn default() -> Self {
        PrecheckConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            repair_budget: DEFAULT_BUDGET,
            auto_substitute: true,
            substitution: SubstitutionPolicy::default(),
            suggest_k: 3,
            weights: ScoreWeights::default(),
            run_smoke: false,
            time_limit: DEFAULT_TIME_LIMIT,
            working_dir: std::env::temp_dir().join("hitcheck-work"),
            stderr_rules: default_stderr_rules(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PrecheckError {
    #[error("source is empty")]
    EmptySource,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Inline text or a file path.
pub enum PrecheckSource {
    Text(String),
    Path(PathBuf),
}

impl PrecheckSource {
    fn load(&self) -> Result<String, PrecheckError> {
        let text = match self {
            PrecheckSource::Text(t) => t.clone(),
            PrecheckSource::Path(p) => {
                std::fs::read_to_string(p).map_err(|source| PrecheckError::Io {
                    path: p.clone(),
                    source,
                })?
            }
        };
        if text.is_empty() {
            return Err(PrecheckError::EmptySource);
        }
        Ok(text)
    }
}

fn sha(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn merge_sanitation(total: &mut SanitationReport, part: &SanitationReport) {
    total.edits.extend(part.edits.iter().cloned());
    total.newline_normalizations += part.newline_normalizations;
    for (action, n) in &part.counts {
        *total.counts.entry(*action).or_insert(0) += n;
    }
}

/// Run the bounded precheck pipeline. Configuration problems surface as
/// failed stages inside the report, never as a crash; only an unreadable or
/// empty source is an error.
pub fn precheck(
    source: &PrecheckSource,
    config: &PrecheckConfig,
    registry: &RegistryState<'_>,
    backend: &dyn ExecutionBackend,
) -> Result<PrecheckReport, PrecheckError> {
    let mut text = source.load()?;
    let mut report = PrecheckReport {
        iterations_used: 0,
        final_text: String::new(),
        passed: false,
        stage_log: Vec::new(),
        substitutions: Vec::new(),
        sanitation_summary: SanitationReport::default(),
        check_report: None,
        run_report: None,
    };

    'iterations: for iteration in 1..=config.max_iterations.max(1) {
        report.iterations_used = iteration;
        let mut stages: Vec<StageOutcome> = Vec::new();
        let push = |stages: &mut Vec<StageOutcome>, stage, status, diag, text: &str| {
            stages.push(StageOutcome {
                stage,
                status,
                diagnostics: diag,
                text_sha256: sha(text),
            });
        };

        // -- sanitize --------------------------------------------------
        let (clean, san) = sanitize(&text);
        text = clean;
        let status = if san.is_clean() {
            StageStatus::Ok
        } else {
            StageStatus::Fixed
        };
        merge_sanitation(&mut report.sanitation_summary, &san);
        push(
            &mut stages,
            StageKind::Sanitize,
            status,
            serde_json::to_value(&san).unwrap(),
            &text,
        );

        // -- repair ----------------------------------------------------
        let outcome = repair(&text, config.repair_budget);
        let repair_diag = serde_json::json!({
            "actions": outcome.actions,
            "iterations_used": outcome.iterations_used,
            "final_failure": outcome.final_failure,
        });
        if !outcome.success {
            push(
                &mut stages,
                StageKind::Repair,
                StageStatus::Failed,
                repair_diag,
                &outcome.text,
            );
            report.stage_log.push(IterationLog { iteration, stages });
            break 'iterations; // deterministic: retrying cannot help
        }
        let repair_status = if outcome.actions.is_empty() {
            StageStatus::Ok
        } else {
            StageStatus::Fixed
        };
        text = outcome.text.clone();
        push(&mut stages, StageKind::Repair, repair_status, repair_diag, &text);
        let mut tree = hit::parse(&text).expect("repair succeeded, text parses");

        // -- type check / correction ------------------------------------
        let mut type_failed = false;
        match registry {
            RegistryState::Disabled => {
                push(
                    &mut stages,
                    StageKind::TypeCheck,
                    StageStatus::Skipped,
                    serde_json::Value::Null,
                    &text,
                );
            }
            RegistryState::Failed(msg) => {
                // Configuration error: not retryable.
                push(
                    &mut stages,
                    StageKind::TypeCheck,
                    StageStatus::Failed,
                    serde_json::json!({ "error": msg }),
                    &text,
                );
                type_failed = true;
            }
            RegistryState::Ready(reg) => {
                let mut applied_here = 0usize;
                if config.auto_substitute {
                    // Fix one issue at a time; each substitution reshapes
                    // the tree, so re-validate between applications.
                    loop {
                        let issues = validate_types(&tree, reg);
                        let mut progressed = false;
                        for mut issue in issues {
                            fill_candidates(
                                &mut issue,
                                reg,
                                config.suggest_k,
                                config.weights,
                                None,
                            );
                            let Some(top) = issue.candidates.first().cloned() else {
                                continue;
                            };
                            if let Ok(new_tree) =
                                apply_substitution(&tree, &issue, &top, &config.substitution)
                            {
                                report.substitutions.push(AppliedSubstitution {
                                    block_path: issue.usage.block_path.clone(),
                                    family: issue.usage.family.clone(),
                                    from: issue.usage.type_name.clone(),
                                    to: top.name.clone(),
                                    score: top.score,
                                });
                                tree = new_tree;
                                text = tree.source().to_owned();
                                applied_here += 1;
                                progressed = true;
                                break;
                            }
                        }
                        if !progressed {
                            break;
                        }
                    }
                }
                let mut remaining: Vec<TypeIssue> = validate_types(&tree, reg);
                for issue in &mut remaining {
                    fill_candidates(issue, reg, config.suggest_k, config.weights, None);
                }
                let diag = serde_json::json!({
                    "issues": remaining,
                    "substitutions_applied": applied_here,
                });
                if !remaining.is_empty() {
                    push(&mut stages, StageKind::TypeCheck, StageStatus::Failed, diag, &text);
                    type_failed = true;
                } else {
                    let status = if applied_here > 0 {
                        StageStatus::Fixed
                    } else {
                        StageStatus::Ok
                    };
                    push(&mut stages, StageKind::TypeCheck, status, diag, &text);
                }
            }
        }
        if type_failed {
            // Unresolved names need user clarification; the loop cannot
            // invent them.
            report.stage_log.push(IterationLog { iteration, stages });
            break 'iterations;
        }

        // -- parameter check ----------------------------------------------
        match registry {
            RegistryState::Ready(reg) => {
                let issues = validate_params(&tree, reg);
                let diag = serde_json::to_value(&issues).unwrap();
                if issues.is_empty() {
                    push(&mut stages, StageKind::ParamCheck, StageStatus::Ok, diag, &text);
                } else {
                    // No auto-fix: synthesizing parameter values would be
                    // semantic hallucination.
                    push(&mut stages, StageKind::ParamCheck, StageStatus::Failed, diag, &text);
                    report.stage_log.push(IterationLog { iteration, stages });
                    break 'iterations;
                }
            }
            _ => {
                push(
                    &mut stages,
                    StageKind::ParamCheck,
                    StageStatus::Skipped,
                    serde_json::Value::Null,
                    &text,
                );
            }
        }

        // -- backend check ---------------------------------------------------
        let candidate = match write_candidate(&config.working_dir, &text) {
            Ok(p) => p,
            Err(e) => {
                push(
                    &mut stages,
                    StageKind::BackendCheck,
                    StageStatus::Failed,
                    serde_json::json!({ "error": e.to_string() }),
                    &text,
                );
                report.stage_log.push(IterationLog { iteration, stages });
                break 'iterations;
            }
        };
        let req = ExecutionRequest {
            input_path: candidate.clone(),
            mode: ExecutionMode::CheckInput,
            time_limit: config.time_limit,
            working_dir: config.working_dir.clone(),
            extra_args: Vec::new(),
        };
        match run_stage(backend, &req, StageKind::BackendCheck, config, &text, &mut stages) {
            StageResult::Passed(result) => {
                report.check_report = Some(result);
            }
            StageResult::Retry(result) => {
                report.check_report = result.or(report.check_report.take());
                report.stage_log.push(IterationLog { iteration, stages });
                continue 'iterations;
            }
            StageResult::Abort(result) => {
                report.check_report = result.or(report.check_report.take());
                report.stage_log.push(IterationLog { iteration, stages });
                break 'iterations;
            }
        }

        // -- optional smoke run ------------------------------------------------
        if config.run_smoke {
            let req = req.with_mode(ExecutionMode::Run);
            match run_stage(backend, &req, StageKind::SmokeRun, config, &text, &mut stages) {
                StageResult::Passed(result) => {
                    report.run_report = Some(result);
                }
                StageResult::Retry(result) => {
                    report.run_report = result.or(report.run_report.take());
                    report.stage_log.push(IterationLog { iteration, stages });
                    continue 'iterations;
                }
                StageResult::Abort(result) => {
                    report.run_report = result.or(report.run_report.take());
                    report.stage_log.push(IterationLog { iteration, stages });
                    break 'iterations;
                }
            }
        }

        report.stage_log.push(IterationLog { iteration, stages });
        report.passed = true;
        break 'iterations;
    }

    report.final_text = text;
    Ok(report)
}

enum StageResult {
    Passed(ExecutionResult),
    Retry(Option<ExecutionResult>),
    Abort(Option<ExecutionResult>),
}

fn run_stage(
    backend: &dyn ExecutionBackend,
    req: &ExecutionRequest,
    stage: StageKind,
    config: &PrecheckConfig,
    text: &str,
    stages: &mut Vec<StageOutcome>,
) -> StageResult {
    let push = |stages: &mut Vec<StageOutcome>, status, diag| {
        stages.push(StageOutcome {
            stage,
            status,
            diagnostics: diag,
            text_sha256: sha(text),
        });
    };
    match backend.execute(req) {
        Ok(result) => {
            if result.passed() {
                push(
                    stages,
                    StageStatus::Ok,
                    serde_json::to_value(&result).unwrap(),
                );
                StageResult::Passed(result)
            } else {
                let action = match_stderr(&config.stderr_rules, &result.stderr);
                let diag = serde_json::json!({
                    "result": result,
                    "feedback_action": action,
                });
                push(stages, StageStatus::Failed, diag);
                if action == Some(FeedbackAction::GiveUp) {
                    StageResult::Abort(Some(result))
                } else {
                    // Matched rerun hints and unmatched failures both loop:
                    // the iteration budget is the bound.
                    StageResult::Retry(Some(result))
                }
            }
        }
        Err(e) => {
            push(
                stages,
                StageStatus::Failed,
                serde_json::json!({ "error": e.to_string() }),
            );
            match e {
                ExecError::ExecutableNotConfigured
                | ExecError::RemoteUrlNotConfigured
                | ExecError::Script(_) => StageResult::Abort(None),
                _ => StageResult::Retry(None),
            }
        }
    }
}

fn write_candidate(dir: &Path, text: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("candidate.i");
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Backend stand-in that always fails with a fixed message; lets callers
/// turn backend construction errors into a failed stage instead of a crash.
pub struct FailingBackend(pub String);

impl ExecutionBackend for FailingBackend {
    fn execute(&self, _req: &ExecutionRequest) -> Result<ExecutionResult, ExecError> {
        Err(ExecError::Script(self.0.clone()))
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }
}

// ---------------------------------------------------------------------------
// Final-input extraction (the evaluation gate's input rule)
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("no moose-fenced code block and no usable fallback")]
    NoCandidate,
}

/// Pull the candidate input out of an agent transcript: the LAST fenced
/// code block tagged `moose` (case-insensitive) wins; otherwise the
/// fallback file's content; otherwise an error. Nested fences are not
/// supported; an unclosed fence extends to the end of the transcript.
pub fn extract_final_input(
    transcript: &str,
    fallback: Option<&Path>,
) -> Result<String, ExtractError> {
    let mut last_moose: Option<String> = None;
    let mut in_fence = false;
    let mut is_moose = false;
    let mut body = String::new();
    for line in transcript.lines() {
        let trimmed = line.trim_start();
        if !in_fence {
            if let Some(rest) = trimmed.strip_prefix("```") {
                in_fence = true;
                let tag = rest
                    .split_whitespace()
                    .next()
                    .unwrap_or("")
                    .to_ascii_lowercase();
                is_moose = tag == "moose";
                body.clear();
            }
        } else if trimmed.starts_with("```") && trimmed.trim_end().chars().all(|c| c == '`') {
            in_fence = false;
            if is_moose {
                last_moose = Some(body.clone());
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    if in_fence && is_moose {
        last_moose = Some(body);
    }
    if let Some(text) = last_moose {
        return Ok(text);
    }
    match fallback {
        Some(path) => std::fs::read_to_string(path).map_err(|_| ExtractError::NoCandidate),
        None => Err(ExtractError::NoCandidate),
    }
}

#[cfg(test)]
#[path = "precheck_tests.rs"]
mod tests;
