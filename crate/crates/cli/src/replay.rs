//! Re-execution of archive files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use morlot::replay::{Divergence, ReplayStep};
use morlot::{build_env, replay_test_case, ObjectiveId, ReplayReport};

use crate::campaign::ArchiveFile;
use crate::CliError;

/// Replays the archived test case of `objective`, or of every covered
/// objective when `None`.
pub fn replay_archive(file: &ArchiveFile, objective: Option<ObjectiveId>) -> Result<Vec<ReplayReport>, CliError> {
    let doc = &file.document;
    let mut env = build_env::<f64>(&doc.env_id, doc.seed, file.lanesim.as_ref())?;
    if env.n_objectives() != file.n_objectives {
        return Err(CliError::Config(format!(
            "archive declares {} objectives but {} has {}",
            file.n_objectives,
            doc.env_id,
            env.n_objectives()
        )));
    }
    doc.to_archive()?;
    let entries: Vec<_> = match objective {
        Some(o) => vec![doc.entry(o).ok_or_else(|| CliError::Config(format!("{} is not covered by {}", o, doc.run_id)))?],
        None => doc.entries.iter().collect(),
    };
    let mut reports = Vec::with_capacity(entries.len());
    for e in entries {
        if e.objective.index() >= file.n_objectives {
            return Err(CliError::Config(format!("objective {} out of range", e.objective)));
        }
        reports.push(replay_test_case(env.as_mut(), &doc.test_case(e), e.objective)?);
    }
    Ok(reports)
}

pub fn replay_path(path: &Path, objective: Option<ObjectiveId>) -> Result<Vec<ReplayReport>, CliError> {
    replay_archive(&ArchiveFile::load(path)?, objective)
}

/// Human-readable account of one replay.
pub fn render(report: &ReplayReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "objective {} ({} recorded steps)", report.objective, report.recorded_len);
    for s in &report.steps {
        let rewards: Vec<String> = s.rewards.iter().map(|r| format!("{r:.4}")).collect();
        let state = serde_json::to_string(&s.state).expect("states serialize");
        let _ = writeln!(out, "{:>5} {:<14} [{}] {}", s.index, s.action.name(), rewards.join(", "), state);
    }
    match (&report.divergence, report.violation_step) {
        (Some(Divergence::State { step, .. }), _) => {
            let _ = writeln!(out, "DIVERGED at step {step}: observed state differs from the recording");
        }
        (Some(Divergence::EndedEarly { step }), _) => {
            let _ = writeln!(out, "DIVERGED at step {step}: episode ended before the recording");
        }
        (Some(Divergence::Rejected { step, message }), _) => {
            let _ = writeln!(out, "DIVERGED at step {step}: {message}");
        }
        (None, Some(v)) if report.reproduced() => {
            let _ = writeln!(out, "violation reproduced at step {v}");
        }
        (None, Some(v)) => {
            let _ = writeln!(out, "NOT REPRODUCED: violation at step {v}, recording ends at {}", report.recorded_len.saturating_sub(1));
        }
        (None, None) => {
            let _ = writeln!(out, "NOT REPRODUCED: no violation");
        }
    }
    out
}

/// Writes the replayed steps as line-delimited JSON.
pub fn write_trace(report: &ReplayReport, out: &mut impl Write) -> std::io::Result<()> {
    for s in &report.steps {
        let line: &ReplayStep = s;
        writeln!(out, "{}", serde_json::to_string(line).expect("steps serialize"))?;
    }
    Ok(())
}
