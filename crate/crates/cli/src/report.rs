//! Comparison tables over a results file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use morlot::stats::{Magnitude, PMethod};
use morlot::{build_env, mann_whitney_u, vargha_delaney, Approach};
use serde::Serialize;

use crate::campaign::ResultRow;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproachSummary {
    pub env_id: String,
    pub approach: Approach,
    pub runs: usize,
    pub mean_tse: f64,
    pub median_tse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub env_id: String,
    pub approach_a: Approach,
    pub approach_b: Approach,
    pub p_value: f64,
    pub p_method: PMethod,
    pub a12: f64,
    pub magnitude: Magnitude,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageRow {
    pub env_id: String,
    pub objective: usize,
    pub name: String,
    pub approach: Approach,
    pub covered_runs: usize,
    pub runs: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub summaries: Vec<ApproachSummary>,
    pub comparisons: Vec<Comparison>,
    pub coverage: Vec<CoverageRow>,
    /// False when the results file had no end-of-run marker.
    pub complete: bool,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn objective_names(env_id: &str, n: usize) -> Vec<String> {
    match build_env::<f64>(env_id, 0, None) {
        Ok(env) if env.n_objectives() == n => env.objective_names(),
        _ => (0..n).map(|i| format!("o{i}")).collect(),
    }
}

pub fn build_report(rows: &[ResultRow], complete: bool) -> Result<Report, CliError> {
    let mut by_env: BTreeMap<&str, BTreeMap<Approach, Vec<&ResultRow>>> = BTreeMap::new();
    for r in rows {
        by_env.entry(&r.env_id).or_default().entry(r.approach).or_default().push(r);
    }
    if by_env.is_empty() {
        return Err(CliError::InsufficientData("no result rows".into()));
    }
    let mut report = Report { complete, ..Default::default() };
    for (env_id, groups) in &by_env {
        if groups.len() < 2 {
            return Err(CliError::InsufficientData(format!("{env_id}: need at least two approaches")));
        }
        if let Some((a, g)) = groups.iter().find(|(_, g)| g.len() < 2) {
            return Err(CliError::InsufficientData(format!("{env_id}: {a} has {} run(s), need at least two", g.len())));
        }
        let n = groups.values().next().and_then(|g| g.first()).map_or(0, |r| r.covered_mask.len());
        let bad_mask = |r: &&&ResultRow| r.covered_mask.len() != n || r.covered_mask.chars().any(|c| c != '0' && c != '1');
        if let Some(r) = groups.values().flatten().find(bad_mask) {
            return Err(CliError::Config(format!("{}: malformed covered_mask `{}`", r.run_id, r.covered_mask)));
        }

        let tses: BTreeMap<Approach, Vec<f64>> =
            groups.iter().map(|(&a, g)| (a, g.iter().map(|r| r.tse).collect())).collect();
        for (&approach, v) in &tses {
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            report.summaries.push(ApproachSummary {
                env_id: env_id.to_string(),
                approach,
                runs: v.len(),
                mean_tse: v.iter().sum::<f64>() / v.len() as f64,
                median_tse: median(&sorted),
            });
        }
        let approaches: Vec<Approach> = tses.keys().copied().collect();
        for (i, &a) in approaches.iter().enumerate() {
            for &b in &approaches[i + 1..] {
                let mw = mann_whitney_u(&tses[&a], &tses[&b])?;
                let vd = vargha_delaney(&tses[&a], &tses[&b])?;
                report.comparisons.push(Comparison {
                    env_id: env_id.to_string(),
                    approach_a: a,
                    approach_b: b,
                    p_value: mw.p_two_sided,
                    p_method: mw.method,
                    a12: vd.a12,
                    magnitude: vd.magnitude,
                });
            }
        }
        for (o, name) in objective_names(env_id, n).into_iter().enumerate() {
            for (&approach, g) in groups {
                report.coverage.push(CoverageRow {
                    env_id: env_id.to_string(),
                    objective: o,
                    name: name.clone(),
                    approach,
                    covered_runs: g.iter().filter(|r| r.covered_mask.as_bytes()[o] == b'1').count(),
                    runs: g.len(),
                });
            }
        }
    }
    Ok(report)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

impl Report {
    /// Writes `summary.csv`, `comparisons.csv` and `coverage.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        write_csv(&dir.join("summary.csv"), &self.summaries)?;
        write_csv(&dir.join("comparisons.csv"), &self.comparisons)?;
        write_csv(&dir.join("coverage.csv"), &self.coverage)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.complete {
            out.push_str("warning: results file has no end-of-run marker; the campaign did not finish\n\n");
        }
        let envs: Vec<&str> = {
            let mut v: Vec<&str> = self.summaries.iter().map(|s| s.env_id.as_str()).collect();
            v.dedup();
            v
        };
        for env in envs {
            let _ = writeln!(out, "== {env} ==\n");
            let _ = writeln!(out, "{:<8} {:>5} {:>9} {:>10}", "approach", "runs", "mean TSE", "median TSE");
            for s in self.summaries.iter().filter(|s| s.env_id == env) {
                let _ = writeln!(out, "{:<8} {:>5} {:>9.4} {:>10.4}", s.approach.name(), s.runs, s.mean_tse, s.median_tse);
            }
            let _ = writeln!(out, "\n{:<16} {:>9} {:>7} {:>7}  magnitude", "A vs B", "p", "method", "A12");
            for c in self.comparisons.iter().filter(|c| c.env_id == env) {
                let pair = format!("{} vs {}", c.approach_a.name(), c.approach_b.name());
                let method = if c.p_method == PMethod::Exact { "exact" } else { "normal" };
                let _ = writeln!(out, "{pair:<16} {:>9.4} {method:>7} {:>7.3}  {}", c.p_value, c.a12, c.magnitude);
            }
            let rows: Vec<&CoverageRow> = self.coverage.iter().filter(|c| c.env_id == env).collect();
            let approaches: Vec<Approach> = {
                let mut v: Vec<Approach> = rows.iter().map(|r| r.approach).collect();
                v.sort();
                v.dedup();
                v
            };
            let _ = write!(out, "\n{:<4} {:<24}", "obj", "requirement");
            for a in &approaches {
                let _ = write!(out, " {:>7}", a.name());
            }
            out.push('\n');
            let mut objectives: Vec<(usize, &str)> = rows.iter().map(|r| (r.objective, r.name.as_str())).collect();
            objectives.dedup();
            for (o, name) in objectives {
                let _ = write!(out, "{o:<4} {name:<24}");
                for a in &approaches {
                    let r = rows.iter().find(|r| r.objective == o && r.approach == *a).expect("one row per cell");
                    let _ = write!(out, " {:>7}", format!("{}/{}", r.covered_runs, r.runs));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(approach: Approach, seed: u64, tse: f64, mask: &str) -> ResultRow {
        ResultRow {
            run_id: format!("{approach}-{seed}"),
            approach,
            env_id: "lanesim:straight".into(),
            seed,
            budget_steps: 10,
            tse,
            covered_mask: mask.into(),
            wall_ms: 0,
        }
    }

    #[test]
    fn identical_groups_show_no_effect() {
        let mut rows = Vec::new();
        for (s, t) in [0.5, 0.3333, 0.5].into_iter().enumerate() {
            rows.push(row(Approach::Morlot, s as u64, t, "010010"));
            rows.push(row(Approach::RandomSearch, s as u64, t, "010010"));
        }
        let r = build_report(&rows, true).unwrap();
        assert_eq!(r.comparisons.len(), 1);
        assert_eq!(r.comparisons[0].a12, 0.5);
        assert_eq!(r.comparisons[0].p_value, 1.0);
        let mesh: Vec<_> = r.coverage.iter().filter(|c| c.objective == 3).collect();
        assert!(mesh.iter().all(|c| c.covered_runs == 0));
        assert_eq!(r.coverage.iter().find(|c| c.objective == 1).unwrap().covered_runs, 3);
        assert!(r.to_text().contains("MORLOT vs RS"));
    }

    #[test]
    fn needs_two_approaches_with_two_runs() {
        let one = vec![row(Approach::Morlot, 0, 0.5, "01"), row(Approach::Morlot, 1, 0.5, "01")];
        assert!(matches!(build_report(&one, true), Err(CliError::InsufficientData(_))));
        let short = vec![row(Approach::Morlot, 0, 0.5, "01"), row(Approach::Morlot, 1, 0.5, "01"), row(Approach::Mosa, 0, 0.5, "01")];
        assert!(matches!(build_report(&short, true), Err(CliError::InsufficientData(_))));
        assert!(matches!(build_report(&[], true), Err(CliError::InsufficientData(_))));
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(median(&[1.0, 2.0, 9.0]), 2.0);
    }
}
