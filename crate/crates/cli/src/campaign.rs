//! Campaign execution and persistence.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use morlot::baselines::GenerationRecord;
use morlot::env::{EnvKind, LaneSimConfig};
use morlot::trace::Tee;
use morlot::{
    build_env, fitest_search, mosa_search, random_search, run_morlot, tse, Approach, Archive, ArchiveDocument, Budget,
    CampaignResult, CoverageTimeline, MorlotOptions, MorlotState, ObjectiveId, RunObserver, TraceRecord,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::CampaignConfig;
use crate::CliError;

pub const RESULTS_FILE: &str = "results.csv";
pub const RESULTS_HEADER: [&str; 8] =
    ["run_id", "approach", "env_id", "seed", "budget_steps", "tse", "covered_mask", "wall_ms"];
/// `run_id` of the row written once every run has finished.
pub const END_MARKER: &str = "#end";

/// On-disk archive: the run's archive plus what is needed to rebuild its
/// environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveFile {
    #[serde(flatten)]
    pub document: ArchiveDocument,
    pub n_objectives: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanesim: Option<LaneSimConfig>,
}

impl ArchiveFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// What one run left behind, in addition to its files.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub result: CampaignResult,
    pub archive: Archive,
    pub consumed_steps: u64,
    pub wall_ms: u64,
    pub generations: Vec<GenerationRecord>,
}

impl RunSummary {
    /// `None` when no wall-clock time was recorded.
    pub fn steps_per_second(&self) -> Option<f64> {
        (self.wall_ms > 0).then(|| self.consumed_steps as f64 * 1000.0 / self.wall_ms as f64)
    }
}

pub fn run_id(approach: Approach, env_id: &str, seed: u64) -> String {
    format!("{}-{}-s{seed}", approach.name(), env_id.replace(':', "_"))
}

pub fn covered_mask(archive: &Archive, n: usize) -> String {
    ObjectiveId::all(n).map(|o| if archive.covers(o) { '1' } else { '0' }).collect()
}

/// Streams trace records as line-delimited JSON, keeping the first I/O error.
struct JsonlTrace<W: Write> {
    out: W,
    error: Option<io::Error>,
}

impl<W: Write> RunObserver for JsonlTrace<W> {
    fn wants_trace(&self) -> bool {
        self.error.is_none()
    }

    fn on_trace(&mut self, record: &TraceRecord) {
        let line = serde_json::to_string(record).expect("trace records serialize");
        if let Err(e) = writeln!(self.out, "{line}") {
            self.error = Some(e);
        }
    }
}

fn lanesim_for(cfg: &CampaignConfig) -> Option<LaneSimConfig> {
    matches!(EnvKind::parse(&cfg.env_id), Ok(EnvKind::LaneSim(_))).then(|| cfg.lanesim.clone())
}

/// Executes one run and writes its archive (and trace, when enabled).
pub fn execute_run(cfg: &CampaignConfig, approach: Approach, seed: u64) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let mut env = build_env::<f64>(&cfg.env_id, seed, Some(&cfg.lanesim))?;
    let n = env.n_objectives();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = Budget::new(cfg.budget_steps);
    let mut timeline = CoverageTimeline::new(cfg.sample_interval_steps, n);
    let id = run_id(approach, &cfg.env_id, seed);
    let mut generations = Vec::new();

    let archive = match approach {
        Approach::Morlot => {
            let mut state = MorlotState::new(n);
            let options = MorlotOptions { recheck_covered: cfg.recheck_covered };
            if cfg.trace {
                let path = cfg.output_dir.join("traces").join(format!("{id}.jsonl"));
                let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let mut trace = JsonlTrace { out: BufWriter::new(file), error: None };
                let mut obs = Tee(&mut timeline, &mut trace);
                run_morlot(env.as_mut(), &mut state, &mut budget, &cfg.learn_params, options, &mut rng, &mut obs)?;
                if let Some(e) = trace.error.take() {
                    return Err(CliError::Io(format!("{}: {e}", path.display())));
                }
                trace.out.flush().map_err(|e| CliError::Io(e.to_string()))?;
            } else {
                run_morlot(env.as_mut(), &mut state, &mut budget, &cfg.learn_params, options, &mut rng, &mut timeline)?;
            }
            state.archive
        }
        Approach::RandomSearch => random_search(env.as_mut(), &mut budget, &mut rng, &mut timeline)?,
        Approach::Mosa | Approach::Fitest => {
            let search = if approach == Approach::Mosa { mosa_search } else { fitest_search };
            let out = search(env.as_mut(), &mut budget, &cfg.search_params, &mut rng, &mut timeline)?;
            generations = out.generations;
            out.archive
        }
    };
    timeline.finish(budget.consumed(), &archive);

    let file = ArchiveFile {
        document: ArchiveDocument::from_archive(&id, approach, &cfg.env_id, seed, &archive),
        n_objectives: n,
        lanesim: lanesim_for(cfg),
    };
    let path = cfg.output_dir.join("archives").join(format!("{id}.json"));
    let json = serde_json::to_string_pretty(&file).expect("archives serialize");
    fs::write(&path, json).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;

    let result = CampaignResult {
        approach,
        env_id: cfg.env_id.clone(),
        seed,
        tse: tse(&archive, n)?,
        covered: archive.covered().collect(),
        tse_timeline: timeline.samples,
    };
    let wall_ms = if cfg.wall_clock { started.elapsed().as_millis() as u64 } else { 0 };
    Ok(RunSummary { run_id: id, result, archive, consumed_steps: budget.consumed(), wall_ms, generations })
}

/// Metadata written next to the results so they describe themselves.
#[derive(Serialize)]
struct Metadata<'a> {
    tool_version: &'a str,
    objectives: Vec<String>,
    config: &'a CampaignConfig,
}

struct Sinks {
    n_objectives: usize,
    results: csv::Writer<File>,
    timelines: csv::Writer<File>,
    generations: csv::Writer<File>,
}

impl Sinks {
    fn open(dir: &Path, n_objectives: usize) -> Result<Self, CliError> {
        let create = |name: &str| {
            let p = dir.join(name);
            csv::Writer::from_path(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        };
        let mut s = Self {
            n_objectives,
            results: create(RESULTS_FILE)?,
            timelines: create("timelines.csv")?,
            generations: create("generations.csv")?,
        };
        s.results.write_record(RESULTS_HEADER)?;
        s.timelines.write_record(["run_id", "step", "tse"])?;
        s.generations.write_record(["run_id", "generation", "evaluations", "consumed_steps", "covered", "population_size"])?;
        s.flush()?;
        Ok(s)
    }

    fn write(&mut self, cfg: &CampaignConfig, run: &RunSummary) -> Result<(), CliError> {
        let r = &run.result;
        self.results.write_record([
            run.run_id.clone(),
            r.approach.name().to_string(),
            r.env_id.clone(),
            r.seed.to_string(),
            cfg.budget_steps.to_string(),
            r.tse.to_string(),
            covered_mask(&run.archive, self.n_objectives),
            run.wall_ms.to_string(),
        ])?;
        for (step, v) in &r.tse_timeline {
            self.timelines.write_record([run.run_id.clone(), step.to_string(), v.to_string()])?;
        }
        for g in &run.generations {
            self.generations.write_record([
                run.run_id.clone(),
                g.generation.to_string(),
                g.evaluations.to_string(),
                g.consumed_steps.to_string(),
                g.covered.to_string(),
                g.population_size.to_string(),
            ])?;
        }
        self.flush()
    }

    fn finish(&mut self, runs: usize) -> Result<(), CliError> {
        self.results.write_record([END_MARKER, "", "", "", "", "", "", &runs.to_string()])?;
        self.flush()
    }

    fn flush(&mut self) -> Result<(), CliError> {
        for w in [&mut self.results, &mut self.timelines, &mut self.generations] {
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        Ok(())
    }
}

/// Runs every (approach, seed) pair of the campaign.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<RunSummary>, CliError> {
    run_campaign_with(cfg, |_| ControlFlow::Continue(()))
}

/// Like [`run_campaign`], calling `after_run` each time a result row has been
/// written. Returning `Break` abandons the campaign without the end marker,
/// leaving the outputs exactly as a crash at that point would.
pub fn run_campaign_with(
    cfg: &CampaignConfig,
    mut after_run: impl FnMut(&RunSummary) -> ControlFlow<()>,
) -> Result<Vec<RunSummary>, CliError> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    for sub in [PathBuf::new(), PathBuf::from("archives"), PathBuf::from("traces")] {
        if sub.as_os_str() == "traces" && !cfg.trace {
            continue;
        }
        let p = dir.join(&sub);
        fs::create_dir_all(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    let env = build_env::<f64>(&cfg.env_id, 0, Some(&cfg.lanesim))?;
    let meta = Metadata { tool_version: env!("CARGO_PKG_VERSION"), objectives: env.objective_names(), config: cfg };
    let meta_path = dir.join("campaign.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("metadata serializes"))
        .map_err(|e| CliError::Io(format!("{}: {e}", meta_path.display())))?;
    let mut sinks = Sinks::open(dir, env.n_objectives())?;

    let jobs: Vec<(Approach, u64)> =
        cfg.approaches.iter().flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s))).collect();
    let workers = match cfg.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(jobs.len());

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<RunSummary, CliError>)>();
    let mut done = Vec::with_capacity(jobs.len());
    let outcome = std::thread::scope(|scope| -> Result<bool, CliError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next, stop) = (&jobs, &next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(approach, seed)) = jobs.get(i) else { break };
                if tx.send((i, execute_run(cfg, approach, seed))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Rows go out in job order whatever order the runs finish in.
        let mut pending = BTreeMap::new();
        for (i, run) in rx {
            let run = match run {
                Ok(r) => r,
                Err(e) => {
                    stop.store(true, Ordering::Relaxed);
                    return Err(e);
                }
            };
            pending.insert(i, run);
            while let Some(run) = pending.remove(&done.len()) {
                sinks.write(cfg, &run)?;
                let flow = after_run(&run);
                done.push(run);
                if flow.is_break() {
                    stop.store(true, Ordering::Relaxed);
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })?;
    if !outcome {
        return Err(CliError::Interrupted { completed: done.len(), total: jobs.len() });
    }
    sinks.finish(done.len())?;
    Ok(done)
}

/// Parsed row of results.csv.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub approach: Approach,
    pub env_id: String,
    pub seed: u64,
    pub budget_steps: u64,
    pub tse: f64,
    pub covered_mask: String,
    pub wall_ms: u64,
}

/// Rows of a results file and whether the end marker was found.
pub fn read_results(path: &Path) -> Result<(Vec<ResultRow>, bool), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(CliError::Config(format!("{}: unexpected header {:?}", path.display(), header)));
    }
    let mut rows = Vec::new();
    let mut complete = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        if rec.get(0) == Some(END_MARKER) {
            complete = true;
            continue;
        }
        if complete {
            return Err(CliError::Config("rows after the end marker".into()));
        }
        rows.push(rec.deserialize(Some(&header)).map_err(|e| CliError::Config(e.to_string()))?);
    }
    Ok((rows, complete))
}
