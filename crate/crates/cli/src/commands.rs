//! Batch subcommands: `train`, `benchmark`, `budget`, `report`.
//!
//! Every artifact path written into a manifest is relative to the output
//! directory, so two runs into different directories produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use log::info;
use neuroloop::config::{
    RunConfig, RunManifest, SessionManifest, HAND_BENCHMARK_INDEX, NEURAL_BENCHMARK_INDEX,
};
use neuroloop::elm::ElmModel;
use neuroloop::engine::{train_pipeline, Directive, Headless, ModeKind, SessionConfig, SessionHooks};
use neuroloop::metrics::{
    budget, chance_trial_success, durations_csv, summarize, summary_csv, Budget, BenchmarkSummary, BudgetSpec,
};
use neuroloop::task::{read_trials_jsonl, write_trials_jsonl, Command, TrialRecord};

pub const MODEL_INTERMEDIATE: &str = "model_intermediate.json";
pub const MODEL_FINAL: &str = "model_final.json";
pub const TRAIN_MANIFEST: &str = "train_manifest.json";
pub const HAND_LOG: &str = "benchmark_hand.jsonl";
pub const NEURAL_LOG: &str = "benchmark_neural.jsonl";
pub const BENCHMARK_MANIFEST: &str = "benchmark_manifest.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const DURATIONS_CSV: &str = "durations.csv";

/// Reads and validates a configuration file; `None` gives the defaults.
/// Errors carry `path:line:` when the line is known.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            match RunConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => match e.line {
                    Some(l) => bail!("{}:{l}: {}", p.display(), e.error),
                    None => bail!("{}: {}", p.display(), e.error),
                },
            }
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Sleeps so ticks advance at the decoder rate.
pub struct Paced {
    period: Duration,
    next: Option<Instant>,
}

impl Paced {
    pub fn new(d_f: f64) -> Self {
        Self {
            period: Duration::from_secs_f64(1.0 / d_f),
            next: None,
        }
    }
}

impl SessionHooks for Paced {
    fn before_tick(&mut self) -> Directive {
        let now = Instant::now();
        let due = self.next.unwrap_or(now);
        if due > now {
            std::thread::sleep(due - now);
        }
        self.next = Some(due.max(now) + self.period);
        Directive::Continue
    }
}

fn hooks(cfg: &RunConfig, realtime: bool) -> Box<dyn SessionHooks> {
    if realtime {
        Box::new(Paced::new(cfg.features.d_f))
    } else {
        Box::new(Headless)
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn session_log_name(cfg: &SessionConfig) -> String {
    let mode = match cfg.mode {
        ModeKind::Passive => "passive",
        ModeKind::Assisted => "assisted",
        ModeKind::Neural => "neural",
        ModeKind::Hand => "hand",
        ModeKind::HandInteractive => "hand_interactive",
    };
    format!("session_{}_{mode}.jsonl", cfg.index)
}

fn successes(records: &[TrialRecord]) -> usize {
    records.iter().filter(|r| r.succeeded()).count()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// (session config, successes, trials)
    pub sessions: Vec<(SessionConfig, usize, usize)>,
    pub files: Vec<PathBuf>,
}

pub fn train(cfg: &RunConfig, out: &Path, realtime: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let engine = cfg.engine();
    info!("training with seed {}", cfg.seed);
    let state = train_pipeline(&engine, &cfg.training, hooks(cfg, realtime).as_mut())?;

    let mut files = vec![
        write(out, MODEL_INTERMEDIATE, &state.m_int.to_json())?,
        write(out, MODEL_FINAL, &state.m_f.to_json())?,
    ];
    let mut manifests = Vec::new();
    let mut summary = Vec::new();
    for (scfg, records) in state.session_configs.iter().zip(&state.sessions) {
        let name = session_log_name(scfg);
        files.push(write(out, &name, &write_trials_jsonl(records))?);
        let model = (scfg.mode == ModeKind::Assisted).then(|| Path::new(MODEL_INTERMEDIATE));
        manifests.push(SessionManifest::new(cfg, scfg, model, Path::new(&name)));
        summary.push((scfg.clone(), successes(records), records.len()));
    }
    let manifest = RunManifest {
        command: "train".into(),
        config: cfg.clone(),
        sessions: manifests,
        models: vec![MODEL_INTERMEDIATE.into(), MODEL_FINAL.into()],
    };
    files.push(write(out, TRAIN_MANIFEST, &to_pretty(&manifest))?);
    Ok(TrainOutcome {
        sessions: summary,
        files,
    })
}

pub fn train_report(outcome: &TrainOutcome) -> String {
    let mut s = String::new();
    for (cfg, ok, n) in &outcome.sessions {
        let _ = write!(s, "session {} {:?}", cfg.index, cfg.mode);
        if cfg.mode == ModeKind::Assisted {
            let _ = write!(s, " p={}", cfg.p);
        }
        let _ = writeln!(s, ": {ok}/{n} successful");
    }
    s
}

fn to_pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn load_model(path: &Path) -> Result<ElmModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    ElmModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

/// Summary statistics with the configured chance level.
pub fn summary_for(cfg: &RunConfig, hand: &[TrialRecord], neural: &[TrialRecord]) -> Result<BenchmarkSummary> {
    let chance = chance_trial_success(
        Command::COUNT as u32,
        cfg.benchmark.match_fraction,
        cfg.task.max_ticks(),
    )?;
    let mut summary = summarize(hand, neural, &cfg.task, chance)?;
    if cfg.benchmark.welch {
        use neuroloop::metrics::t_test_welch;
        use neuroloop::task::Direction;
        let secs = |rs: &[TrialRecord], d: Option<Direction>| -> Vec<f64> {
            rs.iter()
                .filter(|r| r.succeeded() && d.is_none_or(|d| r.dir == d))
                .map(|r| r.duration_seconds(&cfg.task))
                .collect()
        };
        for c in summary.directions.iter_mut().chain(std::iter::once(&mut summary.overall)) {
            if let Ok(tt) = t_test_welch(&secs(hand, c.direction), &secs(neural, c.direction)) {
                c.t = Some(tt.t);
                c.p = Some(tt.p);
                c.note = Some("welch".into());
            }
        }
    }
    Ok(summary)
}

fn write_summary(out: &Path, cfg: &RunConfig, hand: &[TrialRecord], neural: &[TrialRecord]) -> Result<(BenchmarkSummary, Vec<PathBuf>)> {
    let summary = summary_for(cfg, hand, neural)?;
    let files = vec![
        write(out, SUMMARY_CSV, &summary_csv(&summary))?,
        write(out, SUMMARY_JSON, &to_pretty(&summary))?,
        write(out, DURATIONS_CSV, &durations_csv(hand, neural, &cfg.task))?,
    ];
    Ok((summary, files))
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub summary: BenchmarkSummary,
    pub hand: Vec<TrialRecord>,
    pub neural: Vec<TrialRecord>,
    pub files: Vec<PathBuf>,
}

pub fn benchmark(cfg: &RunConfig, model_path: &Path, out: &Path, realtime: bool) -> Result<BenchmarkOutcome> {
    cfg.validate()?;
    let model = load_model(model_path)?;
    cfg.check_model(&model)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let engine = cfg.engine();
    let n = cfg.benchmark.trials;
    let hand_cfg = SessionConfig::new(ModeKind::Hand, n, HAND_BENCHMARK_INDEX);
    let neural_cfg = SessionConfig::new(ModeKind::Neural, n, NEURAL_BENCHMARK_INDEX);
    let mut h = hooks(cfg, realtime);
    info!("benchmark: {n} hand trials");
    let hand = engine.run_session(&hand_cfg, None, h.as_mut())?;
    info!("benchmark: {n} neural trials");
    let neural = engine.run_session(&neural_cfg, Some(&model), h.as_mut())?;

    let mut files = vec![
        write(out, HAND_LOG, &write_trials_jsonl(&hand))?,
        write(out, NEURAL_LOG, &write_trials_jsonl(&neural))?,
    ];
    let (summary, more) = write_summary(out, cfg, &hand, &neural)?;
    files.extend(more);
    // the model is referenced by file name when it sits in the output directory
    let model_ref = match (model_path.parent(), model_path.file_name()) {
        (Some(p), Some(name)) if same_dir(p, out) => PathBuf::from(name),
        _ => model_path.to_path_buf(),
    };
    let manifest = RunManifest {
        command: "benchmark".into(),
        config: cfg.clone(),
        sessions: vec![
            SessionManifest::new(cfg, &hand_cfg, None, Path::new(HAND_LOG)),
            SessionManifest::new(cfg, &neural_cfg, Some(&model_ref), Path::new(NEURAL_LOG)),
        ],
        models: vec![model_ref.display().to_string()],
    };
    files.push(write(out, BENCHMARK_MANIFEST, &to_pretty(&manifest))?);
    Ok(BenchmarkOutcome {
        summary,
        hand,
        neural,
        files,
    })
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Recomputes the summary files from the benchmark logs in `out`.
pub fn report(cfg: &RunConfig, out: &Path) -> Result<(BenchmarkSummary, Vec<PathBuf>)> {
    let read = |name: &str| -> Result<Vec<TrialRecord>> {
        let path = out.join(name);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading {} (run `benchmark` first)", path.display()))?;
        Ok(read_trials_jsonl(&text)?)
    };
    let hand = read(HAND_LOG)?;
    let neural = read(NEURAL_LOG)?;
    write_summary(out, cfg, &hand, &neural)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "n/a".into())
}

pub fn summary_table(s: &BenchmarkSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:<8} {:>8} {:>10} {:>8} {:>8}",
        "mode", "dir", "success", "mean_s", "speed", "p"
    );
    for g in &s.groups {
        let c = s.direction(g.direction);
        let (speed, p) = match g.mode {
            neuroloop::metrics::ControlMode::Neural => (c.and_then(|c| c.speed_ratio), c.and_then(|c| c.p)),
            _ => (None, None),
        };
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>8} {:>10} {:>8} {:>8}",
            g.mode.as_str(),
            g.direction.to_string(),
            format!("{}/{}", g.n_success, g.n_trials),
            fmt_opt(g.mean_duration, 2),
            if g.mode == neuroloop::metrics::ControlMode::Neural { fmt_opt(speed, 3) } else { String::new() },
            if g.mode == neuroloop::metrics::ControlMode::Neural { fmt_opt(p, 4) } else { String::new() },
        );
    }
    let _ = writeln!(
        out,
        "overall success ratio {}, speed ratio {}",
        fmt_opt(s.overall.success_ratio, 3),
        fmt_opt(s.overall.speed_ratio, 3)
    );
    let _ = writeln!(out, "chance level: 10^{:.2}", s.chance.log10);
    out
}

pub fn budget_table(spec: &BudgetSpec) -> Result<(Budget, String)> {
    let b = budget(spec)?;
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:>16}", "raw data rate (bps)", b.raw_bps);
    let _ = writeln!(s, "{:<28} {:>16}", "decoded data rate (bps)", b.decoded_bps);
    let _ = writeln!(
        s,
        "{:<28} {:>16}",
        "reduction",
        b.reduction().map(|r| format!("{r}x")).unwrap_or_else(|| "n/a".into())
    );
    let _ = writeln!(s, "{:<28} {:>16}", "feature extraction (uW)", round6(b.feature_uw));
    let _ = writeln!(s, "{:<28} {:>16}", "decoder (uW)", round6(spec.decoder_uw));
    let _ = writeln!(s, "{:<28} {:>16}", "total added power (uW)", round6(b.total_added_uw));
    Ok((b, s))
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}
