//! Browser bindings for the demo page in `www/`.
//!
//! Everything crosses the boundary as JSON text; the plain functions are
//! usable (and tested) natively.

use neuroloop::elm::ElmModel;
use neuroloop::engine::{train_pipeline, Engine, Headless, ModeKind, SessionConfig, TrainingPlan};
use neuroloop::frontend::{detect_auto, synthesize_trace};
use neuroloop::metrics::chance_trial_success;
use neuroloop::seed::child_rng;
use neuroloop::task::{ArenaState, Command, TrialRecord};
use neuroloop::Result;
use rand::Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Sessions for demo trials start here so they never reuse training seeds.
const DEMO_SESSION_BASE: u64 = 1000;

#[derive(Serialize)]
struct TickView {
    k: u32,
    x: f64,
    y: f64,
    cmd_exec: Command,
    cmd_dec: Option<Command>,
    cmd_oracle: Command,
}

#[derive(Serialize)]
struct TrialView {
    direction: String,
    target: (f64, f64),
    side: f64,
    succeeded: bool,
    duration_s: f64,
    match_fraction: Option<f64>,
    ticks: Vec<TickView>,
}

#[derive(Serialize)]
struct TrainingView {
    sessions: Vec<(String, usize, usize)>,
    hidden: usize,
    lambda: f64,
}

#[derive(Serialize)]
struct DetectionView {
    fs: f64,
    samples: Vec<f64>,
    threshold: f64,
    sigma: f64,
    onsets: Vec<f64>,
    detected: Vec<f64>,
}

/// A trained decoder plus the engine it was trained with.
pub struct Subject {
    engine: Engine,
    model: ElmModel,
    training: TrainingView,
    next_session: u64,
}

impl Subject {
    pub fn train(seed: u64, t_w: f64, dr: f64) -> Result<Self> {
        let mut engine = Engine {
            seed,
            ..Engine::default()
        };
        engine.features.t_w = t_w;
        engine.encoder.dr = dr;
        let st = train_pipeline(&engine, &TrainingPlan::default(), &mut Headless)?;
        let sessions = st
            .session_configs
            .iter()
            .zip(&st.sessions)
            .map(|(c, r)| (format!("{:?}", c.mode), r.iter().filter(|t| t.succeeded()).count(), r.len()))
            .collect();
        let training = TrainingView {
            sessions,
            hidden: st.m_f.hidden_size(),
            lambda: st.m_f.lambda(),
        };
        Ok(Self {
            engine,
            model: st.m_f,
            training,
            next_session: DEMO_SESSION_BASE,
        })
    }

    pub fn training_json(&self) -> String {
        serde_json::to_string(&self.training).expect("serializes")
    }

    /// Runs the next single-trial session under neural (or scripted hand)
    /// control and returns its trajectory.
    pub fn trial_json(&mut self, neural: bool) -> Result<String> {
        let index = self.next_session;
        self.next_session += 1;
        // hand trials still decode in the shadow, so both show decoder output
        let kind = if neural { ModeKind::Neural } else { ModeKind::Hand };
        let mut recs = self
            .engine
            .run_session(&SessionConfig::new(kind, 1, index), Some(&self.model), &mut Headless)?;
        Ok(serde_json::to_string(&self.view(recs.remove(0))).expect("serializes"))
    }

    fn view(&self, r: TrialRecord) -> TrialView {
        let task = &self.engine.task;
        let spawn = ArenaState::new(r.dir, task);
        TrialView {
            direction: r.dir.as_str().to_string(),
            target: spawn.target,
            side: spawn.target_side,
            succeeded: r.succeeded(),
            duration_s: r.duration_seconds(task),
            match_fraction: r.match_fraction(),
            ticks: r
                .ticks
                .iter()
                .map(|t| TickView {
                    k: t.k,
                    x: t.x,
                    y: t.y,
                    cmd_exec: t.cmd_exec,
                    cmd_dec: t.cmd_dec,
                    cmd_oracle: t.cmd_oracle,
                })
                .collect(),
        }
    }
}

/// log10 chance of success for 1..=max_steps steps at the given match fraction.
pub fn chance_curve_json(n_classes: u32, match_fraction: f64, max_steps: u32) -> Result<String> {
    let curve = (1..=max_steps)
        .map(|n| chance_trial_success(n_classes, match_fraction, n).map(|c| c.log10))
        .collect::<Result<Vec<f64>>>()?;
    Ok(serde_json::to_string(&curve).expect("serializes"))
}

/// A 50 ms noisy trace with a few injected spikes and what the MAD detector
/// finds in it.
pub fn detection_json(seed: u64, amplitude: f64, noise_sigma: f64) -> Result<String> {
    let fs = 20_000.0;
    let duration = 0.05;
    let mut rng = child_rng(seed, "web-detect", 0);
    let mut onsets: Vec<f64> = (0..5).map(|i| 0.004 + i as f64 * 0.009 + rng.random_range(0.0..0.003)).collect();
    onsets.sort_by(f64::total_cmp);
    let trace = synthesize_trace(0, fs, duration, noise_sigma, &onsets, amplitude, &mut rng)?;
    let (threshold, events) = detect_auto(&trace, 1e-3)?;
    let view = DetectionView {
        fs,
        sigma: threshold / -5.0,
        threshold,
        onsets,
        detected: events.iter().map(|e| e.timestamp).collect(),
        samples: trace.samples,
    };
    Ok(serde_json::to_string(&view).expect("serializes"))
}

fn js_err(e: neuroloop::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    inner: Subject,
}

#[wasm_bindgen]
impl Demo {
    /// Trains a decoder through the passive/assisted paradigm.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, t_w: f64, dr: f64) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            inner: Subject::train(seed.into(), t_w, dr).map_err(js_err)?,
        })
    }

    pub fn training(&self) -> String {
        self.inner.training_json()
    }

    pub fn trial(&mut self, neural: bool) -> std::result::Result<String, JsError> {
        self.inner.trial_json(neural).map_err(js_err)
    }
}

#[wasm_bindgen]
pub fn chance_curve(n_classes: u32, match_fraction: f64, max_steps: u32) -> std::result::Result<String, JsError> {
    chance_curve_json(n_classes, match_fraction, max_steps).map_err(js_err)
}

#[wasm_bindgen]
pub fn detection(seed: u32, amplitude: f64, noise_sigma: f64) -> std::result::Result<String, JsError> {
    detection_json(seed.into(), amplitude, noise_sigma).map_err(js_err)
}

