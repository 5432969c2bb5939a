//! Closed-loop orchestration.
//!
//! Each tick runs the whole pipeline: subject intent from the (lagged) oracle,
//! spikes over the last tick period, window counts, ELM decode, the mode's
//! choice of executed command, and one task step. Simulated time is
//! authoritative; wall-clock pacing is a hook concern.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elm::{fit_with, init_model, AnalogConfig, ElmModel, RidgeScale};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVector, RateExtractor};
use crate::frame::{Point, StateFrame, TargetView};
use crate::frontend::{contiguous_layout, encode_baseline, encode_intent, EncoderModel, SpikeEvent};
use crate::seed::{child_rng, hash64, SimRng};
use crate::task::{
    oracle_policy, spawn_trial, step, ArenaState, Command, Outcome, Phase, TickEntry, TrialConfig, TrialRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderParams {
    pub channels: usize,
    /// Baseline rate, Hz.
    pub r0: f64,
    /// Extra rate on channels tuned to the current intent, Hz.
    pub dr: f64,
    /// Noise seed mixed into every session's spike stream.
    pub seed: u64,
    pub deterministic: bool,
    /// Delay in ticks between a change of the oracle command and the
    /// subject's intent following it.
    pub reaction_lag: u32,
    /// Optional channel-to-class permutation; `preferred[k]` for channel `k`.
    pub preferred: Option<Vec<Command>>,
}

impl Default for EncoderParams {
    fn default() -> Self {
        Self {
            channels: 64,
            r0: 5.0,
            dr: 45.0,
            seed: 0,
            deterministic: false,
            reaction_lag: 1,
            preferred: None,
        }
    }
}

impl EncoderParams {
    pub fn build(&self) -> Result<EncoderModel> {
        let layout = match &self.preferred {
            Some(p) => {
                if p.len() != self.channels {
                    return Err(Error::InvalidArgument(format!(
                        "preferred layout has {} entries for {} channels",
                        p.len(),
                        self.channels
                    )));
                }
                p.clone()
            }
            None => contiguous_layout(self.channels),
        };
        let mut m = EncoderModel::with_layout(layout, self.r0, self.dr, self.seed)?;
        m.deterministic = self.deterministic;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub hidden: usize,
    pub lambda: f64,
    pub lambda_scale: RidgeScale,
    /// Analog emulation; `null` selects the float path.
    pub analog: Option<AnalogConfig>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            hidden: 50,
            lambda: 0.01,
            lambda_scale: RidgeScale::Relative,
            analog: Some(AnalogConfig::default()),
        }
    }
}

/// Everything that defines the simulated subject, decoder and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Engine {
    pub seed: u64,
    pub encoder: EncoderParams,
    pub features: FeatureConfig,
    pub model: ModelParams,
    pub task: TrialConfig,
    /// Ticks of untuned baseline activity before each trial. The feature
    /// window runs continuously across a session, so this is what the window
    /// holds when a target appears.
    pub inter_trial_ticks: u32,
}

impl Default for Engine {
    fn default() -> Self {
        Self {
            seed: 1,
            encoder: EncoderParams::default(),
            features: FeatureConfig::default(),
            model: ModelParams::default(),
            task: TrialConfig::default(),
            inter_trial_ticks: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Passive,
    Assisted,
    Neural,
    Hand,
    HandInteractive,
}

/// Who chooses the executed command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SessionMode {
    /// Oracle drives; the subject watches.
    PassiveObservation,
    /// Oracle replaces the decoded command with probability `p` per tick.
    Assisted(f64),
    NeuralControl,
    /// Scripted hand control is the oracle; interactive reads the operator.
    HandControl { interactive: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub mode: ModeKind,
    pub trials: u32,
    #[serde(default)]
    pub p: f64,
    /// Index mixed into the master seed to derive this session's streams.
    pub index: u64,
}

impl SessionConfig {
    pub fn new(mode: ModeKind, trials: u32, index: u64) -> Self {
        Self {
            mode,
            trials,
            p: 0.0,
            index,
        }
    }

    pub fn assisted(p: f64, trials: u32, index: u64) -> Self {
        Self {
            mode: ModeKind::Assisted,
            trials,
            p,
            index,
        }
    }

    pub fn mode(&self) -> SessionMode {
        match self.mode {
            ModeKind::Passive => SessionMode::PassiveObservation,
            ModeKind::Assisted => SessionMode::Assisted(self.p),
            ModeKind::Neural => SessionMode::NeuralControl,
            ModeKind::Hand => SessionMode::HandControl { interactive: false },
            ModeKind::HandInteractive => SessionMode::HandControl { interactive: true },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("a session needs at least one trial".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("assistance p = {} outside [0, 1]", self.p)));
        }
        Ok(())
    }
}

/// Per-tick control of a running session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    Continue,
    /// Ends the current trial as failed and stops the session.
    Abort,
}

/// Integration points for live sessions. Defaults run headless.
pub trait SessionHooks {
    fn operator_connected(&self) -> bool {
        false
    }

    /// Latest operator command, sampled once per tick.
    fn operator_command(&mut self) -> Command {
        Command::Stop
    }

    /// Called before each tick; may block for pacing or pause.
    fn before_tick(&mut self) -> Directive {
        Directive::Continue
    }

    fn on_frame(&mut self, _frame: &StateFrame) {}
}

pub struct Headless;

impl SessionHooks for Headless {}

/// Returns `oracle` when `draw < p`, otherwise `decoded`.
pub fn blend_assist(decoded: Command, oracle: Command, p: f64, draw: f64) -> Command {
    if draw < p {
        oracle
    } else {
        decoded
    }
}

/// Session-wide spike time base and feature window.
///
/// Tick `n` of the session covers `((n-1) T_s, n T_s]`; spikes for that
/// period are generated and pushed before the window is read.
pub struct SessionClock {
    extractor: RateExtractor,
    tick: u64,
}

impl SessionClock {
    pub fn new(extractor: RateExtractor) -> Self {
        Self { extractor, tick: 0 }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn advance(
        &mut self,
        source: impl FnOnce((f64, f64), &mut SimRng) -> Result<Vec<SpikeEvent>>,
        rng: &mut SimRng,
    ) -> Result<FeatureVector> {
        let n = self.tick + 1;
        let fc = self.extractor.config();
        let window = (fc.tick_time(n - 1), fc.tick_time(n));
        let spikes = source(window, rng)?;
        self.extractor.push_events(&spikes)?;
        let fv = self.extractor.emit(n)?;
        self.tick = n;
        Ok(fv)
    }
}

/// Mutable state of one running trial.
pub struct LoopState<'a> {
    engine: &'a Engine,
    encoder: &'a EncoderModel,
    mode: SessionMode,
    model: Option<&'a ElmModel>,
    pub arena: ArenaState,
    clock: &'a mut SessionClock,
    oracle_history: Vec<Command>,
    spikes_rng: &'a mut SimRng,
    assist_rng: &'a mut SimRng,
    pub entries: Vec<TickEntry>,
}

impl<'a> LoopState<'a> {
    /// Intent seen by the encoder: the oracle command from `reaction_lag` ticks ago.
    fn intent(&self) -> Command {
        let lag = self.engine.encoder.reaction_lag as usize;
        let n = self.oracle_history.len();
        self.oracle_history[n.saturating_sub(1 + lag)]
    }
}

/// One pass of the pipeline. Returns the executed command.
pub fn run_tick(ls: &mut LoopState<'_>, hooks: &mut dyn SessionHooks) -> Result<Command> {
    if !ls.arena.is_running() {
        return Err(Error::InvalidState("trial is not running".into()));
    }
    let oracle = oracle_policy(&ls.arena, &ls.engine.task);
    ls.oracle_history.push(oracle);
    let intent = ls.intent();

    let encoder = ls.encoder;
    let fv = ls
        .clock
        .advance(|window, rng| encode_intent(encoder, intent, window, rng), ls.spikes_rng)?;
    let x = fv.as_f64();

    let decoded = match ls.model {
        Some(m) if m.is_trained() => Some(m.predict(&x)?),
        _ => None,
    };
    let need_decoder = || decoded.ok_or(Error::NotTrained);
    let executed = match ls.mode {
        SessionMode::PassiveObservation => oracle,
        SessionMode::Assisted(p) => {
            let draw: f64 = ls.assist_rng.random();
            blend_assist(need_decoder()?, oracle, p, draw)
        }
        SessionMode::NeuralControl => need_decoder()?,
        SessionMode::HandControl { interactive: false } => oracle,
        SessionMode::HandControl { interactive: true } => hooks.operator_command(),
    };
    ls.arena = step(&ls.arena, executed, &ls.engine.task)?;
    ls.entries.push(TickEntry {
        k: ls.arena.tick,
        cmd_dec: decoded,
        cmd_exec: executed,
        cmd_oracle: oracle,
        x: ls.arena.avatar.0,
        y: ls.arena.avatar.1,
        features: fv.rates,
    });
    Ok(executed)
}

fn frame_of(
    session: &str,
    mode: SessionMode,
    trial: u32,
    arena: &ArenaState,
    (cmd_exec, cmd_dec, cmd_oracle): (Command, Option<Command>, Command),
    (successes, completed): (u32, u32),
) -> StateFrame {
    StateFrame {
        session: session.to_string(),
        mode: mode_label(mode).to_string(),
        trial,
        tick: arena.tick,
        avatar: Point {
            x: arena.avatar.0,
            y: arena.avatar.1,
        },
        target: TargetView {
            x: arena.target.0,
            y: arena.target.1,
            side: arena.target_side,
        },
        phase: arena.phase,
        hold_ticks: arena.hold_ticks,
        cmd_exec,
        cmd_dec,
        cmd_oracle,
        successes,
        completed,
    }
}

fn mode_label(mode: SessionMode) -> &'static str {
    match mode {
        SessionMode::PassiveObservation => "passive",
        SessionMode::Assisted(_) => "assisted",
        SessionMode::NeuralControl => "neural",
        SessionMode::HandControl { interactive: false } => "hand",
        SessionMode::HandControl { interactive: true } => "hand_interactive",
    }
}

impl Engine {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.task.validate()?;
        self.encoder.build()?;
        if self.encoder.channels != self.features.channels {
            return Err(Error::Config {
                field: "features.channels".into(),
                msg: format!(
                    "D = {} but the encoder has {} channels",
                    self.features.channels, self.encoder.channels
                ),
            });
        }
        if (self.features.d_f - self.task.d_f).abs() > 0.0 {
            return Err(Error::Config {
                field: "task.d_f".into(),
                msg: format!(
                    "task rate {} Hz differs from decoder rate {} Hz",
                    self.task.d_f, self.features.d_f
                ),
            });
        }
        if self.model.hidden == 0 {
            return Err(Error::Config {
                field: "model.hidden".into(),
                msg: "hidden layer must have at least one node".into(),
            });
        }
        if !(self.model.lambda >= 0.0) {
            return Err(Error::Config {
                field: "model.lambda".into(),
                msg: "lambda must be >= 0".into(),
            });
        }
        if let Some(a) = &self.model.analog {
            a.validate().map_err(|e| Error::Config {
                field: "model.analog".into(),
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn session_seed(&self, index: u64) -> u64 {
        hash64(self.seed, "session", index)
    }

    /// Untrained model with the first layer fixed by the master seed.
    ///
    /// For the analog path without an explicit offset span, offsets are drawn
    /// from `U[0, 0.1 m]` where `m` is the expected pre-activation under the
    /// encoder's mean firing rate.
    pub fn init_model(&self) -> Result<ElmModel> {
        let analog = self.model.analog.clone().map(|mut a| {
            if a.bias_span == 0.0 {
                let mean_w = (a.sigma_m * a.sigma_m / 2.0).exp();
                let mean_rate = self.encoder.r0 + self.encoder.dr / Command::COUNT as f64;
                let expected = mean_w * self.features.channels as f64 * mean_rate * self.features.t_w;
                a.bias_span = 0.1 * expected;
            }
            a
        });
        init_model(
            self.features.channels,
            self.model.hidden,
            Command::COUNT,
            hash64(self.seed, "elm", 0),
            analog,
        )
    }

    /// Runs every trial of a session in order.
    pub fn run_session(
        &self,
        session: &SessionConfig,
        model: Option<&ElmModel>,
        hooks: &mut dyn SessionHooks,
    ) -> Result<Vec<TrialRecord>> {
        session.validate()?;
        let mode = session.mode();
        match mode {
            SessionMode::Assisted(_) | SessionMode::NeuralControl => match model {
                Some(m) if m.is_trained() => {}
                Some(_) => return Err(Error::NotTrained),
                None => return Err(Error::InvalidArgument("this mode needs a decoder model".into())),
            },
            SessionMode::HandControl { interactive: true } if !hooks.operator_connected() => {
                return Err(Error::InvalidState("no operator connected".into()));
            }
            _ => {}
        }
        if let Some(m) = model {
            if m.inputs() != self.features.channels {
                return Err(Error::InvalidArgument(format!(
                    "model expects D = {} but features have {}",
                    m.inputs(),
                    self.features.channels
                )));
            }
        }
        let encoder = self.encoder.build()?;
        let seed = self.session_seed(session.index);
        let mut direction_rng = child_rng(seed, "direction", 0);
        let mut spikes_rng = child_rng(hash64(seed, "spikes", 0), "encoder", self.encoder.seed);
        let mut assist_rng = child_rng(seed, "assist", 0);
        let session_name = format!("s{}", session.index);

        let mut clock = SessionClock::new(RateExtractor::new(self.features.clone())?);
        let mut records = Vec::with_capacity(session.trials as usize);
        let mut successes = 0u32;
        'trials: for id in 0..session.trials {
            for _ in 0..self.inter_trial_ticks {
                clock.advance(|w, rng| encode_baseline(&encoder, w, rng), &mut spikes_rng)?;
            }
            let arena = spawn_trial(&self.task, &mut direction_rng);
            let mut ls = LoopState {
                engine: self,
                encoder: &encoder,
                mode,
                model,
                arena,
                clock: &mut clock,
                oracle_history: Vec::new(),
                spikes_rng: &mut spikes_rng,
                assist_rng: &mut assist_rng,
                entries: Vec::new(),
            };
            let mut diag = None;
            let mut aborted = false;
            // Spawn frame: lets a live operator see the new target before the first tick.
            hooks.on_frame(&frame_of(
                &session_name,
                mode,
                id,
                &ls.arena,
                (Command::Stop, None, oracle_policy(&ls.arena, &self.task)),
                (successes, id),
            ));
            while ls.arena.is_running() {
                if hooks.before_tick() == Directive::Abort {
                    aborted = true;
                    diag = Some("aborted by operator".to_string());
                    break;
                }
                match run_tick(&mut ls, hooks) {
                    Ok(_) => {}
                    Err(Error::Numeric(msg)) => {
                        diag = Some(format!("numeric error: {msg}"));
                        break;
                    }
                    Err(e) => return Err(e),
                }
                let last = ls.entries.last().expect("tick recorded");
                if ls.arena.phase == Phase::Succeeded {
                    successes += 1;
                }
                let completed = id + u32::from(!ls.arena.is_running());
                hooks.on_frame(&frame_of(
                    &session_name,
                    mode,
                    id,
                    &ls.arena,
                    (last.cmd_exec, last.cmd_dec, last.cmd_oracle),
                    (successes, completed),
                ));
            }
            let outcome = if ls.arena.phase == Phase::Succeeded {
                Outcome::Succeeded
            } else {
                Outcome::Failed
            };
            let dur = ls.arena.tick;
            records.push(TrialRecord {
                id,
                dir: ls.arena.direction,
                ticks: std::mem::take(&mut ls.entries),
                outcome,
                dur,
                diag,
            });
            if aborted {
                break 'trials;
            }
        }
        Ok(records)
    }
}

/// Shape of the decoder-training paradigm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingPlan {
    pub passive_sessions: u32,
    pub trials_per_session: u32,
    pub assist_p: f64,
}

impl Default for TrainingPlan {
    fn default() -> Self {
        Self {
            passive_sessions: 2,
            trials_per_session: 20,
            assist_p: 0.5,
        }
    }
}

impl TrainingPlan {
    /// Session configs in run order: passive sessions, then one assisted.
    pub fn sessions(&self) -> Vec<SessionConfig> {
        let mut v: Vec<SessionConfig> = (0..self.passive_sessions)
            .map(|i| SessionConfig::new(ModeKind::Passive, self.trials_per_session, i as u64))
            .collect();
        v.push(SessionConfig::assisted(
            self.assist_p,
            self.trials_per_session,
            self.passive_sessions as u64,
        ));
        v
    }
}

#[derive(Debug, Clone)]
pub struct TrainingPipelineState {
    pub sessions: Vec<Vec<TrialRecord>>,
    pub session_configs: Vec<SessionConfig>,
    pub m_int: ElmModel,
    pub m_f: ElmModel,
}

/// Feature rows and oracle labels from the successful trials of `sessions`.
pub fn training_rows<'r, I>(sessions: I) -> (Vec<Vec<f64>>, Vec<Command>)
where
    I: IntoIterator<Item = &'r Vec<TrialRecord>>,
{
    let mut x = Vec::new();
    let mut y = Vec::new();
    for rec in sessions.into_iter().flatten().filter(|r| r.succeeded()) {
        for t in &rec.ticks {
            x.push(t.features.iter().map(|&c| c as f64).collect());
            y.push(t.cmd_oracle);
        }
    }
    (x, y)
}

fn fit_rows(engine: &Engine, base: &ElmModel, sessions: &[Vec<TrialRecord>]) -> Result<ElmModel> {
    let (x, y) = training_rows(sessions);
    if x.is_empty() {
        return Err(Error::Training("no successful trials to train on".into()));
    }
    fit_with(base, &x, &y, engine.model.lambda, engine.model.lambda_scale)
}

/// Passive observation sessions train an intermediate decoder; an assisted
/// session driven by it adds data, and the final decoder is trained on the
/// successful trials of every session.
pub fn train_pipeline(engine: &Engine, plan: &TrainingPlan, hooks: &mut dyn SessionHooks) -> Result<TrainingPipelineState> {
    engine.validate()?;
    let base = engine.init_model()?;
    let configs = plan.sessions();
    let (assisted_cfg, passive_cfgs) = configs.split_last().expect("plan has an assisted session");
    let mut sessions = Vec::new();
    for cfg in passive_cfgs {
        sessions.push(engine.run_session(cfg, None, hooks)?);
    }
    let m_int = fit_rows(engine, &base, &sessions)?;
    sessions.push(engine.run_session(assisted_cfg, Some(&m_int), hooks)?);
    let m_f = fit_rows(engine, &base, &sessions)?;
    Ok(TrainingPipelineState {
        sessions,
        session_configs: configs,
        m_int,
        m_f,
    })
}

/// Labelled feature vectors with a balanced, independently drawn intent per
/// row, sampled at steady state (window fully inside one intent).
pub fn steady_state_dataset(engine: &Engine, rows_per_class: usize, index: u64) -> Result<(Vec<Vec<f64>>, Vec<Command>)> {
    let encoder = engine.encoder.build()?;
    let mut rng = child_rng(hash64(engine.seed, "dataset", index), "encoder", engine.encoder.seed);
    let fc = &engine.features;
    let ticks_per_window = (fc.t_w * fc.d_f).ceil() as u64;
    let mut x = Vec::with_capacity(rows_per_class * Command::COUNT);
    let mut y = Vec::with_capacity(rows_per_class * Command::COUNT);
    for _ in 0..rows_per_class {
        for intent in Command::ALL {
            let mut ex = RateExtractor::new(fc.clone())?;
            for n in 1..=ticks_per_window {
                let spikes = encode_intent(&encoder, intent, (fc.tick_time(n - 1), fc.tick_time(n)), &mut rng)?;
                ex.push_events(&spikes)?;
            }
            x.push(ex.emit(ticks_per_window)?.as_f64());
            y.push(intent);
        }
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_extremes() {
        for draw in [0.0, 0.3, 0.999_999] {
            assert_eq!(blend_assist(Command::Left, Command::Right, 0.0, draw), Command::Left);
            assert_eq!(blend_assist(Command::Left, Command::Right, 1.0, draw), Command::Right);
        }
    }

    #[test]
    fn passive_session_all_succeed() {
        let e = Engine::default();
        let recs = e
            .run_session(&SessionConfig::new(ModeKind::Passive, 20, 0), None, &mut Headless)
            .unwrap();
        assert_eq!(recs.len(), 20);
        assert!(recs.iter().all(|r| r.succeeded()));
        assert!(recs.iter().all(|r| r.ticks.iter().all(|t| t.cmd_exec == t.cmd_oracle)));
        assert!(recs.iter().all(|r| r.ticks.iter().all(|t| t.cmd_dec.is_none())));
    }

    #[test]
    fn neural_without_model_refuses() {
        let e = Engine::default();
        let untrained = e.init_model().unwrap();
        let err = e
            .run_session(&SessionConfig::new(ModeKind::Neural, 1, 0), Some(&untrained), &mut Headless)
            .unwrap_err();
        assert_eq!(err, Error::NotTrained);
        assert!(e
            .run_session(&SessionConfig::new(ModeKind::Neural, 1, 0), None, &mut Headless)
            .is_err());
    }

    #[test]
    fn interactive_without_operator_refuses() {
        let e = Engine::default();
        let err = e
            .run_session(&SessionConfig::new(ModeKind::HandInteractive, 1, 0), None, &mut Headless)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)));
    }

    #[test]
    fn scripted_hand_duration_is_oracle_optimum() {
        let e = Engine::default();
        let recs = e
            .run_session(&SessionConfig::new(ModeKind::Hand, 12, 5), None, &mut Headless)
            .unwrap();
        // 9 moves to reach the target edge, then 14 more inside ticks
        assert!(recs.iter().all(|r| r.succeeded() && r.dur == 23));
    }

    #[test]
    fn lag_zero_intent_is_current_oracle() {
        let mut e = Engine::default();
        e.encoder.reaction_lag = 0;
        e.encoder.deterministic = true;
        e.encoder.r0 = 0.0;
        e.encoder.dr = 10.0;
        let recs = e
            .run_session(&SessionConfig::new(ModeKind::Passive, 1, 0), None, &mut Headless)
            .unwrap();
        // only channels tuned to the intent fire; at lag 0 that is the oracle
        let layout = contiguous_layout(64);
        let first = &recs[0].ticks[0];
        for (k, &c) in first.features.iter().enumerate() {
            assert_eq!(c > 0, layout[k] == first.cmd_oracle, "channel {k}");
        }
    }

    #[test]
    fn plan_shape() {
        let s = TrainingPlan::default().sessions();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].mode, ModeKind::Passive);
        assert_eq!(s[1].mode, ModeKind::Passive);
        assert_eq!(s[2].mode(), SessionMode::Assisted(0.5));
        assert!(s.iter().all(|c| c.trials == 20));
    }

    #[test]
    fn engine_validation() {
        let mut e = Engine::default();
        e.features.channels = 32;
        assert!(matches!(e.validate(), Err(Error::Config { .. })));
        let mut e = Engine::default();
        e.task.d_f = 20.0;
        assert!(e.validate().is_err());
        assert!(Engine::default().validate().is_ok());
    }
}
