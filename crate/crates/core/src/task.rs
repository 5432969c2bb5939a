//! Target-reaching task: a point avatar driven by discrete commands at the
//! decoder rate, three target placements, a hold-to-succeed rule and a
//! timeout.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Decoded/executed control command. Integer encoding follows declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Command {
    Forward,
    Right,
    Left,
    Stop,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Forward, Command::Right, Command::Left, Command::Stop];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Command> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Forward => "Forward",
            Command::Right => "Right",
            Command::Left => "Left",
            Command::Stop => "Stop",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown command `{s}`")))
    }
}

/// Where the target is placed relative to the start position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Right,
    Left,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Forward, Direction::Right, Direction::Left];

    /// Placement angle in degrees (0 = +x, 90 = +y).
    pub fn angle_deg(self) -> f64 {
        match self {
            Direction::Forward => 90.0,
            Direction::Right => 0.0,
            Direction::Left => 180.0,
        }
    }

    fn unit(self) -> (f64, f64) {
        match self {
            Direction::Forward => (0.0, 1.0),
            Direction::Right => (1.0, 0.0),
            Direction::Left => (-1.0, 0.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "Forward",
            Direction::Right => "Right",
            Direction::Left => "Left",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How Left/Right are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    /// Left/Right translate the avatar sideways.
    #[default]
    Translation,
    /// Left/Right turn the wheelchair by 90 degrees; Forward moves along the heading.
    Rotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    /// Decoder / control rate in Hz.
    pub d_f: f64,
    /// Trial timeout in seconds.
    pub timeout: f64,
    /// Required continuous time inside the target, seconds.
    pub hold: f64,
    /// Side of the square target, cm.
    pub target_side: f64,
    /// Distance from the start to the target centre, cm.
    pub target_distance: f64,
    /// Displacement per movement tick, cm.
    pub step: f64,
    pub motion: MotionModel,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            d_f: 10.0,
            timeout: 13.0,
            hold: 1.5,
            target_side: 2.0,
            target_distance: 10.0,
            step: 1.0,
            motion: MotionModel::Translation,
        }
    }
}

fn integral_ticks(seconds: f64, d_f: f64, what: &str) -> Result<u32> {
    let ticks = seconds * d_f;
    let rounded = ticks.round();
    if !(rounded >= 1.0) || (ticks - rounded).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{what} x d_f must be a positive integer, got {ticks}"
        )));
    }
    Ok(rounded as u32)
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_f > 0.0) {
            return Err(Error::InvalidArgument("d_f must be positive".into()));
        }
        if !(self.target_side > 0.0) || !(self.step > 0.0) || !(self.target_distance >= 0.0) {
            return Err(Error::InvalidArgument(
                "target_side and step must be positive, target_distance non-negative".into(),
            ));
        }
        integral_ticks(self.timeout, self.d_f, "timeout")?;
        integral_ticks(self.hold, self.d_f, "hold")?;
        Ok(())
    }

    /// Tick count at which a trial times out (130 by default).
    pub fn max_ticks(&self) -> u32 {
        (self.timeout * self.d_f).round() as u32
    }

    /// Consecutive in-target ticks needed to succeed (15 by default).
    pub fn hold_ticks(&self) -> u32 {
        (self.hold * self.d_f).round() as u32
    }

    pub fn tick_seconds(&self) -> f64 {
        1.0 / self.d_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Succeeded,
    Failed,
}

/// Heading in quarter turns counter-clockwise from +x. Only used by the rotation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Heading(u8);

impl Heading {
    pub const NORTH: Heading = Heading(1);

    fn unit(self) -> (f64, f64) {
        match self.0 % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    }

    fn turn_left(self) -> Heading {
        Heading((self.0 + 1) % 4)
    }

    fn turn_right(self) -> Heading {
        Heading((self.0 + 3) % 4)
    }
}

/// Full state of one running trial. Values are immutable; `step` returns a new state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArenaState {
    pub direction: Direction,
    pub avatar: (f64, f64),
    pub target: (f64, f64),
    pub target_side: f64,
    pub tick: u32,
    pub hold_ticks: u32,
    pub phase: Phase,
    pub heading: Heading,
}

impl ArenaState {
    /// Fresh trial with the avatar at the origin and the target along `direction`.
    pub fn new(direction: Direction, config: &TrialConfig) -> Self {
        let (ux, uy) = direction.unit();
        Self {
            direction,
            avatar: (0.0, 0.0),
            target: (ux * config.target_distance, uy * config.target_distance),
            target_side: config.target_side,
            tick: 0,
            hold_ticks: 0,
            phase: Phase::Running,
            heading: Heading::NORTH,
        }
    }

    pub fn with_avatar(mut self, x: f64, y: f64) -> Self {
        self.avatar = (x, y);
        self
    }

    /// Closed-square containment of the avatar point.
    pub fn inside_target(&self) -> bool {
        let half = self.target_side / 2.0;
        (self.avatar.0 - self.target.0).abs() <= half && (self.avatar.1 - self.target.1).abs() <= half
    }

    pub fn is_running(&self) -> bool {
        self.phase == Phase::Running
    }
}

/// Spawns a trial whose direction is drawn uniformly from the three placements.
pub fn spawn_trial<R: Rng + ?Sized>(config: &TrialConfig, rng: &mut R) -> ArenaState {
    let direction = Direction::ALL[rng.random_range(0..Direction::ALL.len())];
    ArenaState::new(direction, config)
}

/// Advances the trial by one control tick.
pub fn step(state: &ArenaState, cmd: Command, config: &TrialConfig) -> Result<ArenaState> {
    if state.phase != Phase::Running {
        return Err(Error::InvalidState(format!(
            "cannot step a finished trial ({:?})",
            state.phase
        )));
    }
    let mut next = *state;
    let (x, y) = state.avatar;
    let s = config.step;
    match config.motion {
        MotionModel::Translation => {
            next.avatar = match cmd {
                Command::Forward => (x, y + s),
                Command::Right => (x + s, y),
                Command::Left => (x - s, y),
                Command::Stop => (x, y),
            };
        }
        MotionModel::Rotation => match cmd {
            Command::Forward => {
                let (hx, hy) = state.heading.unit();
                next.avatar = (x + s * hx, y + s * hy);
            }
            Command::Left => next.heading = state.heading.turn_left(),
            Command::Right => next.heading = state.heading.turn_right(),
            Command::Stop => {}
        },
    }
    next.tick += 1;
    next.hold_ticks = if next.inside_target() { state.hold_ticks + 1 } else { 0 };
    if next.hold_ticks >= config.hold_ticks() {
        next.phase = Phase::Succeeded;
    } else if next.tick >= config.max_ticks() {
        next.phase = Phase::Failed;
    }
    Ok(next)
}

/// Axis command that translates toward the target, or `Stop` when inside.
fn translation_oracle(state: &ArenaState) -> Command {
    if state.inside_target() {
        return Command::Stop;
    }
    let dx = state.target.0 - state.avatar.0;
    let dy = state.target.1 - state.avatar.1;
    if dy > 0.0 && dy.abs() >= dx.abs() {
        Command::Forward
    } else if dx > 0.0 {
        Command::Right
    } else if dx < 0.0 {
        Command::Left
    } else if dy > 0.0 {
        Command::Forward
    } else {
        // target is behind with no backward command available
        Command::Stop
    }
}

/// Ground-truth command for the current state.
pub fn oracle_policy(state: &ArenaState, config: &TrialConfig) -> Command {
    let desired = translation_oracle(state);
    match config.motion {
        MotionModel::Translation => desired,
        MotionModel::Rotation => {
            let want = match desired {
                Command::Stop => return Command::Stop,
                Command::Forward => Heading(1),
                Command::Right => Heading(0),
                Command::Left => Heading(2),
            };
            if want == state.heading {
                Command::Forward
            } else if state.heading.turn_left() == want || state.heading.turn_left().turn_left() == want {
                Command::Left
            } else {
                Command::Right
            }
        }
    }
}

/// One control tick of a trial as persisted in trial logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickEntry {
    pub k: u32,
    pub cmd_dec: Option<Command>,
    pub cmd_exec: Command,
    pub cmd_oracle: Command,
    pub x: f64,
    pub y: f64,
    /// Feature vector seen by the decoder at this tick; kept in memory only.
    #[serde(skip)]
    pub features: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: u32,
    pub dir: Direction,
    pub ticks: Vec<TickEntry>,
    pub outcome: Outcome,
    pub dur: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<String>,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.outcome == Outcome::Succeeded
    }

    pub fn duration_seconds(&self, config: &TrialConfig) -> f64 {
        self.dur as f64 / config.d_f
    }

    /// Fraction of ticks where the decoded command equals the oracle command.
    pub fn match_fraction(&self) -> Option<f64> {
        let decoded: Vec<_> = self
            .ticks
            .iter()
            .filter_map(|t| t.cmd_dec.map(|d| d == t.cmd_oracle))
            .collect();
        if decoded.is_empty() {
            return None;
        }
        Some(decoded.iter().filter(|m| **m).count() as f64 / decoded.len() as f64)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trial record serializes")
    }
}

/// Result of replaying a record's executed commands from its spawn.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub positions: Vec<(f64, f64)>,
    pub phase: Phase,
    pub inside_ticks: u32,
}

pub fn replay(record: &TrialRecord, config: &TrialConfig) -> Result<Replay> {
    let mut state = ArenaState::new(record.dir, config);
    let mut positions = Vec::with_capacity(record.ticks.len());
    let mut inside_ticks = 0;
    for entry in &record.ticks {
        state = step(&state, entry.cmd_exec, config)?;
        if state.inside_target() {
            inside_ticks += 1;
        }
        positions.push(state.avatar);
    }
    Ok(Replay {
        positions,
        phase: state.phase,
        inside_ticks,
    })
}

pub fn write_trials_jsonl(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

pub fn read_trials_jsonl(text: &str) -> Result<Vec<TrialRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn cfg() -> TrialConfig {
        TrialConfig::default()
    }

    #[test]
    fn default_tick_budget() {
        assert_eq!(cfg().max_ticks(), 130);
        assert_eq!(cfg().hold_ticks(), 15);
    }

    #[test]
    fn forward_target_geometry() {
        let s = ArenaState::new(Direction::Forward, &cfg());
        assert_eq!(s.target, (0.0, 10.0));
        assert_eq!(ArenaState::new(Direction::Left, &cfg()).target, (-10.0, 0.0));
        assert_eq!(ArenaState::new(Direction::Right, &cfg()).target, (10.0, 0.0));
    }

    #[test]
    fn stop_keeps_position() {
        let s = ArenaState::new(Direction::Right, &cfg()).with_avatar(3.0, -2.0);
        let n = step(&s, Command::Stop, &cfg()).unwrap();
        assert_eq!(n.avatar, (3.0, -2.0));
        assert_eq!(n.tick, 1);
    }

    #[test]
    fn forward_then_hold_hand_trace() {
        // Entering the closed square at y = 9 starts the hold count, so the
        // 15th consecutive inside tick is tick 23, before the scripted
        // sequence (10 Forward + 15 Stop) runs out.
        let c = cfg();
        let mut s = ArenaState::new(Direction::Forward, &c);
        let script = std::iter::repeat_n(Command::Forward, 10).chain(std::iter::repeat_n(Command::Stop, 15));
        let mut finished_at = None;
        for cmd in script {
            if !s.is_running() {
                assert!(step(&s, cmd, &c).is_err());
                break;
            }
            s = step(&s, cmd, &c).unwrap();
            if s.phase == Phase::Succeeded {
                finished_at = Some(s.tick);
            }
        }
        assert_eq!(finished_at, Some(23));
        assert_eq!(s.hold_ticks, 15);
    }

    #[test]
    fn timeout_after_130_stops() {
        let c = cfg();
        let mut s = ArenaState::new(Direction::Left, &c);
        for _ in 0..129 {
            s = step(&s, Command::Stop, &c).unwrap();
            assert!(s.is_running());
        }
        s = step(&s, Command::Stop, &c).unwrap();
        assert_eq!(s.phase, Phase::Failed);
        assert_eq!(s.tick, 130);
        assert!(matches!(step(&s, Command::Stop, &c), Err(Error::InvalidState(_))));
    }

    #[test]
    fn leaving_target_resets_hold() {
        let c = cfg();
        let mut s = ArenaState::new(Direction::Right, &c).with_avatar(9.0, 0.0);
        for _ in 0..5 {
            s = step(&s, Command::Stop, &c).unwrap();
        }
        assert_eq!(s.hold_ticks, 5);
        s = step(&s, Command::Left, &c).unwrap();
        assert_eq!(s.hold_ticks, 0);
    }

    #[test]
    fn oracle_basics() {
        let c = cfg();
        let s = ArenaState::new(Direction::Forward, &c);
        assert_eq!(oracle_policy(&s, &c), Command::Forward);
        assert_eq!(oracle_policy(&s.with_avatar(0.0, 10.0), &c), Command::Stop);
        assert_eq!(oracle_policy(&s.with_avatar(0.5, 9.0), &c), Command::Stop);
        let r = ArenaState::new(Direction::Right, &c);
        assert_eq!(oracle_policy(&r, &c), Command::Right);
        assert_eq!(oracle_policy(&r.with_avatar(12.0, 0.0), &c), Command::Left);
    }

    #[test]
    fn spawn_is_reproducible() {
        let c = cfg();
        let a: Vec<_> = {
            let mut rng = rng_from(11);
            (0..50).map(|_| spawn_trial(&c, &mut rng).direction).collect()
        };
        let b: Vec<_> = {
            let mut rng = rng_from(11);
            (0..50).map(|_| spawn_trial(&c, &mut rng).direction).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn spawn_frequencies_are_uniform() {
        let c = cfg();
        let mut rng = rng_from(2024);
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            let s = spawn_trial(&c, &mut rng);
            assert_eq!(s.avatar, (0.0, 0.0));
            assert_eq!(s.phase, Phase::Running);
            counts[Direction::ALL.iter().position(|d| *d == s.direction).unwrap()] += 1;
        }
        for n in counts {
            let f = n as f64 / 3000.0;
            assert!((f - 1.0 / 3.0).abs() <= 0.03, "frequency {f}");
        }
    }

    #[test]
    fn rotation_mode_turns_then_drives() {
        let c = TrialConfig {
            motion: MotionModel::Rotation,
            ..cfg()
        };
        let mut s = ArenaState::new(Direction::Right, &c);
        assert_eq!(oracle_policy(&s, &c), Command::Right);
        s = step(&s, Command::Right, &c).unwrap();
        assert_eq!(s.avatar, (0.0, 0.0));
        assert_eq!(oracle_policy(&s, &c), Command::Forward);
        s = step(&s, Command::Forward, &c).unwrap();
        assert_eq!(s.avatar, (1.0, 0.0));
        let mut state = ArenaState::new(Direction::Left, &c);
        while state.is_running() {
            state = step(&state, oracle_policy(&state, &c), &c).unwrap();
        }
        assert_eq!(state.phase, Phase::Succeeded);
    }

    #[test]
    fn command_encoding_is_stable() {
        for (i, c) in Command::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(Command::from_index(i), Some(*c));
            assert_eq!(c.as_str().parse::<Command>().unwrap(), *c);
        }
        assert!("Back".parse::<Command>().is_err());
    }

    #[test]
    fn non_integral_timeout_rejected() {
        let c = TrialConfig {
            timeout: 13.05,
            ..cfg()
        };
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn record_json_has_fixed_field_names() {
        let rec = TrialRecord {
            id: 3,
            dir: Direction::Left,
            ticks: vec![TickEntry {
                k: 1,
                cmd_dec: Some(Command::Left),
                cmd_exec: Command::Left,
                cmd_oracle: Command::Left,
                x: -1.0,
                y: 0.0,
                features: vec![1, 2],
            }],
            outcome: Outcome::Failed,
            dur: 1,
            diag: None,
        };
        let line = rec.to_json_line();
        assert_eq!(
            line,
            r#"{"id":3,"dir":"Left","ticks":[{"k":1,"cmd_dec":"Left","cmd_exec":"Left","cmd_oracle":"Left","x":-1.0,"y":0.0}],"outcome":"Failed","dur":1}"#
        );
        let back = read_trials_jsonl(&line).unwrap();
        assert_eq!(back[0].to_json_line(), line);
    }
}
