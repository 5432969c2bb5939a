//! Benchmark quantities: trial success, time to target, neural/hand ratios,
//! chance level, an unpaired t-test and the implant data/power budget.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::task::{Direction, TrialConfig, TrialRecord};

/// Below this the chance probability is reported as exactly zero.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Conventional significance level used in reports.
pub const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanceLevel {
    pub log10: f64,
    /// `10^log10`, clamped to 0 below [`PROBABILITY_FLOOR`].
    pub probability: f64,
}

/// Probability that uniformly random decoding matches ground truth on
/// `match_fraction * n_steps` ticks: `(1 / n_classes)^(match_fraction * n_steps)`.
pub fn chance_trial_success(n_classes: u32, match_fraction: f64, n_steps: u32) -> Result<ChanceLevel> {
    if n_classes < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    if !(0.0..=1.0).contains(&match_fraction) {
        return Err(Error::InvalidArgument("match_fraction must lie in [0, 1]".into()));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
    }
    let exponent = match_fraction * n_steps as f64;
    let log10 = if exponent == 0.0 {
        0.0
    } else {
        -exponent * (n_classes as f64).log10()
    };
    let p = 10f64.powf(log10);
    Ok(ChanceLevel {
        log10,
        probability: if p < PROBABILITY_FLOOR { 0.0 } else { p },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

impl TTest {
    pub fn significant(&self) -> bool {
        self.p <= SIGNIFICANCE
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok((2.0 * dist.cdf(-t.abs())).min(1.0))
}

/// Pooled-variance unpaired two-sample t-test, two-sided.
pub fn t_test_unpaired(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("each sample needs at least two values".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    if !(pooled > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTest {
        t,
        p: two_sided_p(t, df)?,
        df,
    })
}

/// Welch's unequal-variance variant with Welch-Satterthwaite degrees of freedom.
pub fn t_test_welch(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("each sample needs at least two values".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    if !(sa + sb > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTest {
        t,
        p: two_sided_p(t, df)?,
        df,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Hand,
    Neural,
}

impl ControlMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::Hand => "hand",
            ControlMode::Neural => "neural",
        }
    }
}

/// Success and duration statistics for one mode and target direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mode: ControlMode,
    pub direction: Direction,
    pub n_trials: usize,
    pub n_success: usize,
    pub success_rate: f64,
    /// Mean successful-trial duration in seconds; absent without successes.
    pub mean_duration: Option<f64>,
    /// Sample standard deviation; absent with fewer than two successes.
    pub std_duration: Option<f64>,
}

/// Neural versus hand comparison for one direction (or all directions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub direction: Option<Direction>,
    /// hand mean duration / neural mean duration.
    pub speed_ratio: Option<f64>,
    /// neural success rate / hand success rate.
    pub success_ratio: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub groups: Vec<GroupStats>,
    pub directions: Vec<Comparison>,
    pub overall: Comparison,
    pub chance: ChanceLevel,
}

impl BenchmarkSummary {
    pub fn group(&self, mode: ControlMode, direction: Direction) -> Option<&GroupStats> {
        self.groups
            .iter()
            .find(|g| g.mode == mode && g.direction == direction)
    }

    pub fn direction(&self, direction: Direction) -> Option<&Comparison> {
        self.directions.iter().find(|c| c.direction == Some(direction))
    }
}

fn durations(records: &[&TrialRecord], config: &TrialConfig) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.succeeded())
        .map(|r| r.duration_seconds(config))
        .collect()
}

fn group_stats(mode: ControlMode, direction: Direction, records: &[&TrialRecord], config: &TrialConfig) -> GroupStats {
    let d = durations(records, config);
    let n_success = d.len();
    let mean = (n_success > 0).then(|| d.iter().sum::<f64>() / n_success as f64);
    let std = (n_success > 1).then(|| mean_var(&d).1.sqrt());
    GroupStats {
        mode,
        direction,
        n_trials: records.len(),
        n_success,
        success_rate: n_success as f64 / records.len() as f64,
        mean_duration: mean,
        std_duration: std,
    }
}

fn compare(direction: Option<Direction>, hand: &[&TrialRecord], neural: &[&TrialRecord], config: &TrialConfig) -> Comparison {
    let dh = durations(hand, config);
    let dn = durations(neural, config);
    let mean = |d: &[f64]| (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64);
    let (mh, mn) = (mean(&dh), mean(&dn));
    let rate = |d: &[f64], all: &[&TrialRecord]| d.len() as f64 / all.len() as f64;
    let (rh, rn) = (rate(&dh, hand), rate(&dn, neural));
    let speed_ratio = match (mh, mn) {
        (Some(h), Some(n)) if n > 0.0 => Some(h / n),
        _ => None,
    };
    let success_ratio = (rh > 0.0).then(|| rn / rh);
    let (t, p, note) = match t_test_unpaired(&dh, &dn) {
        Ok(tt) => (Some(tt.t), Some(tt.p), None),
        Err(Error::DegenerateVariance) if mh == mn => (Some(0.0), Some(1.0), Some("identical".to_string())),
        Err(Error::DegenerateVariance) => (None, None, Some("zero variance".to_string())),
        Err(_) => (None, None, Some("too few successful trials".to_string())),
    };
    Comparison {
        direction,
        speed_ratio,
        success_ratio,
        t,
        p,
        note,
    }
}

/// Per-direction and overall statistics for hand versus neural control.
pub fn summarize(
    hand: &[TrialRecord],
    neural: &[TrialRecord],
    config: &TrialConfig,
    chance: ChanceLevel,
) -> Result<BenchmarkSummary> {
    let mut groups = Vec::new();
    let mut directions = Vec::new();
    for dir in Direction::ALL {
        let h: Vec<&TrialRecord> = hand.iter().filter(|r| r.dir == dir).collect();
        let n: Vec<&TrialRecord> = neural.iter().filter(|r| r.dir == dir).collect();
        if h.is_empty() || n.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "direction {dir} needs at least one trial per mode"
            )));
        }
        groups.push(group_stats(ControlMode::Hand, dir, &h, config));
        groups.push(group_stats(ControlMode::Neural, dir, &n, config));
        directions.push(compare(Some(dir), &h, &n, config));
    }
    let h: Vec<&TrialRecord> = hand.iter().collect();
    let n: Vec<&TrialRecord> = neural.iter().collect();
    Ok(BenchmarkSummary {
        groups,
        directions,
        overall: compare(None, &h, &n, config),
        chance,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per mode x direction.
pub fn summary_csv(summary: &BenchmarkSummary) -> String {
    let mut out = String::from(
        "mode,direction,n_trials,n_success,success_rate,mean_duration_s,std_duration_s,speed_ratio,success_ratio,t,p\n",
    );
    for g in &summary.groups {
        let cmp = summary.direction(g.direction);
        let (speed, succ, t, p) = match (g.mode, cmp) {
            (ControlMode::Neural, Some(c)) => (c.speed_ratio, c.success_ratio, c.t, c.p),
            _ => (None, None, None, None),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            g.mode.as_str(),
            g.direction,
            g.n_trials,
            g.n_success,
            g.success_rate,
            opt(g.mean_duration),
            opt(g.std_duration),
            opt(speed),
            opt(succ),
            opt(t),
            opt(p)
        );
    }
    out
}

/// Plot-ready per-trial table.
pub fn durations_csv(hand: &[TrialRecord], neural: &[TrialRecord], config: &TrialConfig) -> String {
    let mut out = String::from("mode,trial,direction,outcome,duration_s,match_fraction\n");
    for (mode, records) in [(ControlMode::Hand, hand), (ControlMode::Neural, neural)] {
        for r in records {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{},{}",
                mode.as_str(),
                r.id,
                r.dir,
                r.outcome,
                r.duration_seconds(config),
                opt(r.match_fraction())
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetSpec {
    pub electrodes: f64,
    /// Hz
    pub sampling: f64,
    pub adc_bits: f64,
    pub dof: f64,
    pub cmd_bits: f64,
    /// Hz
    pub cmd_rate: f64,
    /// nW per channel
    pub feature_nw_per_channel: f64,
    /// µW
    pub decoder_uw: f64,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self {
            electrodes: 100.0,
            sampling: 20_000.0,
            adc_bits: 12.0,
            dof: 6.0,
            cmd_bits: 10.0,
            cmd_rate: 50.0,
            feature_nw_per_channel: 40.0,
            decoder_uw: 0.71,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub raw_bps: f64,
    pub decoded_bps: f64,
    pub feature_uw: f64,
    pub total_added_uw: f64,
}

impl Budget {
    /// Raw-to-decoded data-rate reduction; `None` when undefined.
    pub fn reduction(&self) -> Option<f64> {
        (self.decoded_bps > 0.0 && self.raw_bps > 0.0).then(|| self.raw_bps / self.decoded_bps)
    }
}

pub fn budget(spec: &BudgetSpec) -> Result<Budget> {
    let fields = [
        spec.electrodes,
        spec.sampling,
        spec.adc_bits,
        spec.dof,
        spec.cmd_bits,
        spec.cmd_rate,
        spec.feature_nw_per_channel,
        spec.decoder_uw,
    ];
    if fields.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("budget inputs must be finite and non-negative".into()));
    }
    let feature_uw = spec.electrodes * spec.feature_nw_per_channel / 1000.0;
    Ok(Budget {
        raw_bps: spec.electrodes * spec.sampling * spec.adc_bits,
        decoded_bps: spec.dof * spec.cmd_bits * spec.cmd_rate,
        feature_uw,
        total_added_uw: feature_uw + spec.decoder_uw,
    })
}
