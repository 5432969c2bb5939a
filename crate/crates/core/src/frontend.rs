//! Synthetic subject and spike detection.
//!
//! The closed loop consumes spikes straight from [`encode_intent`]. The raw
//! voltage path ([`synthesize_trace`], [`mad_sigma`], [`detect_spikes`]) exists
//! to exercise threshold detection at the recording sample rate.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from, SimRng};
use crate::task::Command;

/// Gaussian consistency constant of the median absolute deviation.
pub const MAD_TO_SIGMA: f64 = 0.6745;

/// Threshold multiplier applied to the estimated noise sigma.
pub const THRESHOLD_MULTIPLIER: f64 = 5.0;

pub const DEFAULT_REFRACTORY: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    #[serde(rename = "ch")]
    pub channel: usize,
    #[serde(rename = "t")]
    pub timestamp: f64,
}

impl SpikeEvent {
    pub fn new(channel: usize, timestamp: f64) -> Self {
        Self { channel, timestamp }
    }
}

/// Rate-coded synthetic motor cortex.
///
/// Channel `k` fires as a Poisson process at `r0 + dr` when the intended
/// command equals `preferred[k]` and at `r0` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub preferred: Vec<Command>,
    pub r0: f64,
    pub dr: f64,
    pub seed: u64,
    pub deterministic: bool,
}

impl EncoderModel {
    /// Channels split evenly and contiguously across the command classes.
    pub fn contiguous(channels: usize, r0: f64, dr: f64, seed: u64) -> Result<Self> {
        Self::with_layout(contiguous_layout(channels), r0, dr, seed)
    }

    pub fn with_layout(preferred: Vec<Command>, r0: f64, dr: f64, seed: u64) -> Result<Self> {
        let model = Self {
            preferred,
            r0,
            dr,
            seed,
            deterministic: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.preferred.is_empty() {
            return Err(Error::InvalidArgument("encoder needs at least one channel".into()));
        }
        if !(self.r0 >= 0.0) || !(self.r0 + self.dr >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rates must be non-negative (r0 = {}, r0 + dr = {})",
                self.r0,
                self.r0 + self.dr
            )));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.preferred.len()
    }

    pub fn rate(&self, channel: usize, intent: Command) -> f64 {
        if self.preferred[channel] == intent {
            self.r0 + self.dr
        } else {
            self.r0
        }
    }

    /// Fresh generator for this encoder's noise seed.
    pub fn rng(&self) -> SimRng {
        rng_from(self.seed)
    }
}

/// `preferred[k] = class floor(k * C / D)`.
pub fn contiguous_layout(channels: usize) -> Vec<Command> {
    (0..channels)
        .map(|k| Command::ALL[k * Command::COUNT / channels.max(1)])
        .collect()
}

/// Spikes emitted by the subject over the half-open window `(t0, t1]`, sorted
/// by timestamp (ties by channel).
pub fn encode_intent<R: Rng + ?Sized>(
    model: &EncoderModel,
    intent: Command,
    window: (f64, f64),
    rng: &mut R,
) -> Result<Vec<SpikeEvent>> {
    encode_with(model, |ch| model.rate(ch, intent), window, rng)
}

/// Untuned activity: every channel at the baseline rate `r0`. Used between
/// trials, when the subject has no movement intent.
pub fn encode_baseline<R: Rng + ?Sized>(
    model: &EncoderModel,
    window: (f64, f64),
    rng: &mut R,
) -> Result<Vec<SpikeEvent>> {
    encode_with(model, |_| model.r0, window, rng)
}

fn encode_with<R: Rng + ?Sized>(
    model: &EncoderModel,
    rate_of: impl Fn(usize) -> f64,
    window: (f64, f64),
    rng: &mut R,
) -> Result<Vec<SpikeEvent>> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("empty window ({t0}, {t1}]")));
    }
    let mut events = Vec::new();
    for channel in 0..model.channels() {
        let rate = rate_of(channel);
        if rate <= 0.0 {
            continue;
        }
        if model.deterministic {
            // evenly spaced on the global grid k / rate
            let mut k = (t0 * rate).floor() as u64 + 1;
            loop {
                let t = k as f64 / rate;
                if t > t1 {
                    break;
                }
                if t > t0 {
                    events.push(SpikeEvent::new(channel, t));
                }
                k += 1;
            }
        } else {
            let gaps = Exp::new(rate).map_err(|e| Error::Numeric(e.to_string()))?;
            let mut t = t0;
            loop {
                t += gaps.sample(rng);
                if t > t1 {
                    break;
                }
                events.push(SpikeEvent::new(channel, t));
            }
        }
    }
    events.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then(a.channel.cmp(&b.channel))
    });
    Ok(events)
}

/// Robust noise estimate `median(|x|) / 0.6745`.
pub fn mad_sigma(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("mad_sigma of an empty trace".into()));
    }
    let mut abs: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
    if abs.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN sample".into()));
    }
    Ok(median_in_place(&mut abs) / MAD_TO_SIGMA)
}

pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

pub fn detect_threshold(sigma: f64) -> f64 {
    -THRESHOLD_MULTIPLIER * sigma
}

/// One channel of raw voltage in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    pub channel: usize,
    pub fs: f64,
    pub samples: Vec<f64>,
}

impl NoiseTrace {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

/// Negative-going threshold crossings with a per-channel refractory period.
///
/// A crossing is the first sample strictly below `threshold` after a sample at
/// or above it. The event timestamp is `sample_index / fs`.
pub fn detect_spikes(trace: &NoiseTrace, threshold: f64, refractory: f64) -> Vec<SpikeEvent> {
    let mut events = Vec::new();
    let mut last: Option<usize> = None;
    for (i, pair) in trace.samples.windows(2).enumerate() {
        let idx = i + 1;
        if pair[0] >= threshold && pair[1] < threshold {
            if let Some(prev) = last {
                if ((idx - prev) as f64) / trace.fs < refractory {
                    continue;
                }
            }
            last = Some(idx);
            events.push(SpikeEvent::new(trace.channel, idx as f64 / trace.fs));
        }
    }
    events
}

/// Per-channel MAD threshold followed by detection.
pub fn detect_auto(trace: &NoiseTrace, refractory: f64) -> Result<(f64, Vec<SpikeEvent>)> {
    let threshold = detect_threshold(mad_sigma(&trace.samples)?);
    Ok((threshold, detect_spikes(trace, threshold, refractory)))
}

/// Biphasic extracellular waveform: a sharp trough followed by a slower
/// positive rebound, `duration` seconds long, unit trough depth.
pub fn spike_template(fs: f64, duration: f64) -> Vec<f64> {
    let n = ((duration * fs).round() as usize).max(2);
    let trough = (n as f64 * 0.3).max(1.0);
    (0..n)
        .map(|i| {
            let t = i as f64;
            if t < trough {
                -(std::f64::consts::PI * (t + 0.5) / trough).sin()
            } else {
                0.35 * (std::f64::consts::PI * (t - trough + 0.5) / (n as f64 - trough)).sin()
            }
        })
        .collect()
}

/// Gaussian noise plus spike templates scaled to `amplitude` (trough depth in
/// µV) at the given onset times.
pub fn synthesize_trace<R: Rng + ?Sized>(
    channel: usize,
    fs: f64,
    duration: f64,
    noise_sigma: f64,
    onsets: &[f64],
    amplitude: f64,
    rng: &mut R,
) -> Result<NoiseTrace> {
    let count = duration * fs;
    if !(count >= 0.0) || (count - count.round()).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "duration x fs must be a whole number of samples, got {count}"
        )));
    }
    let n = count.round() as usize;
    let mut samples: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            noise_sigma * z
        })
        .collect();
    let template = spike_template(fs, 1e-3);
    for &onset in onsets {
        let start = (onset * fs).round() as usize;
        for (j, v) in template.iter().enumerate() {
            if let Some(s) = samples.get_mut(start + j) {
                *s += amplitude * v;
            }
        }
    }
    Ok(NoiseTrace {
        channel,
        fs,
        samples,
    })
}

pub fn write_spikes_jsonl(events: &[SpikeEvent]) -> String {
    let mut out = String::with_capacity(events.len() * 24);
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("spike serializes"));
        out.push('\n');
    }
    out
}

pub fn read_spikes_jsonl(text: &str) -> Result<Vec<SpikeEvent>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
