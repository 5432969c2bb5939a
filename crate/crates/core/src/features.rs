//! Sliding-window spike counts refreshed on the decoder tick grid.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::frontend::SpikeEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Number of input channels `D`.
    pub channels: usize,
    /// Look-back window `T_w` in seconds.
    pub t_w: f64,
    /// Decoder frequency in Hz; the tick period is `1 / d_f`.
    pub d_f: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            channels: 64,
            t_w: 0.5,
            d_f: 10.0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::InvalidArgument("feature channel count must be >= 1".into()));
        }
        if !(self.d_f > 0.0) {
            return Err(Error::InvalidArgument("d_f must be positive".into()));
        }
        if !(self.t_w >= self.t_s()) {
            return Err(Error::InvalidArgument(format!(
                "t_w ({}) must be at least the tick period ({})",
                self.t_w,
                self.t_s()
            )));
        }
        Ok(())
    }

    pub fn t_s(&self) -> f64 {
        1.0 / self.d_f
    }

    /// Timestamp of tick `n`. All window boundaries derive from this.
    pub fn tick_time(&self, n: u64) -> f64 {
        n as f64 / self.d_f
    }
}

/// Spike counts per channel in `(t - T_w, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub tick: u64,
    pub t: f64,
    pub rates: Vec<u32>,
}

impl FeatureVector {
    pub fn new(tick: u64, t: f64, rates: Vec<u32>) -> Self {
        Self { tick, t, rates }
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.rates.iter().map(|&r| r as f64).collect()
    }

    pub fn total(&self) -> u64 {
        self.rates.iter().map(|&r| r as u64).sum()
    }
}

/// Buffers spike timestamps per channel and emits window counts on demand.
#[derive(Debug, Clone)]
pub struct RateExtractor {
    config: FeatureConfig,
    buffers: Vec<VecDeque<f64>>,
    last_pushed: Vec<f64>,
    last_tick: Option<u64>,
}

impl RateExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        let d = config.channels;
        Ok(Self {
            config,
            buffers: vec![VecDeque::new(); d],
            last_pushed: vec![f64::NEG_INFINITY; d],
            last_tick: None,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Appends events. Each channel's timestamps must be non-decreasing across
    /// calls. On error nothing from this batch is buffered.
    pub fn push_events(&mut self, events: &[SpikeEvent]) -> Result<()> {
        let mut last = self.last_pushed.clone();
        for e in events {
            if e.channel >= self.config.channels {
                return Err(Error::InvalidArgument(format!(
                    "spike on channel {} but D = {}",
                    e.channel, self.config.channels
                )));
            }
            if !e.timestamp.is_finite() || e.timestamp < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "bad spike timestamp {}",
                    e.timestamp
                )));
            }
            if e.timestamp < last[e.channel] {
                return Err(Error::Ordering {
                    channel: e.channel,
                    timestamp: e.timestamp,
                    last: last[e.channel],
                });
            }
            last[e.channel] = e.timestamp;
        }
        for e in events {
            self.buffers[e.channel].push_back(e.timestamp);
        }
        self.last_pushed = last;
        Ok(())
    }

    /// Counts for tick `n` (time `n / d_f`). Ticks must strictly increase.
    pub fn emit(&mut self, tick: u64) -> Result<FeatureVector> {
        if let Some(prev) = self.last_tick {
            if tick <= prev {
                return Err(Error::InvalidArgument(format!(
                    "emit tick {tick} does not advance past {prev}"
                )));
            }
        }
        let t = self.config.tick_time(tick);
        let lower = t - self.config.t_w;
        let rates = self
            .buffers
            .iter_mut()
            .map(|buf| {
                while buf.front().is_some_and(|&ts| ts <= lower) {
                    buf.pop_front();
                }
                buf.iter().take_while(|&&ts| ts <= t).count() as u32
            })
            .collect();
        self.last_tick = Some(tick);
        Ok(FeatureVector::new(tick, t, rates))
    }

    /// Events currently held in memory across all channels.
    pub fn buffered(&self) -> usize {
        self.buffers.iter().map(VecDeque::len).sum()
    }
}

/// CSV with header `tick_index,t,r_1..r_D`.
pub fn features_csv(vectors: &[FeatureVector], channels: usize) -> String {
    let mut out = String::from("tick_index,t");
    for k in 1..=channels {
        let _ = write!(out, ",r_{k}");
    }
    out.push('\n');
    for v in vectors {
        let _ = write!(out, "{},{}", v.tick, v.t);
        for r in &v.rates {
            let _ = write!(out, ",{r}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize, t_w: f64) -> FeatureConfig {
        FeatureConfig {
            channels: d,
            t_w,
            d_f: 10.0,
        }
    }

    #[test]
    fn empty_extractor_emits_zeros() {
        let mut x = RateExtractor::new(cfg(3, 0.5)).unwrap();
        x.push_events(&[]).unwrap();
        let v = x.emit(1).unwrap();
        assert_eq!(v.rates, vec![0, 0, 0]);
        assert_eq!(v.t, 0.1);
    }

    #[test]
    fn five_events_in_window() {
        let mut x = RateExtractor::new(cfg(2, 0.5)).unwrap();
        let ev: Vec<_> = (0..5).map(|i| SpikeEvent::new(i % 2, 0.3 + 0.01 * i as f64)).collect();
        x.push_events(&ev).unwrap();
        assert_eq!(x.emit(4).unwrap().total(), 5);
    }

    #[test]
    fn half_open_boundaries() {
        let c = cfg(1, 0.5);
        let t = c.tick_time(10);
        let mut x = RateExtractor::new(c.clone()).unwrap();
        x.push_events(&[SpikeEvent::new(0, t - c.t_w), SpikeEvent::new(0, t)])
            .unwrap();
        assert_eq!(x.emit(10).unwrap().rates, vec![1]);
    }

    #[test]
    fn future_events_wait_for_their_tick() {
        let mut x = RateExtractor::new(cfg(1, 0.5)).unwrap();
        x.push_events(&[SpikeEvent::new(0, 0.25)]).unwrap();
        assert_eq!(x.emit(2).unwrap().rates, vec![0]);
        assert_eq!(x.emit(3).unwrap().rates, vec![1]);
    }

    #[test]
    fn out_of_order_rejected_atomically() {
        let mut x = RateExtractor::new(cfg(2, 0.5)).unwrap();
        x.push_events(&[SpikeEvent::new(0, 0.2)]).unwrap();
        let err = x
            .push_events(&[SpikeEvent::new(1, 0.3), SpikeEvent::new(0, 0.1)])
            .unwrap_err();
        assert!(matches!(err, Error::Ordering { channel: 0, .. }));
        assert_eq!(x.buffered(), 1);
        // other channels unaffected by ordering on channel 0
        x.push_events(&[SpikeEvent::new(1, 0.05)]).unwrap();
    }

    #[test]
    fn bad_channel_rejected() {
        let mut x = RateExtractor::new(cfg(2, 0.5)).unwrap();
        assert!(x.push_events(&[SpikeEvent::new(2, 0.1)]).is_err());
    }

    #[test]
    fn non_monotone_emit_rejected() {
        let mut x = RateExtractor::new(cfg(1, 0.5)).unwrap();
        x.emit(3).unwrap();
        assert!(matches!(x.emit(3), Err(Error::InvalidArgument(_))));
        assert!(x.emit(2).is_err());
        assert!(x.emit(4).is_ok());
    }

    #[test]
    fn window_shorter_than_tick_rejected() {
        assert!(RateExtractor::new(cfg(1, 0.05)).is_err());
        assert!(RateExtractor::new(cfg(0, 0.5)).is_err());
        assert!(RateExtractor::new(cfg(1, 0.1)).is_ok());
    }

    #[test]
    fn csv_header_and_rows() {
        let v = vec![FeatureVector::new(1, 0.1, vec![2, 0, 5])];
        let csv = features_csv(&v, 3);
        assert_eq!(csv, "tick_index,t,r_1,r_2,r_3\n1,0.1,2,0,5\n");
    }
}
