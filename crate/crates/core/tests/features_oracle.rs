use neuroloop::features::{FeatureConfig, RateExtractor};
use neuroloop::frontend::SpikeEvent;
use proptest::prelude::*;

fn naive(events: &[SpikeEvent], ch: usize, t: f64, t_w: f64) -> u32 {
    events
        .iter()
        .filter(|e| e.channel == ch && e.timestamp > t - t_w && e.timestamp <= t)
        .count() as u32
}

fn stream() -> impl Strategy<Value = (usize, Vec<(usize, f64)>, usize)> {
    (1usize..6).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec((0..d, 0.0..4.0f64), 0..200),
            0usize..3,
        )
    })
}

proptest! {
    #[test]
    fn emit_matches_recount((d, raw, w) in stream()) {
        let t_w = [0.1, 0.5, 1.0][w];
        let fc = FeatureConfig { channels: d, t_w, d_f: 10.0 };
        let mut events: Vec<SpikeEvent> = raw.into_iter().map(|(c, t)| SpikeEvent::new(c, t)).collect();
        events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let mut ex = RateExtractor::new(fc.clone()).unwrap();
        let mut next = 0;
        let mut prev: Option<Vec<u32>> = None;
        for n in 1..=42u64 {
            let t = fc.tick_time(n);
            let start = next;
            while next < events.len() && events[next].timestamp <= t {
                next += 1;
            }
            ex.push_events(&events[start..next]).unwrap();
            let v = ex.emit(n).unwrap();
            for ch in 0..d {
                prop_assert_eq!(v.rates[ch], naive(&events, ch, t, t_w));
            }
            // sliding: new count = old count + entered - left
            if let Some(p) = prev {
                let t0 = fc.tick_time(n - 1);
                for ch in 0..d {
                    let entered = naive(&events, ch, t, t - t0);
                    let left = naive(&events, ch, t0 - t_w + (t - t0), t - t0);
                    prop_assert_eq!(v.rates[ch] as i64, p[ch] as i64 + entered as i64 - left as i64);
                }
            }
            prev = Some(v.rates);
        }
    }

    #[test]
    fn skipping_ticks_is_consistent(ticks in prop::collection::btree_set(1u64..60, 1..20), seed in 0u64..1000) {
        let fc = FeatureConfig { channels: 2, t_w: 0.5, d_f: 10.0 };
        let events: Vec<SpikeEvent> = (0..300)
            .map(|k| SpikeEvent::new((k + seed as usize) % 2, k as f64 * 0.02 + (seed as f64) * 1e-5))
            .collect();
        let mut ex = RateExtractor::new(fc.clone()).unwrap();
        ex.push_events(&events).unwrap();
        for n in ticks {
            let t = fc.tick_time(n);
            let v = ex.emit(n).unwrap();
            prop_assert_eq!(v.rates[0], naive(&events, 0, t, 0.5));
            prop_assert_eq!(v.rates[1], naive(&events, 1, t, 0.5));
        }
    }
}

#[test]
fn memory_is_bounded_by_the_window() {
    let fc = FeatureConfig {
        channels: 1,
        t_w: 0.5,
        d_f: 10.0,
    };
    let mut ex = RateExtractor::new(fc.clone()).unwrap();
    for n in 1..=1000u64 {
        let t0 = fc.tick_time(n - 1);
        let ev: Vec<_> = (1..=10).map(|k| SpikeEvent::new(0, t0 + k as f64 * 0.01)).collect();
        ex.push_events(&ev).unwrap();
        ex.emit(n).unwrap();
        assert!(ex.buffered() <= 60);
    }
}
