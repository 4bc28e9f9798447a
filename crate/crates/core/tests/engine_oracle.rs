use attnweb_core::engine::{
    calibrate, on_attention, on_blink, ControlEventKind, EngineState, EventConfig, EventEngine, NavigationPolarity,
};
use attnweb_core::oracle;
use attnweb_core::{ControlEvent, Sample, Track};
use proptest::prelude::*;

fn trace() -> impl Strategy<Value = Vec<Sample>> {
    proptest::collection::vec(
        (
            0i64..1500,
            prop_oneof![
                6 => Just(Track::Attention),
                4 => Just(Track::Blink),
                1 => Just(Track::SignalQuality),
                1 => Just(Track::Meditation),
            ],
            0i32..=100,
            prop::bool::ANY,
        ),
        0..500,
    )
    .prop_map(|steps| {
        let mut t = 0;
        steps
            .into_iter()
            .map(|(gap, track, v, off_head)| {
                t += gap;
                let value = match track {
                    Track::Attention | Track::Meditation => v.max(1),
                    Track::SignalQuality => {
                        if off_head {
                            200
                        } else {
                            v
                        }
                    }
                    _ => v,
                };
                Sample { t_ms: t, track, value }
            })
            .collect()
    })
}

fn config() -> impl Strategy<Value = EventConfig> {
    (
        1i32..=100,
        1i64..3000,
        1i64..3000,
        1i32..=100,
        1i64..500,
        0i64..2000,
        0i32..=200,
        prop::bool::ANY,
        prop::bool::ANY,
    )
        .prop_map(|(thr, hold, period, delta, min_gap, extra, gate, invert, abs)| EventConfig {
            attention_threshold: thr,
            hold_ms: hold,
            advance_period_ms: period,
            blink_delta: delta,
            double_blink_min_gap_ms: min_gap,
            double_blink_max_gap_ms: min_gap + 1 + extra,
            signal_quality_gate: gate,
            polarity: if invert { NavigationPolarity::AdvanceOnHigh } else { NavigationPolarity::HoldOnHigh },
            absolute_blink_delta: abs,
        })
}

fn run(trace: &[Sample], config: &EventConfig) -> Vec<ControlEvent> {
    EventEngine::new(config.clone()).unwrap().run(trace)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_oracle_with_defaults(trace in trace()) {
        let cfg = EventConfig::default();
        prop_assert_eq!(run(&trace, &cfg), oracle::engine_events(&trace, &cfg));
    }

    #[test]
    fn matches_oracle_with_any_config(trace in trace(), cfg in config()) {
        prop_assert_eq!(run(&trace, &cfg), oracle::engine_events(&trace, &cfg));
    }

    #[test]
    fn functional_api_agrees_with_engine(trace in trace()) {
        let cfg = EventConfig::default();
        let mut state = EngineState::default();
        let mut events = Vec::new();
        for s in trace.iter().filter(|s| matches!(s.track, Track::Attention | Track::Blink)) {
            let step = if s.track == Track::Attention { on_attention(s, &state, &cfg) } else { on_blink(s, &state, &cfg) };
            let (ev, next) = step.unwrap();
            events.extend(ev);
            state = next;
        }
        let only_control: Vec<Sample> =
            trace.iter().copied().filter(|s| matches!(s.track, Track::Attention | Track::Blink)).collect();
        prop_assert_eq!(events, run(&only_control, &cfg));
    }

    #[test]
    fn event_stream_invariants(trace in trace()) {
        let cfg = EventConfig::default();
        let events = run(&trace, &cfg);
        prop_assert!(events.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));

        let deliberate = events.iter().filter(|e| matches!(e.kind, ControlEventKind::DeliberateBlink { .. })).count();
        let double = events.iter().filter(|e| matches!(e.kind, ControlEventKind::DoubleBlink { .. })).count();
        prop_assert!(double <= deliberate / 2);

        // no FocusAdvance strictly inside [Enter, Exit)
        let mut inside = false;
        for e in &events {
            match e.kind {
                ControlEventKind::SustainedHighEnter { .. } => inside = true,
                ControlEventKind::SustainedHighExit { .. } => inside = false,
                ControlEventKind::FocusAdvance { .. } => prop_assert!(!inside),
                _ => {}
            }
        }

        // every DoubleBlink closes a pair of DeliberateBlinks within the window
        let mut last_deliberate: Vec<i64> = Vec::new();
        for e in &events {
            match e.kind {
                ControlEventKind::DeliberateBlink { .. } => last_deliberate.push(e.t_ms),
                ControlEventKind::DoubleBlink { gap_ms } => {
                    let n = last_deliberate.len();
                    prop_assert!(n >= 2);
                    prop_assert_eq!(last_deliberate[n - 1] - last_deliberate[n - 2], gap_ms);
                    prop_assert!((cfg.double_blink_min_gap_ms..=cfg.double_blink_max_gap_ms).contains(&gap_ms));
                }
                _ => {}
            }
        }
    }

    #[test]
    fn raising_threshold_shrinks_sustained_set(trace in trace(), thr in 1i32..100, bump in 1i32..50) {
        let sustained_at = |threshold: i32| -> Vec<bool> {
            let cfg = EventConfig { attention_threshold: threshold, ..Default::default() };
            let mut engine = EventEngine::new(cfg).unwrap();
            trace
                .iter()
                .map(|s| {
                    let _ = engine.on_sample(s);
                    engine.state().is_sustained()
                })
                .collect()
        };
        let low = sustained_at(thr);
        let high = sustained_at((thr + bump).min(100));
        prop_assert!(high.iter().zip(&low).all(|(h, l)| !h || *l));
    }

    #[test]
    fn replay_is_deterministic(trace in trace(), cfg in config()) {
        prop_assert_eq!(run(&trace, &cfg), run(&trace, &cfg));
    }

    #[test]
    fn calibration_matches_counting_oracle(values in proptest::collection::vec(1i32..=100, 0..60)) {
        let samples: Vec<Sample> = values.iter().enumerate().map(|(i, &v)| Sample::attention(i as i64, v)).collect();
        prop_assert_eq!(calibrate(&samples), oracle::calibration(&samples));
    }
}

/// A higher threshold can split one sustained run into two, so the number
/// of Enter events is not monotone in the threshold.
#[test]
fn enter_count_is_not_monotone_in_threshold() {
    let trace: Vec<Sample> = [(0, 50), (1000, 50), (2000, 35), (3000, 50), (4000, 50)]
        .iter()
        .map(|&(t, v)| Sample::attention(t, v))
        .collect();
    let enters = |threshold| {
        let cfg = EventConfig { attention_threshold: threshold, ..Default::default() };
        run(&trace, &cfg).iter().filter(|e| matches!(e.kind, ControlEventKind::SustainedHighEnter { .. })).count()
    };
    assert_eq!(enters(30), 1);
    assert_eq!(enters(40), 2);
}
