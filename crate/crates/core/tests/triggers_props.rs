use aav_core::grid2d::GridConfig;
use aav_core::model::{AttentionSample, Position, Source};
use aav_core::session::{replay, EventBody, LogEvent, LogHeader, SessionLog};
use aav_core::triggers::{evaluate_implicit, Flag, ImplicitParams, TriggerMode};
use aav_core::Engine;
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Step {
    Sample { x: f64, y: f64, source: Source },
    Press,
    Release,
    Wait(u64),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        6 => (0.0f64..200.0, 0.0f64..150.0, prop::sample::select(Source::ALL.to_vec()))
            .prop_map(|(x, y, source)| Step::Sample { x, y, source }),
        1 => Just(Step::Press),
        1 => Just(Step::Release),
        2 => (1u64..250).prop_map(Step::Wait),
    ]
}

fn header(mode: TriggerMode) -> LogHeader {
    let mut h = LogHeader::grid(GridConfig::new(200.0, 150.0, 25.0).unwrap());
    h.trigger_mode = mode;
    h
}

/// The explicit-mode log, plus the same samples minus those that arrive
/// while the control is held, with no trigger events.
fn streams(steps: &[Step]) -> (SessionLog, SessionLog) {
    let mut with_triggers = SessionLog::new(header(TriggerMode::Explicit));
    let mut filtered = SessionLog::new(header(TriggerMode::Explicit));
    let (mut t, mut pressed) = (0u64, false);
    for s in steps {
        match *s {
            Step::Sample { x, y, source } => {
                let e = LogEvent::sample(AttentionSample::new(t, Position::point(x, y), source, 30.0));
                if !pressed {
                    filtered.record(e.clone()).unwrap();
                }
                with_triggers.record(e).unwrap();
            }
            Step::Press | Step::Release => {
                pressed = matches!(s, Step::Press);
                with_triggers.record(LogEvent::trigger(t, pressed)).unwrap();
            }
            Step::Wait(dt) => t += dt,
        }
    }
    let end = (t / 100 + 1) * 100;
    with_triggers.record(LogEvent::tick(end)).unwrap();
    filtered.record(LogEvent::tick(end)).unwrap();
    (with_triggers, filtered)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn explicit_mode_drops_exactly_pressed_samples(steps in prop::collection::vec(step(), 0..300)) {
        let (a, b) = streams(&steps);
        let ra = replay(&a, None).unwrap().snapshot;
        let rb = replay(&b, None).unwrap().snapshot;
        prop_assert_eq!(ra.maps, rb.maps);
        let sent = a.events.iter().filter(|e| matches!(e.body, EventBody::Sample { .. })).count() as u64;
        let kept = b.events.iter().filter(|e| matches!(e.body, EventBody::Sample { .. })).count() as u64;
        prop_assert_eq!(ra.counters.samples_accepted, kept);
        prop_assert_eq!(ra.counters.samples_dropped, sent - kept);
    }

    #[test]
    fn implicit_flags_never_chatter(values in prop::collection::vec(0.0f64..1.0, 1..400)) {
        let p = ImplicitParams::default();
        let mut flag = Flag::None;
        for v in values {
            let next = evaluate_implicit(v, flag, &p);
            match (flag, next) {
                (Flag::None, Flag::Emphasize) => prop_assert!(v < p.theta_lo),
                (Flag::None, Flag::DeEmphasize) => prop_assert!(v > p.theta_hi),
                (Flag::Emphasize, Flag::None) => prop_assert!(v >= p.theta_lo + p.hysteresis),
                (Flag::DeEmphasize, Flag::None) => prop_assert!(v <= p.theta_hi - p.hysteresis),
                (a, b) => prop_assert_eq!(a, b, "direct flag swap at {}", v),
            }
            flag = next;
        }
    }

    #[test]
    fn implicit_band_holds_flags(
        inside_lo in prop::collection::vec(0.1f64..0.15, 1..50),
        inside_hi in prop::collection::vec(0.8500001f64..0.9, 1..50),
    ) {
        let p = ImplicitParams::default();
        let mut flag = evaluate_implicit(0.05, Flag::None, &p);
        prop_assert_eq!(flag, Flag::Emphasize);
        for v in inside_lo {
            flag = evaluate_implicit(v, flag, &p);
            prop_assert_eq!(flag, Flag::Emphasize);
        }
        let mut flag = evaluate_implicit(0.95, Flag::None, &p);
        for v in inside_hi {
            flag = evaluate_implicit(v, flag, &p);
            prop_assert_eq!(flag, Flag::DeEmphasize);
        }
    }
}

#[test]
fn implicit_emphasis_clears_under_gaze() {
    let mut h = header(TriggerMode::Implicit);
    h.params.gain_per_s = 0.3;
    let p = h.implicit;
    let cap = h.params.cap;
    let mut engine = Engine::new(h).unwrap();
    let target = 0usize;
    assert_eq!(engine.trigger().flags[target], Flag::Emphasize);
    let mut cleared_at = None;
    for k in 0..20u64 {
        assert!(engine.trigger().gate_capture());
        let s = AttentionSample::new(k * 100, Position::point(5.0, 5.0), Source::Gaze, 1.0);
        engine.ingest(&LogEvent::sample(s)).unwrap();
        engine.run_tick().unwrap();
        let v = engine.grid().unwrap().fused_short_term()[target] / cap;
        let flag = engine.trigger().flags[target];
        if v >= p.theta_lo + p.hysteresis {
            assert_eq!(flag, Flag::None, "tick {k} value {v}");
            cleared_at.get_or_insert(k);
        } else {
            assert_eq!(flag, Flag::Emphasize, "tick {k} value {v}");
        }
    }
    assert!(cleared_at.is_some());
    // Untouched targets stay flagged, so the overlay stays up.
    assert!(engine.trigger().revis_visible);
}

#[test]
fn saturated_target_is_deemphasized_then_released() {
    let mut h = header(TriggerMode::Implicit);
    h.params.half_life_s = 0.5;
    let cap = h.params.cap;
    let p = h.implicit;
    let mut engine = Engine::new(h).unwrap();
    let mut t = 0;
    for _ in 0..15 {
        let s = AttentionSample::new(t, Position::point(5.0, 5.0), Source::Gaze, 1.0);
        engine.ingest(&LogEvent::sample(s)).unwrap();
        engine.run_tick().unwrap();
        t += 100;
    }
    assert_eq!(engine.trigger().flags[0], Flag::DeEmphasize);
    let mut last = Flag::DeEmphasize;
    for _ in 0..30 {
        engine.run_tick().unwrap();
        let v = engine.grid().unwrap().fused_short_term()[0] / cap;
        let flag = engine.trigger().flags[0];
        if last == Flag::DeEmphasize && flag == Flag::None {
            assert!(v <= p.theta_hi - p.hysteresis);
        }
        last = flag;
    }
    assert_eq!(last, Flag::Emphasize);
}
