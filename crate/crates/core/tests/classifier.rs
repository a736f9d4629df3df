use proptest::prelude::*;
use sgs_core::classifier::{classify_agent, default_stability_table, dyad_state, DyadClassifier};
use sgs_core::{Agent, AgentGazeState, ClassifierConfig, Fixation, GazeTarget, PairKey};

fn target() -> impl Strategy<Value = GazeTarget> {
    prop_oneof![
        2 => Just(GazeTarget::Partner),
        1 => Just(GazeTarget::Object("a".into())),
        1 => Just(GazeTarget::Object("b".into())),
    ]
}

// Ordered, non-overlapping fixations on a 1/16 s grid.
fn history(agent: Agent) -> impl Strategy<Value = Vec<Fixation>> {
    prop::collection::vec((0u32..24, 1u32..40, target()), 0..10).prop_map(move |steps| {
        let mut k = 0u32;
        steps
            .into_iter()
            .map(|(gap, len, target)| {
                let start = k + gap;
                k = start + len;
                Fixation::new(agent, target, start as f64 / 16.0, k as f64 / 16.0)
            })
            .collect()
    })
}

fn shift(h: &[Fixation], dt: f64) -> Vec<Fixation> {
    h.iter().map(|f| Fixation::new(f.agent, f.target.clone(), f.start + dt, f.end + dt)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn time_translation_invariant(
        own in history(Agent::Robot),
        other in history(Agent::Partner),
        now in 0u32..500,
        dt in -64i32..64,
    ) {
        let cfg = ClassifierConfig::default();
        let now = now as f64 / 16.0;
        let dt = dt as f64 / 4.0;
        let a = classify_agent(now, &own, &other, &cfg).unwrap();
        let b = classify_agent(now + dt, &shift(&own, dt), &shift(&other, dt), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn online_matches_direct(
        own in history(Agent::Robot),
        other in history(Agent::Partner),
        nows in prop::collection::vec(0u32..500, 1..8),
    ) {
        let cfg = ClassifierConfig::default();
        let mut nows = nows;
        nows.sort_unstable();
        let mut online = DyadClassifier::new(cfg, default_stability_table()).unwrap();
        let mut fed = (0usize, 0usize);
        for now in nows {
            let now = now as f64 / 16.0;
            let (own_settled, own_tail) = split(&own, now, &mut fed.0);
            let (other_settled, other_tail) = split(&other, now, &mut fed.1);
            online.update(Agent::Robot, own_settled, own_tail);
            online.update(Agent::Partner, other_settled, other_tail);
            let got = online.classify(now);
            let seen_own = visible(&own, now);
            let seen_other = visible(&other, now);
            prop_assert_eq!(got.self_state, classify_agent(now, &seen_own, &seen_other, &cfg).unwrap());
            prop_assert_eq!(got.other_state, classify_agent(now, &seen_other, &seen_own, &cfg).unwrap());
        }
    }

    #[test]
    fn gate_only_at_po_po(a in 0usize..5, b in 0usize..5) {
        let d = dyad_state(AgentGazeState::ALL[a], AgentGazeState::ALL[b], &default_stability_table());
        prop_assert_eq!(d.gate, d.pair() == PairKey::GATE);
    }
}

/// What an observer knows at `now`: fixations begun by then, the ongoing one
/// cut off at `now`.
fn visible(h: &[Fixation], now: f64) -> Vec<Fixation> {
    h.iter()
        .filter(|f| f.start <= now)
        .map(|f| Fixation::new(f.agent, f.target.clone(), f.start, f.end.min(now)))
        .collect()
}

fn split(h: &[Fixation], now: f64, fed: &mut usize) -> (Vec<Fixation>, Vec<Fixation>) {
    let done = h.iter().take_while(|f| f.end <= now).count();
    let settled = h[*fed..done].to_vec();
    *fed = done;
    let tail = visible(&h[done..], now);
    (settled, tail)
}

#[test]
fn empty_history_is_int() {
    let cfg = ClassifierConfig::default();
    assert_eq!(classify_agent(3.0, &[], &[], &cfg).unwrap(), AgentGazeState::INT);
}

#[test]
fn unordered_history_is_rejected() {
    let cfg = ClassifierConfig::default();
    let h = vec![
        Fixation::new(Agent::Robot, GazeTarget::Partner, 1.0, 2.0),
        Fixation::new(Agent::Robot, GazeTarget::Partner, 0.5, 0.8),
    ];
    assert!(classify_agent(3.0, &h, &[], &cfg).is_err());
}

#[test]
fn initiation_then_response() {
    use AgentGazeState::*;
    let cfg = ClassifierConfig::default();
    let cup = GazeTarget::Object("cup".into());
    let robot = vec![
        Fixation::new(Agent::Robot, GazeTarget::Partner, 0.0, 1.0),
        Fixation::new(Agent::Robot, cup.clone(), 1.1, 2.0),
    ];
    let partner = vec![
        Fixation::new(Agent::Partner, GazeTarget::Partner, 0.0, 1.3),
        Fixation::new(Agent::Partner, cup, 1.5, 2.0),
    ];
    assert_eq!(classify_agent(2.0, &robot, &partner, &cfg).unwrap(), IJA);
    assert_eq!(classify_agent(2.0, &partner, &robot, &cfg).unwrap(), RJA);
}
