use std::sync::OnceLock;

use proptest::prelude::*;
use survey_core::engine::{Engine, PolicyKind, SessionConfig, SessionStatus};
use survey_core::policy::{EpsilonSchedule, EvTable};
use survey_core::Error;

const RESPONSES: &[&str] = &[
    "ok",
    "I guess it's fine",
    "I love my classes and my friends, we study together in the library every Tuesday night and it makes me so happy",
    "Honestly the dining hall is terrible and I hate waiting in line at Hamilton for forty minutes",
    "no",
    "My advisor Dr. Patel helped me a lot last semester when I was stressed about my major",
    "It's whatever.",
    "We joined a club last fall and our group meets downtown near the stadium, it was amazing",
];

fn engine() -> &'static Engine {
    static E: OnceLock<Engine> = OnceLock::new();
    E.get_or_init(|| Engine::with_prior(EvTable::reference_prior()).unwrap())
}

fn arb_schedule() -> impl Strategy<Value = EpsilonSchedule> {
    prop_oneof![
        Just(EpsilonSchedule::fixed(0.15).unwrap()),
        Just(EpsilonSchedule::fixed(0.30).unwrap()),
        Just(EpsilonSchedule::reference_decay()),
        (0.0f64..=1.0).prop_map(|e| EpsilonSchedule::fixed(e).unwrap()),
    ]
}

fn argmax_lowest(row: &[f64; 5]) -> usize {
    let mut best = 0;
    for i in 1..5 {
        if row[i] > row[best] {
            best = i;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn updates_hit_the_previous_decision(
        seed in any::<u64>(),
        schedule in arb_schedule(),
        alpha in 0.05f64..=1.0,
        picks in prop::collection::vec(0usize..RESPONSES.len(), 15),
    ) {
        let config = SessionConfig { seed, schedule: schedule.clone(), alpha, ..SessionConfig::default() };
        let responses: Vec<&str> = picks.iter().map(|i| RESPONSES[*i]).collect();
        let tr = engine().replay("s", config.clone(), &responses).unwrap();
        prop_assert_eq!(tr.status, SessionStatus::Completed);
        prop_assert_eq!(tr.exchanges.len(), 15);

        // shadow table maintained by hand
        let prior = EvTable::reference_prior();
        let mut shadow = [[0.0f64; 5]; 5];
        for s in survey_core::EngagementState::ALL {
            shadow[s.index()] = prior.row(s);
        }
        for (i, e) in tr.exchanges.iter().enumerate() {
            prop_assert_eq!(e.t as usize, i + 1);
            if i == 0 {
                prop_assert!(e.reward.is_none() && e.ev_update.is_none());
                prop_assert_eq!(e.delta_q, 0.0);
                prop_assert!(e.question_action.is_none());
            } else {
                let prev = &tr.exchanges[i - 1];
                let r = e.score.composite - prev.score.composite;
                prop_assert_eq!(e.reward, Some(r));
                let u = e.ev_update.unwrap();
                prop_assert_eq!(u.state, prev.state);
                prop_assert_eq!(Some(u.action), prev.next_action);
                prop_assert_eq!(e.question_action, prev.next_action);
                prop_assert_eq!(Some(&e.question), prev.next_question.as_ref());
                let cell = &mut shadow[u.state.index()][u.action.index()];
                prop_assert_eq!(u.before, *cell);
                *cell += alpha * (r - *cell);
                prop_assert!((u.after - *cell).abs() < 1e-15);
                *cell = u.after;
            }
            if e.t < 15 {
                let eps = e.epsilon.unwrap();
                prop_assert_eq!(eps, schedule.epsilon_at(e.t).unwrap());
                let row = e.ev_row.unwrap();
                prop_assert_eq!(row, shadow[e.state.index()]);
                let a = e.next_action.unwrap();
                if e.explored == Some(false) {
                    prop_assert_eq!(a.index(), argmax_lowest(&row));
                }
                prop_assert!(e.next_question.as_deref().is_some_and(|q| !q.is_empty()));
                prop_assert!(e.baseline_weights.is_none());
            } else {
                prop_assert!(e.next_action.is_none() && e.epsilon.is_none() && e.explored.is_none());
                prop_assert!(e.next_question.is_none() && e.ev_row.is_none());
            }
        }
        prop_assert_eq!(engine().prior(), &prior);

        // determinism
        let again = engine().replay("s", config, &responses).unwrap();
        prop_assert_eq!(tr, again);
    }

    #[test]
    fn baseline_sessions_never_learn(seed in any::<u64>(), picks in prop::collection::vec(0usize..RESPONSES.len(), 15)) {
        let config = SessionConfig { seed, policy: PolicyKind::historical_baseline(), ..SessionConfig::default() };
        let responses: Vec<&str> = picks.iter().map(|i| RESPONSES[*i]).collect();
        let tr = engine().replay("b", config, &responses).unwrap();
        for e in &tr.exchanges {
            prop_assert!(e.ev_update.is_none() && e.ev_row.is_none() && e.epsilon.is_none());
            if e.t < 15 {
                prop_assert_eq!(e.baseline_weights, Some([0.623, 0.236, 0.128, 0.009, 0.004]));
            }
        }
    }
}

#[test]
fn sessions_close_at_the_horizon() {
    let mut s = engine().start_session("h", SessionConfig::default()).unwrap();
    for i in 0..15 {
        let out = engine().step(&mut s, RESPONSES[i % RESPONSES.len()]).unwrap();
        assert_eq!(out.status == SessionStatus::Completed, i == 14);
    }
    assert!(matches!(engine().step(&mut s, "more"), Err(Error::SessionClosed { .. })));
    let tr = engine().end_session(&mut s);
    assert_eq!(tr.status, SessionStatus::Completed);
    assert!(s.table().is_none());
}

#[test]
fn early_exit_keeps_partial_transcript() {
    let mut s = engine().start_session("q", SessionConfig::default()).unwrap();
    engine().step(&mut s, RESPONSES[2]).unwrap();
    engine().step(&mut s, RESPONSES[3]).unwrap();
    let tr = engine().end_session(&mut s);
    assert_eq!(tr.status, SessionStatus::Terminated);
    assert_eq!(tr.exchanges.len(), 2);
    assert_eq!(engine().end_session(&mut s), tr);
}

#[test]
fn concurrent_sessions_are_isolated() {
    let solo = engine().replay("a", SessionConfig { seed: 5, ..SessionConfig::default() }, &[RESPONSES[0]; 15]).unwrap();
    let mut a = engine().start_session("a", SessionConfig { seed: 5, ..SessionConfig::default() }).unwrap();
    let mut b = engine().start_session("b", SessionConfig { seed: 6, ..SessionConfig::default() }).unwrap();
    for i in 0..15 {
        engine().step(&mut a, RESPONSES[0]).unwrap();
        engine().step(&mut b, RESPONSES[(i * 3) % RESPONSES.len()]).unwrap();
    }
    assert_eq!(engine().end_session(&mut a).exchanges, solo.exchanges);
}

#[test]
fn follow_up_questions_follow_the_chosen_action() {
    use survey_core::actions::{classify_question, KeywordClassifier};
    let tr = engine()
        .replay("k", SessionConfig { seed: 11, schedule: EpsilonSchedule::fixed(1.0).unwrap(), ..SessionConfig::default() }, &[RESPONSES[5]; 15])
        .unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for e in &tr.exchanges[..14] {
        let a = e.next_action.unwrap();
        let label = classify_question(e.next_question.as_ref().unwrap(), &KeywordClassifier).unwrap();
        assert_eq!(label.primary, a, "{:?}", e.next_question);
        seen.insert(a);
    }
    assert!(seen.len() >= 3);
}
