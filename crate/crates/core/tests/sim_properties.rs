use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use survey_core::actions::ActionType;
use survey_core::engine::{Engine, PolicyKind, SessionConfig, SessionStatus};
use survey_core::policy::{BaselinePolicy, EpsilonSchedule, EvTable, HISTORICAL_ACTION_WEIGHTS};
use survey_core::sim::{
    run_conversation, run_experiment, ExperimentDesign, PersonaUsers, Profile, ResponseProgram, ScriptedUser,
    SimulatedUser,
};

fn engine() -> &'static Engine {
    static E: OnceLock<Engine> = OnceLock::new();
    E.get_or_init(|| Engine::with_prior(EvTable::reference_prior()).unwrap())
}

/// Share of greedy decisions picking `best` among questions asked in
/// exchanges 11 to 15 (decided after responses 10 to 14).
fn late_exploitation_share(best: ActionType, conversations: u64, seed: u64) -> (usize, usize) {
    let (mut hit, mut total) = (0, 0);
    for i in 0..conversations {
        let config = SessionConfig {
            seed: seed.wrapping_add(i),
            schedule: EpsilonSchedule::fixed(0.30).unwrap(),
            ..SessionConfig::default()
        };
        let mut user = ScriptedUser::new(ResponseProgram::prefers(best), i);
        let (tr, err) = run_conversation(engine(), "learn", config, &mut user);
        assert!(err.is_none());
        for e in tr.exchanges.iter().filter(|e| (10..=14).contains(&e.t) && e.explored == Some(false)) {
            total += 1;
            hit += usize::from(e.next_action == Some(best));
        }
    }
    (hit, total)
}

#[test]
fn greedy_choices_converge_on_the_rewarding_action() {
    for best in ActionType::ALL {
        let (hit, total) = late_exploitation_share(best, 50, 1000);
        let share = hit as f64 / total as f64;
        assert!(total > 100, "{best}: only {total} greedy steps");
        assert!(share >= 0.60, "{best}: {hit}/{total} = {share:.3}");
    }
}

#[test]
fn baseline_sampler_frequencies() {
    let policy = BaselinePolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let mut counts = [0usize; 5];
    for _ in 0..n {
        counts[policy.sample(&mut rng).index()] += 1;
    }
    for (i, w) in HISTORICAL_ACTION_WEIGHTS.iter().enumerate() {
        let f = counts[i] as f64 / n as f64;
        assert!((f - w).abs() <= 0.015, "action {i}: {f} vs {w}");
    }
}

#[test]
fn baseline_ignores_state() {
    // very different respondents; the logged weights never change
    for program in [
        ResponseProgram::Constant { text: "ok".into() },
        ResponseProgram::prefers(ActionType::Specification),
        ResponseProgram::persona(Profile::EnglishSenior),
    ] {
        let config = SessionConfig { seed: 3, policy: PolicyKind::historical_baseline(), ..SessionConfig::default() };
        let mut user = ScriptedUser::new(program, 9);
        let (tr, _) = run_conversation(engine(), "base", config, &mut user);
        let logged: Vec<[f64; 5]> = tr.exchanges.iter().filter_map(|e| e.baseline_weights).collect();
        assert_eq!(logged.len(), 14);
        assert!(logged.iter().all(|w| *w == HISTORICAL_ACTION_WEIGHTS));
    }
}

#[test]
fn constant_responder_pulls_ev_to_zero() {
    let config = SessionConfig { seed: 8, alpha: 0.3, ..SessionConfig::default() };
    let mut user = ScriptedUser::new(ResponseProgram::Constant { text: "It was fine I guess.".into() }, 0);
    let (tr, _) = run_conversation(engine(), "const", config, &mut user);
    let q0 = tr.exchanges[0].score.composite;
    for e in &tr.exchanges[1..] {
        assert_eq!(e.score.composite, q0);
        assert_eq!(e.reward, Some(0.0));
        let u = e.ev_update.unwrap();
        assert!((u.after - 0.7 * u.before).abs() < 1e-15);
    }
}

#[test]
fn alternating_responder_rewards_alternate_in_sign() {
    let program = ResponseProgram::Alternating {
        first: survey_core::sim::RICH_RESPONSE.into(),
        second: "no".into(),
    };
    let mut user = ScriptedUser::new(program, 0);
    let (tr, _) = run_conversation(engine(), "alt", SessionConfig::default(), &mut user);
    for e in &tr.exchanges[1..] {
        let r = e.reward.unwrap();
        if e.t % 2 == 0 {
            assert!(r < 0.0);
        } else {
            assert!(r > 0.0);
        }
    }
}

#[test]
fn report_matches_transcripts() {
    let design = ExperimentDesign { reps: 2, seed: 42, workers: 3, ..ExperimentDesign::default() };
    let result = run_experiment(engine(), &design, &PersonaUsers).unwrap();
    assert_eq!(result.conversations.len(), 32);

    // independent recomputation of ΔQ mean and sample sd per condition
    for summary in &result.report.conditions {
        let deltas: Vec<f64> = result
            .conversations
            .iter()
            .filter(|c| c.condition == summary.name && c.is_complete())
            .map(|c| {
                let q = c.transcript.qualities();
                q[q.len() - 1] - q[0]
            })
            .collect();
        let n = deltas.len() as f64;
        let m = deltas.iter().sum::<f64>() / n;
        let sd = (deltas.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (n - 1.0)).sqrt();
        assert_eq!(summary.delta_q.n, deltas.len());
        assert!((summary.delta_q.mean - m).abs() < 1e-12);
        assert!((summary.delta_q.sd - sd).abs() < 1e-12);
        let total: usize = summary.action_counts.iter().sum();
        assert_eq!(total, deltas.len() * 14);
    }

    // the same students meet every condition
    for c in &result.conversations {
        let twin = result.conversations.iter().find(|o| o.profile == c.profile && o.rep == c.rep).unwrap();
        assert_eq!(c.user_seed, twin.user_seed);
    }

    // worker count does not change anything
    let serial = run_experiment(engine(), &ExperimentDesign { workers: 1, ..design.clone() }, &PersonaUsers).unwrap();
    assert_eq!(serial, result);
}

struct Broken;
impl SimulatedUser for Broken {
    fn respond(&mut self, _: &str, _: Option<ActionType>, t: u32) -> survey_core::Result<String> {
        if t < 4 {
            Ok("I like my dorm".into())
        } else {
            Err(survey_core::Error::Llm("respondent unavailable".into()))
        }
    }
}

#[test]
fn failed_conversations_are_kept_but_excluded() {
    let design = ExperimentDesign { reps: 1, profiles: vec![Profile::CsSophomore], ..ExperimentDesign::default() };
    let factory = |_: &Profile, _: u64| -> Box<dyn SimulatedUser> { Box::new(Broken) };
    let result = run_experiment(engine(), &design, &factory).unwrap();
    for c in &result.conversations {
        assert!(!c.is_complete());
        assert_eq!(c.transcript.status, SessionStatus::Terminated);
        assert_eq!(c.transcript.exchanges.len(), 3);
    }
    for s in &result.report.conditions {
        assert_eq!(s.n_complete, 0);
        assert_eq!(s.incomplete.len(), 1);
    }
}
