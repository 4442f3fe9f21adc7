use proptest::prelude::*;

use laip::baselines::run_baseline;
use laip::engine::prompts::restaurants_system;
use laip::engine::{
    oracle_script, posterior_update_indicator, posterior_update_math, restaurant_steps, EngineSettings, Prompter,
    ScriptOptions,
};
use laip::env::{load_trajectory, trajectory_ids};
use laip::{Distribution, Engine, HypothesisSet, LikelihoodMatrix, Mode, RoomGraph, UpdateMode};

fn simplex(k: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.01f64..1.0, k).prop_map(|w| Distribution::from_weights(w).unwrap())
}

fn instance() -> impl Strategy<Value = (Distribution, LikelihoodMatrix, usize)> {
    (2usize..10, 1usize..6).prop_flat_map(|(n, k)| {
        (
            simplex(n),
            prop::collection::vec(simplex(k), n),
            0..k,
        )
            .prop_map(move |(prior, rows, a)| {
                let m = LikelihoodMatrix::new((0..k).map(|j| format!("a{j}")).collect(), rows).unwrap();
                (prior, m, a)
            })
    })
}

proptest! {
    #[test]
    fn permuting_hypotheses_permutes_the_posterior((prior, m, a) in instance(), seed in any::<u64>()) {
        let n = prior.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let post = posterior_update_indicator(&prior, &m, a).unwrap();
        let p2 = Distribution::new(perm.iter().map(|&i| prior.probs()[i]).collect()).unwrap();
        let m2 = LikelihoodMatrix::new(m.actions.clone(), perm.iter().map(|&i| m.rows[i].clone()).collect()).unwrap();
        let post2 = posterior_update_indicator(&p2, &m2, a).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert!((post2.probs()[j] - post.probs()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn posterior_is_a_simplex((prior, m, _a) in instance(), w in simplex(5)) {
        let k = m.actions.len();
        let weights = Distribution::from_weights(w.probs()[..k].to_vec()).unwrap();
        let post = posterior_update_math(&prior, &m, &weights).unwrap();
        prop_assert_eq!(post.len(), prior.len());
        prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(post.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn common_scale_at_the_observed_column_cancels((prior, m, a) in instance(), c in 0.01f64..1.0) {
        // scaling P(a | h) by c for every h
        let post = posterior_update_indicator(&prior, &m, a).unwrap();
        let w: Vec<f64> = prior.probs().iter().zip(&m.rows).map(|(p, r)| p * c * r.probs()[a]).collect();
        let scaled = Distribution::from_weights(w).unwrap();
        prop_assert!(post.max_abs_diff(&scaled) < 1e-12);
    }
}

#[test]
fn baselines_share_hypotheses_and_actions_with_laip() {
    let g = RoomGraph::food_court();
    let hyps = HypothesisSet::orderings(&g);
    let prior = Distribution::uniform(hyps.len()).unwrap();
    let prompter = Prompter::new(EngineSettings::default(), Some(restaurants_system(&g)));
    for id in trajectory_ids() {
        let traj = load_trajectory(&id).unwrap();
        let steps = restaurant_steps(&g, &traj).unwrap();
        let full = oracle_script(&prompter, &g, &traj, &hyps, &prior, &ScriptOptions::default()).unwrap();
        let laip = Engine::new(&full, prompter.clone()).run_trajectory(&steps, &hyps, &prior, UpdateMode::Math);
        for mode in [Mode::LaipSingleCot, Mode::GenericCot, Mode::ZeroShot] {
            let opts = ScriptOptions { mode, ..Default::default() };
            let script = oracle_script(&prompter, &g, &traj, &hyps, &prior, &opts).unwrap();
            let engine = Engine::new(&script, prompter.clone());
            let out = run_baseline(&engine, mode.baseline().unwrap(), &steps, &hyps, &prior);
            assert!(out.is_complete(), "{id} {mode}");
            assert_eq!(out.steps.len(), laip.steps.len());
            for (b, l) in out.steps.iter().zip(&laip.steps) {
                assert_eq!(b.actions, l.actions);
                assert_eq!(b.observed, l.observed);
                assert_eq!(b.state_context, l.state_context);
                assert_eq!(b.posterior.len(), hyps.len());
                assert!((b.posterior.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn lcp_records_drift_from_the_math_posterior() {
    let g = RoomGraph::food_court();
    let hyps = HypothesisSet::orderings(&g);
    let prior = Distribution::uniform(hyps.len()).unwrap();
    let prompter = Prompter::new(EngineSettings::default(), Some(restaurants_system(&g)));
    let traj = load_trajectory("t3").unwrap();
    let steps = restaurant_steps(&g, &traj).unwrap();
    let opts = ScriptOptions { mode: Mode::LaipLcp, ..Default::default() };
    let script = oracle_script(&prompter, &g, &traj, &hyps, &prior, &opts).unwrap();
    let out = Engine::new(&script, prompter).run_trajectory(&steps, &hyps, &prior, UpdateMode::Llm);
    assert!(out.is_complete());
    for s in &out.steps {
        let math = s.math_posterior.as_ref().unwrap();
        let drift = s.llm_posterior_error.unwrap();
        assert!((drift - s.posterior.max_abs_diff(math)).abs() < 1e-15);
        assert!(drift < 1e-2);
    }
}
