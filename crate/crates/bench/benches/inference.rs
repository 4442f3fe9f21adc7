use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use laip::engine::prompts::restaurants_system;
use laip::engine::{oracle_script, restaurant_steps, EngineSettings, Prompter, ScriptOptions};
use laip::env::{load_trajectory, trajectory_ids};
use laip::metrics::{hellinger, jsd, pearson_r, spearman_rho};
use laip::oracle::{default_posterior, optimal_posterior};
use laip::{Distribution, Engine, HypothesisSet, NoiseParam, PreferenceOrdering, RoomGraph, UpdateMode};

fn random_simplex(rng: &mut StdRng, k: usize) -> Distribution {
    Distribution::from_weights((0..k).map(|_| rng.gen::<f64>() + 1e-9).collect()).unwrap()
}

fn oracle(c: &mut Criterion) {
    let graph = RoomGraph::food_court();
    let orderings = PreferenceOrdering::all(&graph);
    let prior = Distribution::uniform(orderings.len()).unwrap();
    let trajs: Vec<_> = trajectory_ids().iter().map(|id| load_trajectory(id).unwrap()).collect();

    c.bench_function("optimal_posterior/corpus", |b| {
        b.iter(|| {
            for t in &trajs {
                black_box(optimal_posterior(&graph, t, &orderings, &prior, NoiseParam::default()).unwrap());
            }
        })
    });
    let study1 = load_trajectory("study1-closed").unwrap();
    c.bench_function("default_posterior/study1-closed", |b| {
        b.iter(|| black_box(default_posterior(&graph, black_box(&study1)).unwrap()))
    });
}

fn metrics(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(7);
    let mut group = c.benchmark_group("metrics");
    for k in [6, 20, 120] {
        let p = random_simplex(&mut rng, k);
        let q = random_simplex(&mut rng, k);
        group.bench_with_input(BenchmarkId::new("jsd", k), &k, |b, _| b.iter(|| jsd(&p, &q).unwrap()));
        group.bench_with_input(BenchmarkId::new("hellinger", k), &k, |b, _| {
            b.iter(|| hellinger(&p, &q).unwrap())
        });
    }
    let x: Vec<f64> = (0..60).map(|_| rng.gen()).collect();
    let y: Vec<f64> = (0..60).map(|_| rng.gen()).collect();
    group.bench_function("pearson/60", |b| b.iter(|| pearson_r(&x, &y).unwrap()));
    group.bench_function("spearman/60", |b| b.iter(|| spearman_rho(&x, &y).unwrap()));
    group.finish();
}

fn engine(c: &mut Criterion) {
    let graph = RoomGraph::food_court();
    let hyps = HypothesisSet::orderings(&graph);
    let prior = Distribution::uniform(hyps.len()).unwrap();
    let mut group = c.benchmark_group("engine");
    for id in ["study1-closed", "t1"] {
        let traj = load_trajectory(id).unwrap();
        let inputs = restaurant_steps(&graph, &traj).unwrap();
        for parallel in [false, true] {
            let settings = EngineSettings {
                parallel,
                ..EngineSettings::default()
            };
            let prompter = Prompter::new(settings, Some(restaurants_system(&graph)));
            let script =
                oracle_script(&prompter, &graph, &traj, &hyps, &prior, &ScriptOptions::default()).unwrap();
            let name = if parallel { "laip-full-par" } else { "laip-full-seq" };
            group.bench_function(BenchmarkId::new(name, id), |b| {
                b.iter(|| {
                    let engine = Engine::new(&script, prompter.clone());
                    black_box(engine.run_trajectory(&inputs, &hyps, &prior, UpdateMode::Math))
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, oracle, metrics, engine);
criterion_main!(benches);
