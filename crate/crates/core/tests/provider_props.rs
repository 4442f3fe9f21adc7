use std::sync::Arc;

use proptest::prelude::*;

use laip::provider::{
    parse_distribution, CachingBackend, ChatBackend, CompletionRequest, Message, ResponseCache, ScriptedBackend,
    PROBABILITY_FLOOR,
};

fn reply(values: &[f64]) -> String {
    let body: Vec<String> = values.iter().enumerate().map(|(i, v)| format!("{}: {v}", i + 1)).collect();
    format!("Here you go.\n{}", body.join("\n"))
}

proptest! {
    #[test]
    fn parsed_distributions_are_on_the_simplex(values in prop::collection::vec(0.0f64..5.0, 1..12)) {
        if let Ok(d) = parse_distribution(&reply(&values), values.len()) {
            prop_assert_eq!(d.len(), values.len());
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(d.probs().iter().all(|&p| p > 0.0 && p <= 1.0));
        }
    }

    #[test]
    fn floored_entries_stay_positive(k in 2usize..10, hot in 0usize..10) {
        let hot = hot % k;
        let values: Vec<f64> = (0..k).map(|i| if i == hot { 1.0 } else { 0.0 }).collect();
        let d = parse_distribution(&reply(&values), k).unwrap();
        prop_assert!(d.probs().iter().all(|&p| p >= PROBABILITY_FLOOR / 2.0));
        prop_assert_eq!(d.argmax(), hot);
    }
}

fn requests() -> Vec<CompletionRequest> {
    (0..40)
        .map(|i| {
            CompletionRequest::new("m", vec![Message::system("sys"), Message::user(format!("question {i}"))])
                .with_temperature(if i % 2 == 0 { 0.0 } else { 0.7 })
                .with_seed(Some(i as u64 % 3))
        })
        .collect()
}

#[test]
fn recorded_cache_replays_every_request_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let inner: Arc<dyn ChatBackend> = Arc::new(ScriptedBackend::from_fn("echo", |r| {
        Some(format!("answer to {}", r.messages[1].content))
    }));
    let recorder = CachingBackend::record(inner, Arc::new(ResponseCache::open(&path).unwrap()));
    let recorded: Vec<String> = requests().iter().map(|r| recorder.complete(r).unwrap().text).collect();
    drop(recorder);

    let replayer = CachingBackend::replay(Arc::new(ResponseCache::open(&path).unwrap()));
    for (r, text) in requests().iter().zip(&recorded) {
        let hit = replayer.complete(r).unwrap();
        assert!(hit.cache_hit);
        assert_eq!(&hit.text, text);
    }
    let unseen = CompletionRequest::new("m", vec![Message::user("never asked")]);
    assert!(replayer.complete(&unseen).is_err());
}

#[test]
fn digest_is_stable_and_ignores_the_token_budget() {
    let r = CompletionRequest::new("m", vec![Message::system("sys"), Message::user("hi")])
        .with_temperature(0.7)
        .with_seed(Some(3));
    assert_eq!(r.digest(), "b739134f455d7ccbf4298ce7e316ecd0f37e09c72a7be96b465977a26d45dbd6");
    assert_eq!(r.digest(), r.clone().with_max_tokens(9).digest());
    assert_ne!(r.digest(), r.clone().with_seed(None).digest());
}
