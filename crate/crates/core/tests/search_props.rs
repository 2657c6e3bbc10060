mod common;

use bnet::scoring::network_score;
use bnet::search::hill_climb;
use bnet::{ArcConstraints, ScoreSpec, SearchConfig};
use common::{
    forward_sample, is_local_optimum, random_dataset, recovery_network,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn schemas(codes: &[&str], cards: &[usize]) -> Vec<bnet::VariableSchema> {
    codes
        .iter()
        .zip(cards)
        .map(|(c, &r)| {
            let levels: Vec<String> = (0..r).map(|k| k.to_string()).collect();
            bnet::VariableSchema::new(*c, *c, levels).unwrap()
        })
        .collect()
}

#[test]
fn search_is_deterministic() {
    let codes = ["A", "B", "C", "D", "E"];
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let data = random_dataset(&mut rng, schemas(&codes, &[2, 2, 3, 2, 2]), 300);
    let none = ArcConstraints::default();
    let cfg = SearchConfig::default();

    let a = hill_climb(&data, ScoreSpec::Bic, &none, &cfg).unwrap();
    let b = hill_climb(&data, ScoreSpec::Bic, &none, &cfg).unwrap();
    assert_eq!(a.dag, b.dag);
    assert_eq!(a.score.to_bits(), b.score.to_bits());
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.text(), b.text());
}

#[test]
fn search_result_is_a_local_optimum() {
    let codes = ["A", "B", "C", "D"];
    let mut rng = ChaCha20Rng::seed_from_u64(32);
    let none = ArcConstraints::default();
    let cfg = SearchConfig::default();
    for _ in 0..10 {
        let data = random_dataset(&mut rng, schemas(&codes, &[2, 3, 2, 2]), 250);
        for spec in [ScoreSpec::Bic, ScoreSpec::Aic, ScoreSpec::Bdeu { iss: 10.0 }] {
            let report = hill_climb(&data, spec, &none, &cfg).unwrap();
            assert!(
                is_local_optimum(&data, spec, &none, &report.dag, cfg.eps),
                "an improving move survived under {spec:?}"
            );
            let direct = network_score(&data, &report.dag, &spec).unwrap();
            assert!((report.score - direct).abs() < 1e-9 * direct.abs().max(1.0));
        }
    }
}

#[test]
fn trace_deltas_replay_to_the_final_score() {
    let codes = ["A", "B", "C", "D", "E"];
    let mut rng = ChaCha20Rng::seed_from_u64(33);
    let data = random_dataset(&mut rng, schemas(&codes, &[2, 2, 2, 3, 2]), 400);
    let none = ArcConstraints::default();
    let report = hill_climb(&data, ScoreSpec::Aic, &none, &SearchConfig::default()).unwrap();

    let empty = bnet::Dag::new(codes).unwrap();
    let start = network_score(&data, &empty, &ScoreSpec::Aic).unwrap();
    let replayed: f64 = start + report.trace.iter().map(|(_, d)| d).sum::<f64>();
    assert!(
        (replayed - report.score).abs() < 1e-9 * report.score.abs().max(1.0),
        "{replayed} vs {}",
        report.score
    );
    assert_eq!(report.iterations, report.trace.len());
    for (_, delta) in &report.trace {
        assert!(*delta > 0.0, "non improving move recorded");
    }
}

#[test]
fn constraints_are_respected() {
    let mut rng = ChaCha20Rng::seed_from_u64(34);
    let cfg = SearchConfig::default();

    for _ in 0..10 {
        let net = recovery_network();
        let data = forward_sample(&mut rng, &net, 500);
        let data = data.select(&["A", "B", "C", "D"]).unwrap();

        let black = [("A", "B"), ("B", "A")];
        let white = [("C", "D")];
        let constraints = ArcConstraints::new(&black, &white).unwrap();
        let report = hill_climb(&data, ScoreSpec::Bic, &constraints, &cfg).unwrap();

        assert!(!report.dag.has_arc("A", "B"));
        assert!(!report.dag.has_arc("B", "A"));
        assert!(report.dag.has_arc("C", "D"));
    }
}

#[test]
fn max_iter_caps_the_move_count() {
    let mut rng = ChaCha20Rng::seed_from_u64(35);
    let net = recovery_network();
    let data = forward_sample(&mut rng, &net, 2000);
    let none = ArcConstraints::default();

    let capped = SearchConfig { max_iter: 2, ..SearchConfig::default() };
    let report = hill_climb(&data, ScoreSpec::Bic, &none, &capped).unwrap();
    assert!(report.iterations <= 2);
    assert!(report.dag.arc_count() <= 2);

    let free = hill_climb(&data, ScoreSpec::Bic, &none, &SearchConfig::default()).unwrap();
    assert!(free.score >= report.score);
}

#[test]
fn report_text_carries_the_learning_statistics() {
    let mut rng = ChaCha20Rng::seed_from_u64(36);
    let net = recovery_network();
    let data = forward_sample(&mut rng, &net, 1000);
    let none = ArcConstraints::default();
    let report = hill_climb(&data, ScoreSpec::Bic, &none, &SearchConfig::default()).unwrap();
    let text = report.text();

    assert!(text.contains("Bayesian network learned via Score-based methods"));
    assert!(text.contains("  model:"));
    assert!(text.contains("learning algorithm:"));
    assert!(text.contains("Hill-Climbing"));
    assert!(text.contains("BIC (disc.)"));
    assert!(text.contains("penalization coefficient:"));
    assert!(text.contains("optimized:"));
    assert!(text.contains("TRUE"));
    assert!(text.contains(&report.score_calls.to_string()));
    // n = 1000 rows: ln(1000)/2 rendered to six significant digits.
    assert!(text.contains("3.45388"), "coefficient missing in:\n{text}");
    for line in text.lines() {
        assert!(line.len() <= 80, "line too long: {line:?}");
    }
}

#[test]
fn whitelisted_arcs_survive_even_when_they_hurt_the_score() {
    // Independent variables: any arc between them loses BIC score, but
    // the whitelist pins one anyway.
    let codes = ["A", "B", "C"];
    let mut rng = ChaCha20Rng::seed_from_u64(37);
    let data = random_dataset(&mut rng, schemas(&codes, &[2, 2, 2]), 400);
    let constraints = ArcConstraints::new(&[], &[("A", "B")]).unwrap();
    let report =
        hill_climb(&data, ScoreSpec::Bic, &constraints, &SearchConfig::default()).unwrap();
    assert!(report.dag.has_arc("A", "B"));
}

#[test]
fn bdeu_search_uses_the_iss_in_its_report() {
    let mut rng = ChaCha20Rng::seed_from_u64(38);
    let net = recovery_network();
    let data = forward_sample(&mut rng, &net, 800);
    let none = ArcConstraints::default();
    let report = hill_climb(
        &data,
        ScoreSpec::Bdeu { iss: 10.0 },
        &none,
        &SearchConfig::default(),
    )
    .unwrap();
    let text = report.text();
    assert!(text.contains("graph prior:"));
    assert!(text.contains("Uniform"));
    assert!(text.contains("imaginary sample size:"));
    assert!(text.contains("10"));
    assert!(!text.contains("penalization coefficient:"));
}
