use astprobe::probe::{eval_spearman, train_probe, ProbeConfig, ProbeExample, ProbeModel};
use astprobe::synth::PlantedInstance;

fn planted_corpus(count: usize, seed: u64) -> (Vec<ProbeExample>, usize) {
    let max_n = 50;
    let dim = 2 * max_n - 2;
    let examples = (0..count as u64)
        .map(|k| {
            let n = 5 + (k as usize * 7 + seed as usize) % (max_n - 4);
            let inst = PlantedInstance::generate(n, seed * 10_000 + k, Some(dim)).unwrap();
            ProbeExample::new(format!("t{k}"), inst.embeddings, inst.distances).unwrap()
        })
        .collect();
    (examples, dim)
}

#[test]
fn identity_probe_is_exact() {
    let (examples, dim) = planted_corpus(60, 1);
    let report = eval_spearman(&ProbeModel::identity(dim, 0), &examples).unwrap();
    assert_eq!(report.dspr, Some(1.0));
}

#[test]
fn trained_probe_recovers_planted_distances() {
    let (examples, dim) = planted_corpus(200, 2);
    let config = ProbeConfig { rank: dim, ..Default::default() };
    let trained = train_probe(&examples, &config, 0).unwrap();
    let report = eval_spearman(&trained.model, &examples).unwrap();
    eprintln!("dspr {:?} init {} best {} epochs {}", report.dspr, trained.initial_dev_loss, trained.best_dev_loss, trained.history.len());
    assert!(report.dspr.unwrap() >= 0.95);
}
