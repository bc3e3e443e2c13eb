use std::fs;

use roomforge::backend::MockBackend;
use roomforge::config::PipelineConfig;
use roomforge::constraints::validate;
use roomforge::dataset::{Dataset, Provenance};
use roomforge::pipeline::{read_report, summarize_rounds, Pipeline, PipelineError, REPORT_FILE};
use roomforge::synth;

fn seeded_pipeline(dir: &std::path::Path, seed: u64) -> Pipeline {
    let config = PipelineConfig {
        seed,
        gen_per_round: 40,
        ..Default::default()
    };
    let mut p = Pipeline::init(dir, synth::two_pattern_rooms(20, 1), config).unwrap();
    p.augment().unwrap();
    p
}

#[test]
fn stage2_rounds_keep_their_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = seeded_pipeline(dir.path(), 3);
    let mut size = p.dataset().len();
    for round in 1..=5 {
        let stats = p.stage2_round(&MockBackend::new()).unwrap();
        assert_eq!(stats.round_index, round);
        assert_eq!(stats.n_generated, 40);
        assert!(stats.n_parsed <= stats.n_generated);
        assert!(stats.n_playable <= stats.n_parsed && stats.n_novel <= stats.n_parsed);
        assert!(stats.n_playable_novel <= stats.n_playable.min(stats.n_novel));
        assert!(stats.n_added <= stats.n_playable_novel);
        assert!((0.0..=1.0).contains(&stats.mean_accuracy));
        assert_eq!(p.dataset().len(), size + stats.n_added);
        size = p.dataset().len();
    }
    let rows = read_report(dir.path()).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(p.state().stage2_rounds, 5);
    for e in p.dataset().entries().iter().filter(|e| e.provenance == Provenance::Generated) {
        assert!(validate(&e.grid).passed());
        assert!((1..=5).contains(&e.round_added));
    }
}

#[test]
fn a_reopened_dataset_continues_where_it_stopped() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = seeded_pipeline(dir.path(), 9);
    p.run_stage2(&MockBackend::new(), 2).unwrap();
    drop(p);
    let mut p = Pipeline::open(dir.path()).unwrap();
    let stats = p.stage2_round(&MockBackend::new()).unwrap();
    assert_eq!(stats.round_index, 3);
    drop(p);
    let reloaded = Dataset::load(dir.path()).unwrap();
    assert_eq!(reloaded.config.seed, 9);
    assert_eq!(read_report(dir.path()).unwrap().len(), 3);
}

#[test]
fn seeds_share_the_dataset_but_not_the_samples() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut pa = seeded_pipeline(a.path(), 1);
    let mut pb = seeded_pipeline(b.path(), 2);
    assert_eq!(pa.dataset().entries(), pb.dataset().entries());
    pa.run_stage2(&MockBackend::new(), 1).unwrap();
    pb.run_stage2(&MockBackend::new(), 1).unwrap();
    let ra = fs::read_to_string(a.path().join(REPORT_FILE)).unwrap();
    let rb = fs::read_to_string(b.path().join(REPORT_FILE)).unwrap();
    assert_ne!(ra, rb);

    let mut rows = read_report(a.path()).unwrap();
    rows.extend(read_report(b.path()).unwrap());
    let summary = summarize_rounds(&rows);
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0].runs, 2);
}

#[test]
fn corrupt_state_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    drop(seeded_pipeline(dir.path(), 0));
    fs::write(dir.path().join("state.json"), "{ nope").unwrap();
    assert!(matches!(Pipeline::open(dir.path()), Err(PipelineError::StateCorrupt { .. })));
}
