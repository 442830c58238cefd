//! The file-based pipeline end to end: a simulated scenario is written as a
//! sequence directory, loaded back through its manifest, tracked with every
//! variant and scored against the annotation file.
//!
//! cargo run --release --example sequence_pipeline

use groundtrack::evaluation::PrecisionMode;
use groundtrack::io::{load_sequence, load_track_record, save_scenario, save_track_record, EvalReport};
use groundtrack::simulator::{generate_scenario, prepare_scenario, EpisodeConfig, ScenarioConfig};
use groundtrack::tracker::Variant;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let seed = 21;
    let scenario = generate_scenario(&ScenarioConfig::benchmark(seed), seed).unwrap();
    let episode = EpisodeConfig::default();
    let prepared = prepare_scenario(&scenario, &episode).unwrap();
    let manifest = save_scenario(&scenario, &prepared, dir.path()).unwrap();
    println!("sequence written to {}", dir.path().display());

    let seq = load_sequence(&manifest).unwrap();
    println!("{}: {} frames, objects {:?}", seq.manifest.sequence_id, seq.contexts.len(), seq.object_ids());
    for v in Variant::ALL {
        let records: Vec<_> = (0..3)
            .map(|run| {
                let r = seq.track(0, v, &episode, 1, run).unwrap();
                let path = dir.path().join(format!("record_{}_0_{run}.csv", v.name()));
                save_track_record(&r, &path).unwrap();
                load_track_record(&path).unwrap()
            })
            .collect();
        let report = EvalReport::build(&records, &seq.annotations, PrecisionMode::BothPresent).unwrap();
        println!("{v}: f_final {:.3}, std {:.3}", report.summary.f_final, report.summary.std);
    }
}
