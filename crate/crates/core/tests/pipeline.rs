use quid_lab::data::SynthSpec;
use quid_lab::experiment::{run_defense, DatasetSource, ExperimentConfig, DEFAULT_SPREAD};

#[test]
fn three_member_ensemble_on_clean_data() {
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Synth(SynthSpec::new(4, 8, 250, DEFAULT_SPREAD, 21)),
        seed: 21,
        epsilons: vec![0.0],
        defense_k: 3,
        ..ExperimentConfig::default()
    };
    let res = run_defense(&cfg).unwrap();
    let row = &res.rows[0];
    assert!(row.defense >= 0.85, "ensemble accuracy {}", row.defense);
    assert!((row.defense - row.no_defense).abs() <= 0.10, "{row:?}");
    assert!(res.warnings.is_empty(), "{:?}", res.warnings);
}
