//! Trains one QNN on synthetic clusters and prints the learning curve.
//!
//! ```bash
//! cargo run --release -p quid-lab --example train_qnn -- 0.02   # with noise
//! ```

use quid_lab::experiment::{prepare, ExperimentConfig, NoiseSource};
use quid_lab::qnn::{load_checkpoint, save_checkpoint, train};

fn main() -> quid_lab::Result<()> {
    let noise: f64 = std::env::args().nth(1).map_or(0.0, |s| s.parse().expect("noise level"));
    let cfg = ExperimentConfig {
        epochs: 20,
        noise: if noise > 0.0 { NoiseSource::Uniform(noise) } else { NoiseSource::None },
        seed: 11,
        ..ExperimentConfig::default()
    };
    let prep = prepare(&cfg)?;
    let report = train(&prep.prototype, &prep.train, &prep.test, &cfg.train_config(cfg.seed))?;
    print!("{}", report.curves_csv());
    println!(
        "final test accuracy {:.3} after {:.1}s",
        report.final_accuracy().unwrap_or(f64::NAN),
        report.wall_clock.as_secs_f64()
    );

    let path = std::env::temp_dir().join("quid_example_model.json");
    save_checkpoint(&report.model, &path)?;
    assert_eq!(load_checkpoint(&path)?, report.model);
    println!("checkpoint written to {}", path.display());
    Ok(())
}
