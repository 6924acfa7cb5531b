//! Test accuracy against poisoning ratio for random flips and QUID.
//!
//! ```bash
//! cargo run --release -p quid-lab --example poison_ratio_sweep
//! ```

use quid_lab::experiment::{run_experiment, ExperimentConfig};
use quid_lab::poison::AttackMode;

fn main() -> quid_lab::Result<()> {
    let cfg = ExperimentConfig {
        epochs: 15,
        epsilons: vec![0.0, 0.1, 0.3, 0.5, 0.7],
        seed: 1,
        ..ExperimentConfig::default()
    };
    let results = run_experiment(&cfg)?;
    println!("{:>5} {:>12} {:>8}", "eps", "random_flip", "quid");
    for &eps in &cfg.epsilons {
        let get = |mode| {
            let m = if eps == 0.0 { None } else { Some(mode) };
            results.accuracy(eps, m).map_or("-".into(), |a| format!("{a:.3}"))
        };
        println!("{eps:>5} {:>12} {:>8}", get(AttackMode::RandomFlip), get(AttackMode::Quid));
    }
    println!("{:.1}s", results.wall_clock);
    Ok(())
}
