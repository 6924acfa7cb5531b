//! Partition-and-vote defense against QUID, compared with an undefended model.

use quid_lab::defense::{partition, vote};
use quid_lab::experiment::{run_defense, ExperimentConfig};
use quid_lab::poison::AttackMode;

fn main() -> quid_lab::Result<()> {
    let parts = partition(10, 3, 4)?;
    println!("10 samples over 3 members: {parts:?}");
    println!("vote of [2, 0, 2, 1]: {}", vote(&[2, 0, 2, 1], 3)?);

    let cfg = ExperimentConfig {
        epochs: 15,
        epsilons: vec![0.3, 0.5],
        modes: vec![AttackMode::Quid],
        defense_k: 5,
        seed: 3,
        ..ExperimentConfig::default()
    };
    let res = run_defense(&cfg)?;
    print!("{}", res.table_csv());
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
