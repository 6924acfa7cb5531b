//! Poisons a dataset with QUID and with random flips at the same budget and
//! shows where the flipped labels go.

use quid_lab::data::{synth_clusters, FeatureScaler, SynthSpec};
use quid_lab::encode::EncoderConfig;
use quid_lab::poison::{poison, AttackMode, PoisonSpec};

fn main() -> quid_lab::Result<()> {
    let raw = synth_clusters(&SynthSpec::new(4, 8, 50, 0.3, 2))?;
    let enc = EncoderConfig::angle_for_dim(4, raw.dim());
    let ds = FeatureScaler::fit(raw.features(), enc.scale_range)?.transform_dataset(&raw);
    let k = ds.class_count();

    for mode in [AttackMode::Quid, AttackMode::RandomFlip] {
        let out = poison(&ds, &PoisonSpec::new(mode, 0.3, 9), &enc)?;
        // transitions[old][new]
        let mut transitions = vec![vec![0usize; k]; k];
        for c in &out.changes {
            transitions[c.old_label][c.new_label] += 1;
        }
        println!("{mode}: {} of {} poisoned rows changed label", out.flipped(), out.poisoned_indices.len());
        for (old, row) in transitions.iter().enumerate() {
            println!("  {old} -> {row:?}");
        }
    }
    Ok(())
}
