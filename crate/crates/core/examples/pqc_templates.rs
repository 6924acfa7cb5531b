//! Builds the PQC presets, prints their parameter counts and optionally
//! writes their registry files.
//!
//! ```bash
//! cargo run -p quid-lab --example pqc_templates
//! cargo run -p quid-lab --example pqc_templates -- --write presets/
//! ```

use quid_lab::pqc::{apply_pqc, build_template, Preset};
use quid_lab::simcore::DensityMatrix;
use quid_lab::noise::NoiseModel;

fn main() -> quid_lab::Result<()> {
    let write_dir = std::env::args().skip_while(|a| a != "--write").nth(1);

    for preset in [Preset::Pqc1, Preset::Pqc6, Preset::Pqc8] {
        let tpl = build_template(preset, 4, 1)?;
        println!(
            "{preset}: {} gates, {} parameters on 4 qubits",
            tpl.gates().len(),
            tpl.param_count()
        );
        if let Some(dir) = &write_dir {
            let path = std::path::Path::new(dir).join(format!("{preset}_4q.json"));
            std::fs::write(&path, tpl.to_registry_json() + "\n")
                .map_err(|e| quid_lab::Error::Config(format!("{}: {e}", path.display())))?;
            println!("  wrote {}", path.display());
        }
    }

    // Unitary circuits keep the state pure; noisy ones do not.
    let tpl = build_template(Preset::Pqc8, 4, 1)?;
    let theta: Vec<f64> = (0..tpl.param_count()).map(|i| 0.3 * i as f64).collect();
    let mut rho = DensityMatrix::ground_state(4)?;
    for q in 0..4 {
        rho.apply_gate_mut(&quid_lab::simcore::GateOp::h(q))?;
    }
    let clean = apply_pqc(&rho, &tpl, &theta, None)?;
    let noisy = apply_pqc(&rho, &tpl, &theta, Some(&NoiseModel::uniform(0.05)?))?;
    println!("pqc8 purity: noiseless {:.6}, p=0.05 {:.6}", clean.purity(), noisy.purity());
    println!("pqc8 <Z>: noiseless {:?}", clean.expect_z_all());
    println!("pqc8 <Z>: p=0.05    {:?}", noisy.expect_z_all());
    Ok(())
}
