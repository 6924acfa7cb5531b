//! Loads a per-gate noise model from JSON and compares it with the uniform
//! model on the same encoded sample.
//!
//! ```bash
//! cargo run -p quid-lab --example noise_model_file -- my_noise.json
//! ```
//! Without an argument a built-in model is used.

use std::path::Path;

use quid_lab::encode::{encode, EncoderConfig};
use quid_lab::noise::NoiseModel;

const BUILTIN: &str = r#"{
  "default": [["depolarizing", 0.01]],
  "cnot": [["depolarizing", 0.05], ["amplitude_damping", 0.02]],
  "crx": [["depolarizing", 0.05]]
}"#;

fn main() -> quid_lab::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => NoiseModel::load(path)?,
        None => NoiseModel::from_json_str(BUILTIN, Path::new("<builtin>"))?,
    };
    println!("{}", serde_json::to_string_pretty(&model.to_json()).unwrap());

    let cfg = EncoderConfig::angle_for_dim(3, 6);
    let x = [0.4, 2.9, 1.3, 0.2, 2.2, 1.7];
    let clean = encode(&x, &cfg, None)?;
    let filed = encode(&x, &cfg, Some(&model))?;
    let uniform = encode(&x, &cfg, Some(&NoiseModel::uniform(0.01)?))?;
    for (name, rho) in [("noiseless", &clean), ("from file", &filed), ("uniform 0.01", &uniform)] {
        println!("{name:>13}: purity {:.5}, <Z> {:?}", rho.purity(), rho.expect_z_all());
    }

    // Malformed files report the offending line.
    let bad = "{\n  \"default\": [[\"depolarizing\", 0.01]],\n  \"cnot\": [[\"bitflip\", 0.1]]\n}";
    if let Err(e) = NoiseModel::from_json_str(bad, Path::new("bad.json")) {
        println!("rejected: {e}");
    }
    Ok(())
}
