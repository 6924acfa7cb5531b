//! Prepares a Bell-like state and watches purity and <Z> decay as the
//! noise strength grows.

use quid_lab::noise::{amplitude_damping, NoiseModel};
use quid_lab::simcore::{DensityMatrix, GateOp};

fn main() -> quid_lab::Result<()> {
    let circuit = [GateOp::h(0), GateOp::cnot(0, 1), GateOp::rx(1, 0.7), GateOp::rz(0, 1.1)];

    println!("{:>6} {:>9} {:>10} {:>10} {:>10}", "p", "purity", "<Z0>", "<Z1>", "min eig");
    for p in [0.0, 0.01, 0.05, 0.1, 0.2, 0.5] {
        let model = NoiseModel::uniform(p)?;
        let mut rho = DensityMatrix::ground_state(2)?;
        for gate in &circuit {
            quid_lab::noise::noisy_apply_mut(&mut rho, gate, &model)?;
        }
        rho.validate()?;
        let z = rho.expect_z_all();
        println!(
            "{p:>6} {:>9.5} {:>10.5} {:>10.5} {:>10.2e}",
            rho.purity(),
            z[0],
            z[1],
            rho.min_eigenvalue()
        );
    }

    // Full damping sends any single-qubit state to |0>.
    let mut rho = DensityMatrix::ground_state(1)?;
    rho.apply_gate_mut(&GateOp::x(0))?;
    rho.apply_channel_mut(&amplitude_damping(1.0)?, &[0])?;
    println!("|1> after gamma=1 damping: <Z> = {}", rho.expect_z(0)?);
    Ok(())
}
