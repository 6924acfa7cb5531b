use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::{
    GateOp, KrausChannel, LocalOp, HERMITIAN_TOL, MAX_QUBITS, PSD_TOL, TRACE_TOL,
};
use crate::error::{Error, Result};
use crate::seed;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A 2^n × 2^n density matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<Complex64>,
}

fn check_capacity(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Capacity {
            requested: n_qubits,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

impl DensityMatrix {
    /// |0…0⟩⟨0…0|
    pub fn ground_state(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        data[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, data })
    }

    /// I / 2^n
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        let w = 1.0 / dim as f64;
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(w, 0.0);
        }
        Ok(Self { n_qubits, data })
    }

    /// |ψ⟩⟨ψ| for the normalized version of `amplitudes`.
    pub fn from_pure_state(amplitudes: &[Complex64]) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::Shape(format!(
                "state vector length {dim} is not a power of two ≥ 2"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_capacity(n_qubits)?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate("state vector has zero or non-finite norm".into()));
        }
        let psi: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let mut data = vec![ZERO; dim * dim];
        for (i, a) in psi.iter().enumerate() {
            for (j, b) in psi.iter().enumerate() {
                data[i * dim + j] = a * b.conj();
            }
        }
        Ok(Self { n_qubits, data })
    }

    /// Wraps a raw row-major matrix. Only the shape is checked; call
    /// [`DensityMatrix::validate`] to check the physical invariants.
    pub fn from_raw(n_qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        if data.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{n_qubits}-qubit density matrix needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { n_qubits, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    /// Tr(ρ²), computed as Σ|ρ_ij|² which equals Tr(ρ ρ†) for Hermitian ρ.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let d = (self.data[i * dim + j] - self.data[j * dim + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let dim = self.dim();
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            (self.data[i * dim + j] + self.data[j * dim + i].conj()) * 0.5
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Checks unit trace, Hermiticity and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Numerical(format!("trace {tr} is not 1")));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::Numerical(format!("not Hermitian (error {herm:e})")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::Numerical(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Index {
                index: q,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    pub fn apply_gate(&self, gate: &GateOp) -> Result<Self> {
        let mut out = self.clone();
        out.apply_gate_mut(gate)?;
        Ok(out)
    }

    /// ρ ← U ρ U† with U lifted to the full register.
    pub fn apply_gate_mut(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate_for(self.n_qubits)?;
        gate.matrix()
            .conjugate(&mut self.data, self.n_qubits, gate.targets());
        Ok(())
    }

    /// ρ ← K ρ K† for an arbitrary (not necessarily unitary) local operator.
    pub fn apply_local_mut(&mut self, op: &LocalOp, targets: &[usize]) -> Result<()> {
        self.check_targets(op.arity(), targets)?;
        op.conjugate(&mut self.data, self.n_qubits, targets);
        Ok(())
    }

    pub fn apply_channel(&self, channel: &KrausChannel, targets: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_channel_mut(channel, targets)?;
        Ok(out)
    }

    /// ρ ← Σ K ρ K†
    pub fn apply_channel_mut(&mut self, channel: &KrausChannel, targets: &[usize]) -> Result<()> {
        self.check_targets(channel.arity(), targets)?;
        let ops: Vec<&LocalOp> = channel
            .operators()
            .iter()
            .filter(|k| k.data().iter().any(|z| *z != ZERO))
            .collect();
        if let [only] = ops.as_slice() {
            only.conjugate(&mut self.data, self.n_qubits, targets);
            return Ok(());
        }
        let mut acc = vec![ZERO; self.data.len()];
        let mut scratch = self.data.clone();
        for k in ops {
            scratch.copy_from_slice(&self.data);
            k.conjugate(&mut scratch, self.n_qubits, targets);
            for (a, s) in acc.iter_mut().zip(&scratch) {
                *a += s;
            }
        }
        self.data = acc;
        Ok(())
    }

    fn check_targets(&self, arity: usize, targets: &[usize]) -> Result<()> {
        if targets.len() != arity {
            return Err(Error::Shape(format!(
                "operator acts on {arity} qubit(s) but {} target(s) given",
                targets.len()
            )));
        }
        for &q in targets {
            self.check_qubit(q)?;
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::Shape("targets must be distinct".into()));
        }
        Ok(())
    }

    /// Tr(ρ Z_q)
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let dim = self.dim();
        let bit = 1usize << (self.n_qubits - 1 - qubit);
        let value: f64 = (0..dim)
            .map(|i| {
                let p = self.data[i * dim + i].re;
                if i & bit == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum();
        Ok(value.clamp(-1.0, 1.0))
    }

    /// Every qubit's ⟨Z⟩ in index order.
    pub fn expect_z_all(&self) -> Vec<f64> {
        (0..self.n_qubits)
            .map(|q| self.expect_z(q).expect("qubit in range"))
            .collect()
    }

    /// Empirical mean of `shots` ±1 outcomes with P(+1) = (1 + ⟨Z⟩)/2.
    pub fn sample_expect_z(&self, qubit: usize, shots: u32, seed: u64) -> Result<f64> {
        if shots == 0 {
            return Err(Error::Range("shots must be at least 1".into()));
        }
        let p_plus = (1.0 + self.expect_z(qubit)?) / 2.0;
        let mut rng = seed::rng(seed);
        let plus = (0..shots).filter(|_| rng.random::<f64>() < p_plus).count() as f64;
        let shots = f64::from(shots);
        Ok((2.0 * plus - shots) / shots)
    }
}
