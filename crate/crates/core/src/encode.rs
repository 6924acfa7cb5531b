//! Classical-to-quantum feature maps.
//!
//! Angle encoding puts every qubit in |+⟩ with a Hadamard, then writes the
//! qubit's contiguous feature block as alternating RZ, RX, RZ, RX, ...
//! rotations. Amplitude encoding loads the zero-padded, L2-normalized
//! feature vector as a pure state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::Interval;
use crate::error::{Error, Result};
use crate::noise::{apply_maybe_noisy, NoiseModel, STATE_PREP};
use crate::simcore::{DensityMatrix, GateOp, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Angle,
    Amplitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub n_qubits: usize,
    /// Only meaningful for angle encoding.
    #[serde(default = "one")]
    pub features_per_qubit: usize,
    #[serde(default)]
    pub scale_range: Interval,
}

fn one() -> usize {
    1
}

impl EncoderConfig {
    pub fn angle(n_qubits: usize, features_per_qubit: usize) -> Self {
        Self {
            kind: EncoderKind::Angle,
            n_qubits,
            features_per_qubit,
            scale_range: Interval::ZERO_TWO_PI,
        }
    }

    /// Angle encoder with just enough features per qubit for `dim` features.
    pub fn angle_for_dim(n_qubits: usize, dim: usize) -> Self {
        Self::angle(n_qubits, dim.div_ceil(n_qubits.max(1)).max(1))
    }

    pub fn amplitude(n_qubits: usize) -> Self {
        Self {
            kind: EncoderKind::Amplitude,
            n_qubits,
            features_per_qubit: 1,
            scale_range: Interval::ZERO_TWO_PI,
        }
    }

    pub fn capacity(&self) -> usize {
        match self.kind {
            EncoderKind::Angle => self.n_qubits * self.features_per_qubit,
            EncoderKind::Amplitude => 1usize << self.n_qubits.min(MAX_QUBITS),
        }
    }

    /// Checks that vectors of length `dim` fit this encoder.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                requested: self.n_qubits,
                max: MAX_QUBITS,
            });
        }
        if self.kind == EncoderKind::Angle && self.features_per_qubit == 0 {
            return Err(Error::Config("features_per_qubit must be positive".into()));
        }
        if dim == 0 || dim > self.capacity() {
            return Err(Error::Shape(format!(
                "{dim} features do not fit a {:?} encoder with capacity {}",
                self.kind,
                self.capacity()
            )));
        }
        Ok(())
    }

    /// The encoding circuit for `x` (angle encoding only).
    pub fn angle_circuit(&self, x: &[f64]) -> Vec<GateOp> {
        let f = self.features_per_qubit;
        let mut gates: Vec<GateOp> = (0..self.n_qubits).map(GateOp::h).collect();
        for q in 0..self.n_qubits {
            for k in 0..f {
                let Some(&angle) = x.get(q * f + k) else { break };
                gates.push(if k % 2 == 0 {
                    GateOp::rz(q, angle)
                } else {
                    GateOp::rx(q, angle)
                });
            }
        }
        gates
    }
}

/// φ(x): the density matrix produced by the encoding circuit.
pub fn encode(x: &[f64], cfg: &EncoderConfig, noise: Option<&NoiseModel>) -> Result<DensityMatrix> {
    cfg.check_dim(x.len())?;
    match cfg.kind {
        EncoderKind::Angle => {
            let mut rho = DensityMatrix::ground_state(cfg.n_qubits)?;
            for gate in cfg.angle_circuit(x) {
                apply_maybe_noisy(&mut rho, &gate, noise)?;
            }
            Ok(rho)
        }
        EncoderKind::Amplitude => {
            if x.iter().all(|&v| v == 0.0) {
                return Err(Error::Degenerate("amplitude encoding of the zero vector".into()));
            }
            let dim = 1usize << cfg.n_qubits;
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            for (a, &v) in amps.iter_mut().zip(x) {
                *a = Complex64::new(v, 0.0);
            }
            let mut rho = DensityMatrix::from_pure_state(&amps)?;
            if let Some(model) = noise {
                let all: Vec<usize> = (0..cfg.n_qubits).collect();
                model.apply_after(&mut rho, STATE_PREP, &all)?;
            }
            Ok(rho)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn frobenius(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn angle_zero_is_plus_state() {
        let rho = encode(&[0.0], &EncoderConfig::angle(1, 1), None).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rho.get(i, j) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn antipodal_angles_are_sqrt2_apart() {
        let cfg = EncoderConfig::angle(1, 1);
        let a = encode(&[0.0], &cfg, None).unwrap();
        let b = encode(&[PI], &cfg, None).unwrap();
        assert!((frobenius(&a, &b) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn equatorial_distance_formula() {
        let cfg = EncoderConfig::angle(1, 1);
        for (x, y) in [(0.3, 1.9), (2.0, 5.5), (0.0, 0.1)] {
            let d = frobenius(&encode(&[x], &cfg, None).unwrap(), &encode(&[y], &cfg, None).unwrap());
            let expected = (1.0 - f64::cos(x - y)).sqrt();
            assert!((d - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitude_basis_vector_is_ground_state() {
        let rho = encode(&[1.0, 0.0, 0.0, 0.0], &EncoderConfig::amplitude(2), None).unwrap();
        assert_eq!(rho, DensityMatrix::ground_state(2).unwrap());
    }

    #[test]
    fn amplitude_zero_vector_is_degenerate() {
        let err = encode(&[0.0, 0.0], &EncoderConfig::amplitude(1), None).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn dimension_overflow_is_rejected() {
        assert!(encode(&[0.0; 5], &EncoderConfig::angle(2, 2), None).is_err());
        assert!(encode(&[1.0; 5], &EncoderConfig::amplitude(2), None).is_err());
        assert!(encode(&[], &EncoderConfig::angle(2, 2), None).is_err());
    }

    #[test]
    fn trailing_features_may_be_missing() {
        let cfg = EncoderConfig::angle(2, 2);
        let rho = encode(&[0.4, 1.0, 2.0], &cfg, None).unwrap();
        assert_eq!(cfg.angle_circuit(&[0.4, 1.0, 2.0]).len(), 5);
        assert!((rho.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_encoding_is_mixed_but_valid() {
        let noise = NoiseModel::uniform(0.05).unwrap();
        let cfg = EncoderConfig::angle(2, 2);
        let rho = encode(&[0.4, 1.0, 2.0, 3.0], &cfg, Some(&noise)).unwrap();
        rho.validate().unwrap();
        assert!(rho.purity() < 1.0 - 1e-3);

        let rho = encode(&[0.4, 1.0, 2.0, 3.0], &EncoderConfig::amplitude(2), Some(&noise)).unwrap();
        rho.validate().unwrap();
        assert!(rho.purity() < 1.0 - 1e-3);
    }
}
