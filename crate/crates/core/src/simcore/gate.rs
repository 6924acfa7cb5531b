use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LocalOp;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    H,
    X,
    Rx,
    Rz,
    Crx,
    Crz,
    Cnot,
}

impl GateKind {
    pub const ALL: [GateKind; 7] = [
        GateKind::H,
        GateKind::X,
        GateKind::Rx,
        GateKind::Rz,
        GateKind::Crx,
        GateKind::Crz,
        GateKind::Cnot,
    ];

    /// Lowercase name, also used as the key in noise model files.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Rx => "rx",
            GateKind::Rz => "rz",
            GateKind::Crx => "crx",
            GateKind::Crz => "crz",
            GateKind::Cnot => "cnot",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::X | GateKind::Rx | GateKind::Rz => 1,
            GateKind::Crx | GateKind::Crz | GateKind::Cnot => 2,
        }
    }

    pub fn is_parameterized(self) -> bool {
        matches!(
            self,
            GateKind::Rx | GateKind::Rz | GateKind::Crx | GateKind::Crz
        )
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown gate `{s}`")))
    }
}

/// One gate instance: kind, target qubits and (for rotations) an angle.
///
/// For controlled gates `targets[0]` is the control.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    kind: GateKind,
    targets: Vec<usize>,
    param: Option<f64>,
}

impl GateOp {
    pub fn new(kind: GateKind, targets: Vec<usize>, param: Option<f64>) -> Result<Self> {
        if targets.len() != kind.arity() {
            return Err(Error::Shape(format!(
                "{kind} acts on {} qubit(s), got {} target(s)",
                kind.arity(),
                targets.len()
            )));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::Shape(format!("{kind} targets must be distinct")));
        }
        if kind.is_parameterized() != param.is_some() {
            return Err(Error::Shape(format!(
                "{kind} {} an angle",
                if kind.is_parameterized() { "requires" } else { "takes no" }
            )));
        }
        Ok(Self {
            kind,
            targets,
            param,
        })
    }

    pub fn h(q: usize) -> Self {
        Self::single(GateKind::H, q, None)
    }

    pub fn x(q: usize) -> Self {
        Self::single(GateKind::X, q, None)
    }

    pub fn rx(q: usize, theta: f64) -> Self {
        Self::single(GateKind::Rx, q, Some(theta))
    }

    pub fn rz(q: usize, theta: f64) -> Self {
        Self::single(GateKind::Rz, q, Some(theta))
    }

    pub fn crx(control: usize, target: usize, theta: f64) -> Self {
        Self::new(GateKind::Crx, vec![control, target], Some(theta)).expect("distinct qubits")
    }

    pub fn crz(control: usize, target: usize, theta: f64) -> Self {
        Self::new(GateKind::Crz, vec![control, target], Some(theta)).expect("distinct qubits")
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self::new(GateKind::Cnot, vec![control, target], None).expect("distinct qubits")
    }

    fn single(kind: GateKind, q: usize, param: Option<f64>) -> Self {
        Self {
            kind,
            targets: vec![q],
            param,
        }
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn param(&self) -> Option<f64> {
        self.param
    }

    pub fn validate_for(&self, n_qubits: usize) -> Result<()> {
        match self.targets.iter().find(|&&q| q >= n_qubits) {
            Some(&index) => Err(Error::Index { index, n_qubits }),
            None => Ok(()),
        }
    }

    pub fn matrix(&self) -> LocalOp {
        let theta = self.param.unwrap_or(0.0);
        match self.kind {
            GateKind::H => hadamard(),
            GateKind::X => pauli_x(),
            GateKind::Rx => rx(theta),
            GateKind::Rz => rz(theta),
            GateKind::Crx => controlled(&rx(theta)),
            GateKind::Crz => controlled(&rz(theta)),
            GateKind::Cnot => controlled(&pauli_x()),
        }
    }
}

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn hadamard() -> LocalOp {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    LocalOp::from_rows([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]])
}

pub(crate) fn pauli_x() -> LocalOp {
    LocalOp::from_rows([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

pub(crate) fn pauli_y() -> LocalOp {
    LocalOp::from_rows([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]])
}

pub(crate) fn pauli_z() -> LocalOp {
    LocalOp::from_rows([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])
}

/// RX(θ) = cos(θ/2) I − i sin(θ/2) X
fn rx(theta: f64) -> LocalOp {
    let (s, co) = (theta / 2.0).sin_cos();
    LocalOp::from_rows([[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]])
}

/// RZ(θ) = diag(e^{−iθ/2}, e^{iθ/2})
fn rz(theta: f64) -> LocalOp {
    let (s, co) = (theta / 2.0).sin_cos();
    LocalOp::from_rows([[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]])
}

/// |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U with the control as the high local bit.
fn controlled(u: &LocalOp) -> LocalOp {
    let mut m = LocalOp::identity(2).data().to_vec();
    for r in 0..2 {
        for col in 0..2 {
            m[(2 + r) * 4 + 2 + col] = u.get(r, col);
        }
    }
    LocalOp::new(2, m).expect("4x4")
}
