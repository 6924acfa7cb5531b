use num_complex::Complex64;

use super::{LocalOp, COMPLETENESS_TOL};
use crate::error::{Error, Result};

/// A CPTP map given by its Kraus operators, ρ ↦ Σ K ρ K†.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    operators: Vec<LocalOp>,
}

impl KrausChannel {
    /// Builds a channel, rejecting mixed arities and operator sets that are
    /// not trace preserving.
    pub fn new(operators: Vec<LocalOp>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::Shape("channel needs at least one Kraus operator".into()));
        };
        let arity = first.arity();
        if operators.iter().any(|k| k.arity() != arity) {
            return Err(Error::Shape("Kraus operators of mixed arity".into()));
        }
        let channel = Self { operators };
        let err = channel.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(Error::Range(format!(
                "Kraus operators violate completeness by {err:e}"
            )));
        }
        Ok(channel)
    }

    pub fn arity(&self) -> usize {
        self.operators[0].arity()
    }

    pub fn operators(&self) -> &[LocalOp] {
        &self.operators
    }

    /// max |(Σ K†K − I)_{ij}|
    pub fn completeness_error(&self) -> f64 {
        let arity = self.arity();
        let d = 1usize << arity;
        let mut sum = vec![Complex64::new(0.0, 0.0); d * d];
        for k in &self.operators {
            let kk = k.adjoint().matmul(k);
            for (s, v) in sum.iter_mut().zip(kk.data()) {
                *s += v;
            }
        }
        let id = LocalOp::identity(arity);
        sum.iter()
            .zip(id.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
