use num_complex::Complex64;

use crate::error::{Error, Result};

/// A square operator on `arity` qubits, stored row-major.
///
/// The first target handed to [`LocalOp::apply_left`] and friends is the most
/// significant bit of the local index.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOp {
    arity: usize,
    data: Vec<Complex64>,
}

impl LocalOp {
    pub fn new(arity: usize, data: Vec<Complex64>) -> Result<Self> {
        let d = 1usize << arity;
        if arity == 0 || data.len() != d * d {
            return Err(Error::Shape(format!(
                "local operator on {arity} qubits needs {} entries, got {}",
                d * d,
                data.len()
            )));
        }
        Ok(Self { arity, data })
    }

    pub fn from_rows<const N: usize>(rows: [[Complex64; N]; N]) -> Self {
        let arity = N.trailing_zeros() as usize;
        assert!(N.is_power_of_two() && N >= 2, "operator dimension must be 2^k");
        Self {
            arity,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn identity(arity: usize) -> Self {
        let d = 1usize << arity;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            data[i * d + i] = Complex64::new(1.0, 0.0);
        }
        Self { arity, data }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            arity: self.arity,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        Self {
            arity: self.arity,
            data,
        }
    }

    pub fn matmul(&self, other: &LocalOp) -> Self {
        assert_eq!(self.arity, other.arity);
        let d = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..d {
                    data[r * d + c] += a * other.data[k * d + c];
                }
            }
        }
        Self {
            arity: self.arity,
            data,
        }
    }

    /// Computes `M ρ M†` in place on a row-major `dim × dim` buffer.
    pub(crate) fn conjugate(&self, rho: &mut [Complex64], n_qubits: usize, targets: &[usize]) {
        let offsets = self.offsets(n_qubits, targets);
        self.apply_left(rho, n_qubits, &offsets);
        self.apply_right_adjoint(rho, n_qubits, &offsets);
    }

    /// Basis offsets for every local index, plus the mask of touched bits.
    fn offsets(&self, n_qubits: usize, targets: &[usize]) -> (Vec<usize>, usize) {
        debug_assert_eq!(targets.len(), self.arity);
        let d = self.dim();
        let bit = |q: usize| 1usize << (n_qubits - 1 - q);
        let mask = targets.iter().fold(0, |m, &q| m | bit(q));
        let offsets = (0..d)
            .map(|a| {
                targets.iter().enumerate().fold(0, |acc, (t, &q)| {
                    if (a >> (self.arity - 1 - t)) & 1 == 1 {
                        acc | bit(q)
                    } else {
                        acc
                    }
                })
            })
            .collect();
        (offsets, mask)
    }

    fn apply_left(&self, rho: &mut [Complex64], n_qubits: usize, (offsets, mask): &(Vec<usize>, usize)) {
        let dim = 1usize << n_qubits;
        let d = self.dim();
        let mut rows = vec![Complex64::new(0.0, 0.0); d * dim];
        for base in (0..dim).filter(|i| i & mask == 0) {
            for (a, off) in offsets.iter().enumerate() {
                let src = (base | off) * dim;
                rows[a * dim..(a + 1) * dim].copy_from_slice(&rho[src..src + dim]);
            }
            for (a, off) in offsets.iter().enumerate() {
                let dst = (base | off) * dim;
                let out = &mut rho[dst..dst + dim];
                out.fill(Complex64::new(0.0, 0.0));
                for b in 0..d {
                    let m = self.data[a * d + b];
                    if m == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let row = &rows[b * dim..(b + 1) * dim];
                    for (o, v) in out.iter_mut().zip(row) {
                        *o += m * v;
                    }
                }
            }
        }
    }

    fn apply_right_adjoint(
        &self,
        rho: &mut [Complex64],
        n_qubits: usize,
        (offsets, mask): &(Vec<usize>, usize),
    ) {
        let dim = 1usize << n_qubits;
        let d = self.dim();
        let mut v = vec![Complex64::new(0.0, 0.0); d];
        for r in 0..dim {
            let row = &mut rho[r * dim..(r + 1) * dim];
            for base in (0..dim).filter(|i| i & mask == 0) {
                for (b, off) in offsets.iter().enumerate() {
                    v[b] = row[base | off];
                }
                for (a, off) in offsets.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (b, vb) in v.iter().enumerate() {
                        acc += vb * self.data[a * d + b].conj();
                    }
                    row[base | off] = acc;
                }
            }
        }
    }
}
