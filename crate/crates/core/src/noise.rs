//! Noise channels and per-gate noise models.
//!
//! A [`NoiseModel`] maps lowercase gate names to the channels applied to
//! every touched qubit right after that gate. Entangling gates get
//! independent single-qubit noise on each of their qubits.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::simcore::{pauli_x, pauli_y, pauli_z, DensityMatrix, GateKind, GateOp, KrausChannel, LocalOp};

/// Noise-model key for the opaque amplitude state preparation.
pub const STATE_PREP: &str = "stateprep";
pub const DEFAULT_KEY: &str = "default";

fn check_probability(what: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Range(format!("{what} parameter {p} not in [0, 1]")));
    }
    Ok(())
}

/// K0 = [[1,0],[0,√(1−γ)]], K1 = [[0,√γ],[0,0]]
pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    check_probability("amplitude_damping", gamma)?;
    let z = Complex64::new(0.0, 0.0);
    let r = |x: f64| Complex64::new(x, 0.0);
    KrausChannel::new(vec![
        LocalOp::from_rows([[r(1.0), z], [z, r((1.0 - gamma).sqrt())]]),
        LocalOp::from_rows([[z, r(gamma.sqrt())], [z, z]]),
    ])
}

/// ρ ↦ (1−p)ρ + p·I/2, as {√(1−3p/4) I, √(p/4) X, √(p/4) Y, √(p/4) Z}.
pub fn depolarizing(p: f64) -> Result<KrausChannel> {
    check_probability("depolarizing", p)?;
    let w = (p / 4.0).sqrt();
    KrausChannel::new(vec![
        LocalOp::identity(1).scaled((1.0 - 0.75 * p).sqrt()),
        pauli_x().scaled(w),
        pauli_y().scaled(w),
        pauli_z().scaled(w),
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelKind {
    AmplitudeDamping,
    Depolarizing,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::AmplitudeDamping => "amplitude_damping",
            ChannelKind::Depolarizing => "depolarizing",
        }
    }

    pub fn build(self, p: f64) -> Result<KrausChannel> {
        match self {
            ChannelKind::AmplitudeDamping => amplitude_damping(p),
            ChannelKind::Depolarizing => depolarizing(p),
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude_damping" => Ok(ChannelKind::AmplitudeDamping),
            "depolarizing" => Ok(ChannelKind::Depolarizing),
            other => Err(Error::Config(format!("unknown channel `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
struct NoiseStep {
    kind: ChannelKind,
    param: f64,
    channel: KrausChannel,
}

impl PartialEq for NoiseStep {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.param.to_bits() == other.param.to_bits()
    }
}

fn build_steps(entries: &[(ChannelKind, f64)]) -> Result<Vec<NoiseStep>> {
    let mut steps = entries
        .iter()
        .map(|&(kind, param)| {
            Ok(NoiseStep {
                kind,
                param,
                channel: kind.build(param)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // damping always precedes depolarizing
    steps.sort_by_key(|s| s.kind);
    Ok(steps)
}

/// Gate-name → channel list, with a default for unlisted gates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseModel {
    per_gate: BTreeMap<String, Vec<NoiseStep>>,
    default: Vec<NoiseStep>,
}

fn valid_key(key: &str) -> bool {
    key == DEFAULT_KEY || key == STATE_PREP || GateKind::ALL.iter().any(|k| k.name() == key)
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    /// Amplitude damping and depolarizing, both at `p`, after every gate.
    pub fn uniform(p: f64) -> Result<Self> {
        Self::with_default(&[
            (ChannelKind::AmplitudeDamping, p),
            (ChannelKind::Depolarizing, p),
        ])
    }

    pub fn with_default(entries: &[(ChannelKind, f64)]) -> Result<Self> {
        Ok(Self {
            per_gate: BTreeMap::new(),
            default: build_steps(entries)?,
        })
    }

    /// Overrides the channels for one gate name (`"rz"`, `"stateprep"`, ...).
    pub fn set_gate(&mut self, gate: &str, entries: &[(ChannelKind, f64)]) -> Result<()> {
        if !valid_key(gate) || gate == DEFAULT_KEY {
            return Err(Error::Config(format!("unknown gate key `{gate}`")));
        }
        self.per_gate.insert(gate.to_string(), build_steps(entries)?);
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.default.iter().all(|s| s.param == 0.0)
            && self.per_gate.values().flatten().all(|s| s.param == 0.0)
    }

    /// The (kind, parameter) list applied after gates named `gate`.
    pub fn entries_for(&self, gate: &str) -> Vec<(ChannelKind, f64)> {
        self.steps_for(gate).iter().map(|s| (s.kind, s.param)).collect()
    }

    fn steps_for(&self, gate: &str) -> &[NoiseStep] {
        self.per_gate.get(gate).unwrap_or(&self.default)
    }

    /// Applies the channels registered for `gate` to each qubit in `targets`.
    pub fn apply_after(&self, rho: &mut DensityMatrix, gate: &str, targets: &[usize]) -> Result<()> {
        for &q in targets {
            for step in self.steps_for(gate) {
                if step.param == 0.0 {
                    continue;
                }
                rho.apply_channel_mut(&step.channel, &[q])?;
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            Error::parse(origin, e.line(), format!("invalid JSON: {e}"))
        })?;
        let Value::Object(map) = value else {
            return Err(Error::parse(origin, 1, "noise model must be a JSON object"));
        };
        let line_of = |key: &str| {
            let needle = format!("\"{key}\"");
            text.lines()
                .position(|l| l.contains(&needle))
                .map_or(1, |i| i + 1)
        };
        let mut model = NoiseModel::noiseless();
        for (key, entries) in &map {
            let line = line_of(key);
            if !valid_key(key) {
                return Err(Error::parse(origin, line, format!("unknown key `{key}`")));
            }
            let Value::Array(items) = entries else {
                return Err(Error::parse(origin, line, format!("`{key}`: expected an array of [channel, p] pairs")));
            };
            let mut parsed = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let pair = item.as_array().filter(|a| a.len() == 2);
                let (Some(name), Some(p)) = (
                    pair.and_then(|a| a[0].as_str()),
                    pair.and_then(|a| a[1].as_f64()),
                ) else {
                    return Err(Error::parse(origin, line, format!("`{key}`[{i}]: expected [channel_name, number]")));
                };
                let kind: ChannelKind = name
                    .parse()
                    .map_err(|e: Error| Error::parse(origin, line, format!("`{key}`[{i}]: {e}")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Range(format!(
                        "{}:{line}: `{key}`[{i}]: {kind} parameter {p} not in [0, 1]",
                        origin.display()
                    )));
                }
                parsed.push((kind, p));
            }
            if key == DEFAULT_KEY {
                model.default = build_steps(&parsed)?;
            } else {
                model.per_gate.insert(key.clone(), build_steps(&parsed)?);
            }
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn to_json(&self) -> Value {
        let pairs = |steps: &[NoiseStep]| {
            Value::Array(
                steps
                    .iter()
                    .map(|s| serde_json::json!([s.kind.name(), s.param]))
                    .collect(),
            )
        };
        let mut map = serde_json::Map::new();
        map.insert(DEFAULT_KEY.into(), pairs(&self.default));
        for (k, v) in &self.per_gate {
            map.insert(k.clone(), pairs(v));
        }
        Value::Object(map)
    }
}

/// Applies `gate`, then the model's channels on every qubit the gate touched.
pub fn noisy_apply(rho: &DensityMatrix, gate: &GateOp, model: &NoiseModel) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    noisy_apply_mut(&mut out, gate, model)?;
    Ok(out)
}

pub fn noisy_apply_mut(rho: &mut DensityMatrix, gate: &GateOp, model: &NoiseModel) -> Result<()> {
    rho.apply_gate_mut(gate)?;
    model.apply_after(rho, gate.kind().name(), gate.targets())
}

/// Applies a gate, routing through the noise model when one is given.
pub fn apply_maybe_noisy(rho: &mut DensityMatrix, gate: &GateOp, model: Option<&NoiseModel>) -> Result<()> {
    match model {
        Some(m) => noisy_apply_mut(rho, gate, m),
        None => rho.apply_gate_mut(gate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::COMPLETENESS_TOL;
    use proptest::prelude::*;

    fn ground() -> DensityMatrix {
        DensityMatrix::ground_state(1).unwrap()
    }

    fn one() -> DensityMatrix {
        ground().apply_gate(&GateOp::x(0)).unwrap()
    }

    fn diag(rho: &DensityMatrix) -> (f64, f64) {
        (rho.get(0, 0).re, rho.get(1, 1).re)
    }

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12
    }

    #[test]
    fn depolarizing_examples() {
        let out = ground().apply_channel(&depolarizing(0.05).unwrap(), &[0]).unwrap();
        assert!(close(diag(&out), (0.975, 0.025)));
        assert!((out.expect_z(0).unwrap() - 0.95).abs() < 1e-12);
        let plus = ground().apply_gate(&GateOp::h(0)).unwrap();
        let mixed = plus.apply_channel(&depolarizing(1.0).unwrap(), &[0]).unwrap();
        assert_eq!(mixed.data().len(), 4);
        assert!((mixed.get(0, 1)).norm() < 1e-12 && close(diag(&mixed), (0.5, 0.5)));
        let same = plus.apply_channel(&depolarizing(0.0).unwrap(), &[0]).unwrap();
        assert_eq!(same, plus);
    }

    #[test]
    fn damping_examples() {
        let out = one().apply_channel(&amplitude_damping(0.05).unwrap(), &[0]).unwrap();
        assert!(close(diag(&out), (0.05, 0.95)));
        assert!((out.expect_z(0).unwrap() + 0.9).abs() < 1e-12);
        let decayed = one().apply_channel(&amplitude_damping(1.0).unwrap(), &[0]).unwrap();
        assert!(close(diag(&decayed), (1.0, 0.0)));
        let plus = ground().apply_gate(&GateOp::h(0)).unwrap();
        assert_eq!(plus.apply_channel(&amplitude_damping(0.0).unwrap(), &[0]).unwrap(), plus);
    }

    #[test]
    fn maximally_mixed_is_a_depolarizing_fixed_point() {
        let mm = DensityMatrix::maximally_mixed(3).unwrap();
        let ch = depolarizing(0.3).unwrap();
        let mut out = mm.clone();
        for q in 0..3 {
            out.apply_channel_mut(&ch, &[q]).unwrap();
        }
        for (a, b) in out.data().iter().zip(mm.data()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn out_of_range_parameters() {
        assert!(amplitude_damping(-0.1).is_err());
        assert!(depolarizing(1.5).is_err());
        assert!(NoiseModel::uniform(2.0).is_err());
    }

    #[test]
    fn flip_then_depolarize() {
        let model = NoiseModel::with_default(&[(ChannelKind::Depolarizing, 0.05)]).unwrap();
        let out = noisy_apply(&ground(), &GateOp::x(0), &model).unwrap();
        assert!(close(diag(&out), (0.025, 0.975)));
    }

    #[test]
    fn zero_model_matches_plain_gates_bitwise() {
        let zero = NoiseModel::uniform(0.0).unwrap();
        let mut a = DensityMatrix::ground_state(2).unwrap();
        let mut b = a.clone();
        for g in [GateOp::h(0), GateOp::rx(1, 0.7), GateOp::crx(0, 1, 1.3), GateOp::rz(0, -0.4)] {
            a.apply_gate_mut(&g).unwrap();
            noisy_apply_mut(&mut b, &g, &zero).unwrap();
        }
        let bits = |m: &DensityMatrix| m.data().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn two_qubit_gate_gets_noise_on_both_qubits() {
        let model = NoiseModel::with_default(&[(ChannelKind::Depolarizing, 0.05)]).unwrap();
        let mut rho = DensityMatrix::ground_state(2).unwrap();
        rho.apply_gate_mut(&GateOp::h(0)).unwrap();
        let out = noisy_apply(&rho, &GateOp::crx(0, 1, 0.9), &model).unwrap();
        out.validate().unwrap();

        // reference: gate, then explicit depolarizing on each qubit
        let ch = depolarizing(0.05).unwrap();
        let expected = rho
            .apply_gate(&GateOp::crx(0, 1, 0.9)).unwrap()
            .apply_channel(&ch, &[0]).unwrap()
            .apply_channel(&ch, &[1]).unwrap();
        for (a, b) in out.data().iter().zip(expected.data()) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(out.purity() < rho.purity());
    }

    #[test]
    fn damping_is_applied_before_depolarizing() {
        let model = NoiseModel::with_default(&[
            (ChannelKind::Depolarizing, 0.1),
            (ChannelKind::AmplitudeDamping, 0.2),
        ])
        .unwrap();
        assert_eq!(
            model.entries_for("rx"),
            vec![(ChannelKind::AmplitudeDamping, 0.2), (ChannelKind::Depolarizing, 0.1)]
        );
        let out = noisy_apply(&ground(), &GateOp::x(0), &model).unwrap();
        // |1⟩ → damping: ⟨Z⟩ = 2γ − 1 = −0.6 → depolarizing scales by 0.9
        assert!((out.expect_z(0).unwrap() + 0.54).abs() < 1e-12);
    }

    #[test]
    fn repeated_noisy_identity_loses_signal_monotonically() {
        for p in [0.01, 0.05, 0.1] {
            let both = NoiseModel::uniform(p).unwrap();
            let dep = NoiseModel::with_default(&[(ChannelKind::Depolarizing, p)]).unwrap();
            let (mut a, mut b) = (ground(), ground());
            let mut prev = 1.0;
            for k in 1..=20 {
                noisy_apply_mut(&mut a, &GateOp::rz(0, 0.0), &dep).unwrap();
                assert!((a.expect_z(0).unwrap() - (1.0 - p).powi(k)).abs() < 1e-12);
                noisy_apply_mut(&mut b, &GateOp::rx(0, 0.0), &both).unwrap();
                let z = b.expect_z(0).unwrap();
                assert!(z <= prev + 1e-12, "k={k}: {z} > {prev}");
                prev = z;
            }
        }
    }

    #[test]
    fn depolarizing_never_increases_purity() {
        let mut rng = crate::seed::rng(5);
        use rand::Rng;
        for _ in 0..20 {
            let amps: Vec<Complex64> = (0..4)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let rho = DensityMatrix::from_pure_state(&amps).unwrap();
            for p in [0.01, 0.05, 0.1] {
                let out = rho.apply_channel(&depolarizing(p).unwrap(), &[1]).unwrap();
                assert!(out.purity() <= rho.purity() + 1e-12);
            }
        }
    }

    #[test]
    fn file_format() {
        let origin = Path::new("noise.json");
        let m = NoiseModel::from_json_str(r#"{"default": [["depolarizing", 0.05]]}"#, origin).unwrap();
        assert_eq!(m.entries_for("crx"), vec![(ChannelKind::Depolarizing, 0.05)]);

        let m = NoiseModel::from_json_str(
            "{\n  \"default\": [[\"depolarizing\", 0.05]],\n  \"rz\": []\n}",
            origin,
        )
        .unwrap();
        assert!(m.entries_for("rz").is_empty());
        assert_eq!(m.entries_for("rx").len(), 1);

        let err = NoiseModel::from_json_str("{\n  \"default\": [],\n  \"rx\": [[\"depolarizing\", 1.5]]\n}", origin)
            .unwrap_err()
            .to_string();
        assert!(err.contains("`rx`") && err.contains("1.5") && err.contains(":3"), "{err}");

        let err = NoiseModel::from_json_str(r#"{"toffoli": []}"#, origin).unwrap_err();
        assert!(err.to_string().contains("unknown key"));
        let err = NoiseModel::from_json_str(r#"{"default": [["thermal", 0.1]]}"#, origin).unwrap_err();
        assert!(err.to_string().contains("unknown channel"));
        assert!(NoiseModel::from_json_str("{not json", origin).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut m = NoiseModel::uniform(0.03).unwrap();
        m.set_gate("cnot", &[(ChannelKind::Depolarizing, 0.1)]).unwrap();
        m.set_gate(STATE_PREP, &[]).unwrap();
        let back = NoiseModel::from_json_str(&m.to_json().to_string(), Path::new("x")).unwrap();
        assert_eq!(m, back);
    }

    proptest! {
        #[test]
        fn builtin_channels_are_complete(p in 0.0f64..=1.0) {
            prop_assert!(amplitude_damping(p).unwrap().completeness_error() <= COMPLETENESS_TOL);
            prop_assert!(depolarizing(p).unwrap().completeness_error() <= COMPLETENESS_TOL);
        }
    }
}
