//! Parameterized circuit templates.
//!
//! Three presets are provided, following circuits 1, 6 and 8 of the
//! expressibility study by Sim, Johnson and Aspuru-Guzik:
//!
//! * `pqc1`: RX then RZ on every qubit, no entanglement (2n parameters).
//! * `pqc6`: RX/RZ layer, all-to-all CRX entangler, RX/RZ layer
//!   (n² + 3n parameters).
//! * `pqc8`: RX/RZ layer, two staggered rows of nearest-neighbour CRX,
//!   RX/RZ layer (5n − 1 parameters for even n).
//!
//! Templates serialize to a registry format: a JSON array of
//! `{"gate", "targets", "slot" | "angle"}` entries. The 4-qubit presets
//! ship under `presets/` and are checked against the generators in tests.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{apply_maybe_noisy, NoiseModel};
use crate::simcore::{DensityMatrix, GateKind, GateOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Pqc1,
    Pqc6,
    Pqc8,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Pqc1 => "pqc1",
            Preset::Pqc6 => "pqc6",
            Preset::Pqc8 => "pqc8",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "pqc1" => Ok(Preset::Pqc1),
            "pqc6" => Ok(Preset::Pqc6),
            "pqc8" => Ok(Preset::Pqc8),
            _ => Err(Error::Config(format!("unknown PQC template `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Binding {
    Slot(usize),
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateGate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub binding: Option<Binding>,
}

/// One registry entry as it appears on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryEntry {
    gate: GateKind,
    targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PqcTemplate {
    name: String,
    n_qubits: usize,
    layers: usize,
    gates: Vec<TemplateGate>,
    param_count: usize,
}

impl PqcTemplate {
    /// Validates a gate list: targets in range, parameterized gates bound,
    /// and slots `0..param_count` each used exactly once.
    pub fn from_gates(
        name: impl Into<String>,
        n_qubits: usize,
        layers: usize,
        gates: Vec<TemplateGate>,
    ) -> Result<Self> {
        let mut used = Vec::new();
        for (i, g) in gates.iter().enumerate() {
            GateOp::new(g.kind, g.targets.clone(), g.binding.map(|_| 0.0))
                .and_then(|op| op.validate_for(n_qubits))
                .map_err(|e| Error::Config(format!("template gate {i}: {e}")))?;
            if let Some(Binding::Slot(s)) = g.binding {
                if used.len() <= s {
                    used.resize(s + 1, 0usize);
                }
                used[s] += 1;
            }
        }
        if let Some(s) = used.iter().position(|&c| c != 1) {
            return Err(Error::Config(format!(
                "parameter slot {s} used {} times (slots must be 0..n, each once)",
                used[s]
            )));
        }
        Ok(Self {
            name: name.into(),
            n_qubits,
            layers,
            gates,
            param_count: used.len(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn gates(&self) -> &[TemplateGate] {
        &self.gates
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Concrete gate list with slot `i` bound to `theta[i]`.
    pub fn bind(&self, theta: &[f64]) -> Result<Vec<GateOp>> {
        if theta.len() != self.param_count {
            return Err(Error::Shape(format!(
                "{} expects {} parameters, got {}",
                self.name,
                self.param_count,
                theta.len()
            )));
        }
        self.gates
            .iter()
            .map(|g| {
                let param = g.binding.map(|b| match b {
                    Binding::Slot(s) => theta[s],
                    Binding::Fixed(a) => a,
                });
                GateOp::new(g.kind, g.targets.clone(), param)
            })
            .collect()
    }

    pub fn to_registry_json(&self) -> String {
        let entries: Vec<RegistryEntry> = self
            .gates
            .iter()
            .map(|g| RegistryEntry {
                gate: g.kind,
                targets: g.targets.clone(),
                slot: match g.binding {
                    Some(Binding::Slot(s)) => Some(s),
                    _ => None,
                },
                angle: match g.binding {
                    Some(Binding::Fixed(a)) => Some(a),
                    _ => None,
                },
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("registry entries serialize")
    }

    pub fn from_registry_json(name: impl Into<String>, n_qubits: usize, text: &str) -> Result<Self> {
        Self::parse_registry(name, n_qubits, 1, text)
    }

    pub(crate) fn parse_registry(
        name: impl Into<String>,
        n_qubits: usize,
        layers: usize,
        text: &str,
    ) -> Result<Self> {
        let entries: Vec<RegistryEntry> = serde_json::from_str(text)?;
        let gates = entries
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let binding = match (e.slot, e.angle) {
                    (Some(s), None) => Some(Binding::Slot(s)),
                    (None, Some(a)) => Some(Binding::Fixed(a)),
                    (None, None) => None,
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(format!("entry {i}: both slot and angle given")))
                    }
                };
                Ok(TemplateGate {
                    kind: e.gate,
                    targets: e.targets,
                    binding,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_gates(name, n_qubits, layers, gates)
    }

    pub fn load_registry(path: impl AsRef<Path>, n_qubits: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map_or_else(|| "custom".to_string(), |s| s.to_string_lossy().into_owned());
        Self::from_registry_json(name, n_qubits, &text)
    }
}

struct LayerBuilder {
    gates: Vec<TemplateGate>,
    next_slot: usize,
}

impl LayerBuilder {
    fn rot(&mut self, kind: GateKind, targets: Vec<usize>) {
        self.gates.push(TemplateGate {
            kind,
            targets,
            binding: Some(Binding::Slot(self.next_slot)),
        });
        self.next_slot += 1;
    }

    fn rx_rz_layer(&mut self, n: usize) {
        for q in 0..n {
            self.rot(GateKind::Rx, vec![q]);
        }
        for q in 0..n {
            self.rot(GateKind::Rz, vec![q]);
        }
    }
}

/// Builds a preset with `layers` repetitions, each with fresh slots.
pub fn build_template(preset: Preset, n_qubits: usize, layers: usize) -> Result<PqcTemplate> {
    if layers == 0 {
        return Err(Error::Config("a template needs at least one layer".into()));
    }
    if n_qubits == 0 || (preset != Preset::Pqc1 && n_qubits < 2) {
        return Err(Error::Config(format!(
            "{preset} needs at least {} qubits",
            if preset == Preset::Pqc1 { 1 } else { 2 }
        )));
    }
    let n = n_qubits;
    let mut b = LayerBuilder {
        gates: Vec::new(),
        next_slot: 0,
    };
    for _ in 0..layers {
        b.rx_rz_layer(n);
        match preset {
            Preset::Pqc1 => {}
            Preset::Pqc6 => {
                for control in (0..n).rev() {
                    for target in (0..n).rev().filter(|&t| t != control) {
                        b.rot(GateKind::Crx, vec![control, target]);
                    }
                }
                b.rx_rz_layer(n);
            }
            Preset::Pqc8 => {
                for k in (0..n.saturating_sub(1)).step_by(2) {
                    b.rot(GateKind::Crx, vec![k + 1, k]);
                }
                for k in (1..n.saturating_sub(1)).step_by(2) {
                    b.rot(GateKind::Crx, vec![k + 1, k]);
                }
                b.rx_rz_layer(n);
            }
        }
    }
    PqcTemplate::from_gates(preset.name(), n, layers, b.gates)
}

pub fn apply_pqc(
    rho: &DensityMatrix,
    tpl: &PqcTemplate,
    theta: &[f64],
    noise: Option<&NoiseModel>,
) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    apply_pqc_mut(&mut out, tpl, theta, noise)?;
    Ok(out)
}

pub fn apply_pqc_mut(
    rho: &mut DensityMatrix,
    tpl: &PqcTemplate,
    theta: &[f64],
    noise: Option<&NoiseModel>,
) -> Result<()> {
    if rho.n_qubits() != tpl.n_qubits() {
        return Err(Error::Shape(format!(
            "template on {} qubits applied to a {}-qubit state",
            tpl.n_qubits(),
            rho.n_qubits()
        )));
    }
    for gate in tpl.bind(theta)? {
        apply_maybe_noisy(rho, &gate, noise)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(build_template(Preset::Pqc1, 4, 1).unwrap().param_count(), 8);
        assert_eq!(build_template(Preset::Pqc1, 8, 2).unwrap().param_count(), 32);
        // circuit 6 on 4 qubits: 8 + 12 CRX + 8
        assert_eq!(build_template(Preset::Pqc6, 4, 1).unwrap().param_count(), 28);
        // circuit 8 on 4 qubits: 8 + 3 CRX + 8
        assert_eq!(build_template(Preset::Pqc8, 4, 1).unwrap().param_count(), 19);
        assert_eq!(build_template(Preset::Pqc6, 4, 2).unwrap().param_count(), 56);
    }

    #[test]
    fn entangling_presets_need_two_qubits() {
        assert!(build_template(Preset::Pqc6, 1, 1).is_err());
        assert!(build_template(Preset::Pqc8, 1, 1).is_err());
        assert!(build_template(Preset::Pqc1, 1, 1).is_ok());
        assert!("pqc3".parse::<Preset>().is_err());
    }

    #[test]
    fn shipped_registries_match_generators() {
        let shipped = [
            (Preset::Pqc1, include_str!("../presets/pqc1_4q.json")),
            (Preset::Pqc6, include_str!("../presets/pqc6_4q.json")),
            (Preset::Pqc8, include_str!("../presets/pqc8_4q.json")),
        ];
        for (preset, text) in shipped {
            let generated = build_template(preset, 4, 1).unwrap();
            let loaded = PqcTemplate::from_registry_json(preset.name(), 4, text).unwrap();
            assert_eq!(generated.gates(), loaded.gates(), "{preset}");
        }
    }

    #[test]
    fn registry_round_trip() {
        for preset in [Preset::Pqc1, Preset::Pqc6, Preset::Pqc8] {
            let t = build_template(preset, 5, 2).unwrap();
            let back = PqcTemplate::from_registry_json(preset.name(), 5, &t.to_registry_json()).unwrap();
            assert_eq!(t.gates(), back.gates());
            assert_eq!(t.param_count(), back.param_count());
        }
    }

    #[test]
    fn registry_validation() {
        let dup = r#"[{"gate":"rx","targets":[0],"slot":0},{"gate":"rz","targets":[0],"slot":0}]"#;
        assert!(PqcTemplate::from_registry_json("d", 1, dup).is_err());
        let gap = r#"[{"gate":"rx","targets":[0],"slot":1}]"#;
        assert!(PqcTemplate::from_registry_json("g", 1, gap).is_err());
        let unbound = r#"[{"gate":"rx","targets":[0]}]"#;
        assert!(PqcTemplate::from_registry_json("u", 1, unbound).is_err());
        let oob = r#"[{"gate":"h","targets":[3]}]"#;
        assert!(PqcTemplate::from_registry_json("o", 2, oob).is_err());
        let fixed = r#"[{"gate":"rx","targets":[0],"slot":0},{"gate":"rx","targets":[0],"angle":0.7},{"gate":"cnot","targets":[0,1]}]"#;
        assert_eq!(PqcTemplate::from_registry_json("f", 2, fixed).unwrap().param_count(), 1);
    }

    #[test]
    fn theta_length_is_checked() {
        let t = build_template(Preset::Pqc1, 2, 1).unwrap();
        let rho = DensityMatrix::ground_state(2).unwrap();
        assert!(apply_pqc(&rho, &t, &[0.0; 3], None).is_err());
    }
}
