//! Model files, equilibrium files and sweep CSVs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::game_model::GameSpec;
use crate::mfg_solver::{evaluate_policy, EquilibriumArtifact, FlowAtom, MeasureFlow, PolicyEntry, PolicyTree};
use crate::risk_augmentation::AugmentedGame;

/// Reads a model file without validating it.
pub fn read_model(path: &Path) -> Result<GameSpec> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads, validates and normalizes a model file.
pub fn load_model(path: &Path) -> Result<GameSpec> {
    read_model(path)?.validated()
}

/// SHA-256 of the model's canonical JSON form, hex encoded.
pub fn spec_hash(spec: &GameSpec) -> String {
    let bytes = serde_json::to_vec(spec).expect("model serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileAtom {
    pub state: String,
    pub level: f64,
    pub mass: f64,
}

/// Serialized equilibrium. Policy keys interleave labels as
/// `y(0)/a(0)/y(1)/.../y(t)`; histories absent from the map take the first
/// action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumFile {
    pub policy: BTreeMap<String, String>,
    pub flow: Vec<Vec<FileAtom>>,
    pub nce_residual: f64,
    pub optimality_gap: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub spec_hash: String,
}

fn history_key(spec: &GameSpec, e: &PolicyEntry) -> String {
    let mut parts = Vec::with_capacity(2 * e.observations.len());
    for (k, &y) in e.observations.iter().enumerate() {
        if k > 0 {
            parts.push(spec.actions[e.past_actions[k - 1]].as_str());
        }
        parts.push(spec.observations[y].as_str());
    }
    parts.join("/")
}

fn index_of(labels: &[String], label: &str, what: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::PolicyFormat(format!("unknown {what} label {label:?}")))
}

fn parse_key(spec: &GameSpec, key: &str, action: &str) -> Result<PolicyEntry> {
    let parts: Vec<&str> = key.split('/').collect();
    if parts.len().is_multiple_of(2) {
        return Err(Error::PolicyFormat(format!("history {key:?} must end with an observation")));
    }
    let mut observations = Vec::new();
    let mut past_actions = Vec::new();
    for (k, p) in parts.iter().enumerate() {
        if k % 2 == 0 {
            observations.push(index_of(&spec.observations, p, "observation")?);
        } else {
            past_actions.push(index_of(&spec.actions, p, "action")?);
        }
    }
    Ok(PolicyEntry {
        observations,
        past_actions,
        action: index_of(&spec.actions, action, "action")?,
    })
}

impl EquilibriumFile {
    pub fn from_artifact(spec: &GameSpec, eq: &EquilibriumArtifact) -> Self {
        let policy = eq
            .policy
            .entries()
            .iter()
            .map(|e| (history_key(spec, e), spec.actions[e.action].clone()))
            .collect();
        let flow = eq
            .flow
            .stages
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|a| FileAtom {
                        state: spec.states[a.state].clone(),
                        level: a.level,
                        mass: a.mass,
                    })
                    .collect()
            })
            .collect();
        EquilibriumFile {
            policy,
            flow,
            nce_residual: eq.nce_residual,
            optimality_gap: eq.optimality_gap,
            value: eq.value,
            iterations: eq.iterations,
            converged: eq.converged,
            spec_hash: spec_hash(spec),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn check_hash(&self, spec: &GameSpec) -> Result<()> {
        let expected = spec_hash(spec);
        if self.spec_hash != expected {
            return Err(Error::HashMismatch {
                expected,
                found: self.spec_hash.clone(),
            });
        }
        Ok(())
    }

    pub fn policy_tree(&self, spec: &GameSpec) -> Result<PolicyTree> {
        let entries = self
            .policy
            .iter()
            .map(|(k, a)| parse_key(spec, k, a))
            .collect::<Result<Vec<_>>>()?;
        PolicyTree::from_entries(spec.n_obs(), spec.horizon_t, 0, entries)
    }

    pub fn measure_flow(&self, spec: &GameSpec) -> Result<MeasureFlow> {
        if self.flow.len() != spec.horizon_t + 2 {
            return Err(Error::PolicyFormat(format!(
                "flow has {} stages, model needs {}",
                self.flow.len(),
                spec.horizon_t + 2
            )));
        }
        let stages = self
            .flow
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|a| {
                        Ok(FlowAtom {
                            state: index_of(&spec.states, &a.state, "state")?,
                            level: a.level,
                            mass: a.mass,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MeasureFlow::from_stages(stages))
    }

    /// The game built against the stored flow.
    pub fn frozen_game(&self, spec: &GameSpec) -> Result<AugmentedGame> {
        let flow = self.measure_flow(spec)?;
        AugmentedGame::build(spec, flow.field_model(spec.n_states()))
    }

    /// Forward evaluation of the stored policy against the stored flow.
    pub fn reevaluate(&self, spec: &GameSpec) -> Result<f64> {
        let aug = self.frozen_game(spec)?;
        Ok(evaluate_policy(&aug, &self.policy_tree(spec)?))
    }
}

pub const SWEEP_HEADER: [&str; 8] = [
    "N",
    "policy",
    "mean_cost",
    "std_err",
    "gap",
    "gap_ci_lo",
    "gap_ci_hi",
    "meanfield_l1",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub policy: String,
    pub mean_cost: f64,
    pub std_err: f64,
    pub gap: f64,
    pub gap_ci_lo: f64,
    pub gap_ci_hi: f64,
    pub meanfield_l1: f64,
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepRow {
    fn record(&self) -> [String; 8] {
        [
            self.n.to_string(),
            self.policy.clone(),
            num(self.mean_cost),
            num(self.std_err),
            num(self.gap),
            num(self.gap_ci_lo),
            num(self.gap_ci_hi),
            num(self.meanfield_l1),
        ]
    }
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.record()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let header = rdr.headers().map_err(|e| Error::Io(std::io::Error::other(e)))?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(Error::PolicyFormat(format!("unexpected sweep header {header:?}")));
    }
    let bad = |what: &str| Error::PolicyFormat(format!("bad sweep field {what}"));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(SWEEP_HEADER[i]));
        rows.push(SweepRow {
            n: rec[0].parse().map_err(|_| bad("N"))?,
            policy: rec[1].to_string(),
            mean_cost: f(2)?,
            std_err: f(3)?,
            gap: f(4)?,
            gap_ci_lo: f(5)?,
            gap_ci_hi: f(6)?,
            meanfield_l1: f(7)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mfg_solver::{find_equilibrium, EquilibriumOptions};

    #[test]
    fn keys_round_trip() {
        let spec = fixtures::toy_b();
        let e = PolicyEntry {
            observations: vec![1, 0],
            past_actions: vec![1],
            action: 0,
        };
        let key = history_key(&spec, &e);
        assert_eq!(key, "y1/a1/y0");
        assert_eq!(parse_key(&spec, &key, "a0").unwrap(), e);
        assert!(parse_key(&spec, "y1/a1", "a0").is_err());
        assert!(parse_key(&spec, "y9", "a0").is_err());
    }

    #[test]
    fn equilibrium_file_round_trips() {
        let spec = fixtures::toy_b();
        let eq = find_equilibrium(&spec, &EquilibriumOptions::default()).unwrap();
        let file = EquilibriumFile::from_artifact(&spec, &eq);
        let text = serde_json::to_string(&file).unwrap();
        let back: EquilibriumFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.policy_tree(&spec).unwrap(), eq.policy);
        assert_eq!(back.measure_flow(&spec).unwrap(), eq.flow);
        assert!((back.reevaluate(&spec).unwrap() - back.value).abs() < 1e-10);
        back.check_hash(&spec).unwrap();
        let mut other = spec.clone();
        other.lambda = 2.0;
        assert!(matches!(back.check_hash(&other), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn sweep_numbers_are_lossless() {
        let row = SweepRow {
            n: 16,
            policy: "equilibrium".into(),
            mean_cost: 0.1 + 0.2,
            std_err: 1.0 / 3.0,
            gap: 0.0,
            gap_ci_lo: -1e-300,
            gap_ci_hi: std::f64::consts::PI,
            meanfield_l1: 2.0f64.sqrt(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_sweep(std::fs::File::create(&path).unwrap(), std::slice::from_ref(&row)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("N,policy,mean_cost,std_err,gap,gap_ci_lo,gap_ci_hi,meanfield_l1\n"));
        assert_eq!(read_sweep(&path).unwrap(), vec![row]);
    }
}
