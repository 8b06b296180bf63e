//! Evaluation reports: JSON, a markdown table and plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{CurvePoint, Threshold};
use crate::preprocess::Exclusion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Spoof,
    Oneclass,
    Verify,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Spoof => "spoof",
            Task::Oneclass => "oneclass",
            Task::Verify => "verify",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spoof" => Ok(Task::Spoof),
            "oneclass" => Ok(Task::Oneclass),
            "verify" => Ok(Task::Verify),
            _ => Err(format!("unknown task `{s}` (spoof, oneclass, verify)")),
        }
    }
}

/// Mean and population standard deviation, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// One resample (spoof), one user (one-class) or one outer fold (verify).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub index: usize,
    pub seed: u64,
    /// Set for per-user units.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub participant_id: Option<u32>,
    pub threshold: Threshold,
    pub frr_pct: f64,
    pub far_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eer_pct: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub far_by_type_pct: BTreeMap<String, f64>,
    pub n_genuine: usize,
    pub n_impostor: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub train_participants: Vec<u32>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub test_participants: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub participant_id: u32,
    pub frr_pct: f64,
    pub far_pct: f64,
    pub eer_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frr_pct: Stat,
    pub far_pct: Stat,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eer_pct: Option<Stat>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub far_by_type_pct: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub unit: usize,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub method: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub units: Vec<UnitResult>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_user: Vec<UserResult>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub excluded: Vec<Exclusion>,
    #[serde(skip)]
    pub curves: Vec<Curve>,
    /// Wall-clock time; kept out of every report file so reruns stay
    /// byte-identical.
    #[serde(skip)]
    pub ms_per_probe: Option<f64>,
}

/// Hex SHA-256 of the canonical JSON encoding of `config`.
pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).expect("json values always serialize");
    hex::encode(Sha256::digest(bytes))
}

fn pct(s: &Stat) -> String {
    format!("{:.2} ± {:.2}", s.mean, s.std)
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} evaluation: {}\n", self.task.as_str(), self.method);
        let _ = writeln!(out, "- seed: {}", self.seed);
        let _ = writeln!(out, "- config hash: `{}`", self.config_hash);
        if !self.excluded.is_empty() {
            let _ = writeln!(out, "- excluded traces: {}", self.excluded.len());
        }
        out.push('\n');
        let s = &self.summary;
        match self.task {
            Task::Spoof => {
                let types: Vec<&String> = s.far_by_type_pct.keys().collect();
                let _ = write!(out, "| Method | FRR (%) | FAR (%) |");
                for t in &types {
                    let _ = write!(out, " FAR {t} (%) |");
                }
                out.push('\n');
                out.push_str("|---|---|---|");
                for _ in &types {
                    out.push_str("---|");
                }
                out.push('\n');
                let _ = write!(out, "| {} | {} | {} |", self.method, pct(&s.frr_pct), pct(&s.far_pct));
                for t in &types {
                    let _ = write!(out, " {} |", pct(&s.far_by_type_pct[*t]));
                }
                out.push('\n');
            }
            Task::Oneclass | Task::Verify => {
                let _ = writeln!(out, "| Method | FRR (%) | FAR (%) | EER (%) |");
                let _ = writeln!(out, "|---|---|---|---|");
                let eer = s.eer_pct.as_ref().map_or_else(|| "-".into(), pct);
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    self.method,
                    pct(&s.frr_pct),
                    pct(&s.far_pct),
                    eer
                );
            }
        }
        let unit_name = match self.task {
            Task::Spoof => "Resample",
            Task::Oneclass => "User",
            Task::Verify => "Fold",
        };
        let _ = writeln!(out, "\n| {unit_name} | Threshold | FRR (%) | FAR (%) |");
        let _ = writeln!(out, "|---|---|---|---|");
        for u in &self.units {
            let label = u.participant_id.map_or(u.index.to_string(), |p| p.to_string());
            let _ = writeln!(
                out,
                "| {label} | {:.6} | {:.2} | {:.2} |",
                u.threshold.value, u.frr_pct, u.far_pct
            );
        }
        if !self.per_user.is_empty() {
            let _ = writeln!(out, "\n| Participant | FRR (%) | FAR (%) | EER (%) |");
            let _ = writeln!(out, "|---|---|---|---|");
            for u in &self.per_user {
                let _ = writeln!(
                    out,
                    "| {} | {:.2} | {:.2} | {:.2} |",
                    u.participant_id, u.frr_pct, u.far_pct, u.eer_pct
                );
            }
        }
        out
    }

    /// `unit,threshold,frr,far` rows.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("unit,threshold,frr,far\n");
        for c in &self.curves {
            for p in &c.points {
                let _ = writeln!(out, "{},{},{},{}", c.unit, p.threshold, p.frr, p.far);
            }
        }
        out
    }
}
