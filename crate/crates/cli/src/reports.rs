//! Output documents that have no counterpart in the library's file formats.

use serde::{Deserialize, Serialize};

use poincert::certsolver::VerifyReport;
use poincert::compression::ExponentVerdict;
use poincert::expander::SpectralStats;

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOutput {
    pub lambda2: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub k: Option<usize>,
    pub edge_convention: String,
}

impl From<&SpectralStats> for SpectralOutput {
    fn from(s: &SpectralStats) -> Self {
        SpectralOutput {
            lambda2: s.lambda2,
            c: s.c,
            k: s.k,
            edge_convention: s.convention.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub verdict: String,
    /// `None` when no sample was checked (JSON has no infinities).
    pub max_excess: Option<f64>,
    pub expectations: Vec<f64>,
}

impl From<&VerifyReport> for VerifyOutput {
    fn from(r: &VerifyReport) -> Self {
        VerifyOutput {
            verdict: if r.pass { "PASS" } else { "FAIL" }.to_string(),
            max_excess: r.max_excess.is_finite().then_some(r.max_excess),
            expectations: r.expectations.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleVerdict {
    pub n: f64,
    pub bound: f64,
    pub allowed: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub beta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub p: u32,
    pub pass: bool,
    pub scales: Vec<ScaleVerdict>,
}

impl ExponentReport {
    pub fn new(beta: f64, k: f64, p: u32, verdicts: &[ExponentVerdict]) -> Self {
        ExponentReport {
            beta,
            k,
            p,
            pass: verdicts.iter().all(|v| v.pass),
            scales: verdicts
                .iter()
                .map(|v| ScaleVerdict {
                    n: v.scale,
                    bound: v.bound,
                    allowed: v.allowed,
                    verdict: if v.pass { "PASS" } else { "FAIL" }.to_string(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedOutput {
    #[serde(rename = "T")]
    pub threshold: f64,
    /// Best minimum far-pair squared distance found.
    pub value: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutOutput {
    #[serde(rename = "T")]
    pub threshold: f64,
    pub value: f64,
}
