//! JSON file formats.
//!
//! Every document carries `"version": 1` and a `"kind"` tag. Numbers are
//! written in shortest round-trip form, so reading a written document gives
//! back an equal value. Parsers run the same validation as the in-memory
//! constructors, so NaN, negative distances and asymmetric measures are
//! rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::certsolver::Certificate;
use crate::compression::CompressionReport;
use crate::cones::{Exponent, Kernel};
use crate::error::{Error, Result};
use crate::expander::{ConversionResult, EdgeConvention, SpectralStats};
use crate::group::{CndFunction, ElementMeasure, GroupCertificate, GroupTable};
use crate::linalg::Matrix;
use crate::metric::{FiniteMetricSpace, Graph, PairMeasure};

pub const FORMAT_VERSION: u32 = 1;

/// A value with a JSON file representation.
pub trait Document: Sized {
    const KIND: &'static str;
    type Body: Serialize + DeserializeOwned;

    fn to_body(&self) -> Self::Body;
    fn from_body(body: Self::Body) -> Result<Self>;

    /// Single-line, newline-terminated JSON.
    fn to_json(&self) -> String {
        let env = Envelope {
            version: FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            body: self.to_body(),
        };
        let mut s = serde_json::to_string(&env).expect("documents serialize");
        s.push('\n');
        s
    }

    fn from_json(text: &str) -> Result<Self> {
        let env: Envelope<Self::Body> = serde_json::from_str(text)?;
        if env.version != FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported format version {}", env.version)));
        }
        if env.kind != Self::KIND {
            return Err(Error::invalid(format!(
                "expected a \"{}\" document, found \"{}\"",
                Self::KIND,
                env.kind
            )));
        }
        Self::from_body(env.body)
    }

    fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<B> {
    version: u32,
    kind: String,
    #[serde(flatten)]
    body: B,
}

/// Reads only the `"kind"` tag of a document.
pub fn peek_kind(text: &str) -> Result<String> {
    #[derive(Deserialize)]
    struct Tag {
        kind: String,
    }
    Ok(serde_json::from_str::<Tag>(text)?.kind)
}

fn square(n: usize, rows: Vec<Vec<f64>>, what: &str) -> Result<Matrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(format!("{what} must be {n}×{n}")));
    }
    Matrix::from_rows(&rows)
}

fn exponent(p: u32) -> Result<Exponent> {
    Exponent::try_from(p)
}

type Triples = Vec<(usize, usize, f64)>;

#[derive(Serialize, Deserialize)]
pub struct SpaceBody {
    n: usize,
    labels: Vec<String>,
    dist: Vec<Vec<f64>>,
}

impl Document for FiniteMetricSpace {
    const KIND: &'static str = "metric_space";
    type Body = SpaceBody;

    fn to_body(&self) -> SpaceBody {
        SpaceBody {
            n: self.len(),
            labels: self.labels().to_vec(),
            dist: self.matrix().to_rows(),
        }
    }

    fn from_body(b: SpaceBody) -> Result<Self> {
        FiniteMetricSpace::new(b.labels, square(b.n, b.dist, "dist")?)
    }
}

#[derive(Serialize, Deserialize)]
pub struct GraphBody {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Document for Graph {
    const KIND: &'static str = "graph";
    type Body = GraphBody;

    fn to_body(&self) -> GraphBody {
        GraphBody {
            n: self.num_vertices(),
            edges: self.edges().collect(),
        }
    }

    fn from_body(b: GraphBody) -> Result<Self> {
        Graph::new(b.n, b.edges)
    }
}

/// A kernel together with the exponent it is read under.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFile {
    pub p: Exponent,
    pub kernel: Kernel,
}

#[derive(Serialize, Deserialize)]
pub struct KernelBody {
    p: u32,
    n: usize,
    q: Vec<Vec<f64>>,
}

impl Document for KernelFile {
    const KIND: &'static str = "kernel";
    type Body = KernelBody;

    fn to_body(&self) -> KernelBody {
        KernelBody {
            p: self.p.value(),
            n: self.kernel.len(),
            q: self.kernel.to_rows(),
        }
    }

    fn from_body(b: KernelBody) -> Result<Self> {
        Ok(KernelFile {
            p: exponent(b.p)?,
            kernel: Kernel::new(square(b.n, b.q, "q")?)?,
        })
    }
}

#[derive(Serialize, Deserialize)]
pub struct CertificateBody {
    p: u32,
    #[serde(rename = "T")]
    threshold: f64,
    bound: f64,
    n: usize,
    measure: Triples,
    duality_gap: f64,
    cuts: usize,
}

impl Document for Certificate {
    const KIND: &'static str = "certificate";
    type Body = CertificateBody;

    fn to_body(&self) -> CertificateBody {
        CertificateBody {
            p: self.p.value(),
            threshold: self.threshold,
            bound: self.bound,
            n: self.measure.num_points(),
            measure: self.measure.entries().collect(),
            duality_gap: self.duality_gap,
            cuts: self.cuts,
        }
    }

    fn from_body(b: CertificateBody) -> Result<Self> {
        if !(b.bound.is_finite() && b.bound >= 0.0) {
            return Err(Error::invalid("certificate bound must be finite and nonnegative"));
        }
        if !(b.threshold.is_finite() && b.threshold >= 0.0) {
            return Err(Error::invalid("certificate threshold must be finite and nonnegative"));
        }
        Ok(Certificate {
            p: exponent(b.p)?,
            threshold: b.threshold,
            bound: b.bound,
            measure: PairMeasure::new(b.n, b.measure)?,
            duality_gap: b.duality_gap,
            cuts: b.cuts,
        })
    }
}

#[derive(Serialize, Deserialize)]
pub struct GroupBody {
    order: usize,
    mult: Vec<Vec<usize>>,
    generators: Vec<usize>,
}

impl Document for GroupTable {
    const KIND: &'static str = "group";
    type Body = GroupBody;

    fn to_body(&self) -> GroupBody {
        GroupBody {
            order: self.order(),
            mult: self.table().to_vec(),
            generators: self.generators().to_vec(),
        }
    }

    fn from_body(b: GroupBody) -> Result<Self> {
        if b.mult.len() != b.order {
            return Err(Error::invalid(format!("table has {} rows for order {}", b.mult.len(), b.order)));
        }
        GroupTable::new(b.mult, b.generators)
    }
}

#[derive(Serialize, Deserialize)]
pub struct ConversionBody {
    r: f64,
    #[serde(rename = "K")]
    big_k: f64,
    #[serde(rename = "C")]
    c: f64,
    lambda2: f64,
    k: Option<usize>,
    edge_convention: String,
    far_mass_fraction: f64,
    n: usize,
    measure: Triples,
}

impl Document for ConversionResult {
    const KIND: &'static str = "conversion";
    type Body = ConversionBody;

    fn to_body(&self) -> ConversionBody {
        ConversionBody {
            r: self.r,
            big_k: self.big_k,
            c: self.spectral.c,
            lambda2: self.spectral.lambda2,
            k: self.spectral.k,
            edge_convention: self.spectral.convention.to_string(),
            far_mass_fraction: self.far_mass_fraction,
            n: self.measure.num_points(),
            measure: self.measure.entries().collect(),
        }
    }

    fn from_body(b: ConversionBody) -> Result<Self> {
        let convention: EdgeConvention = b.edge_convention.parse()?;
        Ok(ConversionResult {
            r: b.r,
            measure: PairMeasure::new(b.n, b.measure)?,
            big_k: b.big_k,
            far_mass_fraction: b.far_mass_fraction,
            spectral: SpectralStats {
                lambda2: b.lambda2,
                c: b.c,
                k: b.k,
                convention,
            },
        })
    }
}

#[derive(Serialize, Deserialize)]
pub struct CompressionBody {
    p: u32,
    #[serde(rename = "T_values")]
    thresholds: Vec<f64>,
    bounds: Vec<f64>,
    fitted_beta: f64,
    #[serde(rename = "K_fit")]
    k_fit: f64,
    residual: f64,
    fitted_points: usize,
}

impl Document for CompressionReport {
    const KIND: &'static str = "compression";
    type Body = CompressionBody;

    fn to_body(&self) -> CompressionBody {
        CompressionBody {
            p: self.p.value(),
            thresholds: self.thresholds.clone(),
            bounds: self.bounds.clone(),
            fitted_beta: self.fitted_beta,
            k_fit: self.k_fit,
            residual: self.residual,
            fitted_points: self.fitted_points,
        }
    }

    fn from_body(b: CompressionBody) -> Result<Self> {
        if b.thresholds.len() != b.bounds.len() || b.fitted_points > b.thresholds.len() {
            return Err(Error::invalid("compression report has inconsistent lengths"));
        }
        Ok(CompressionReport {
            p: exponent(b.p)?,
            thresholds: b.thresholds,
            bounds: b.bounds,
            fitted_beta: b.fitted_beta,
            k_fit: b.k_fit,
            residual: b.residual,
            fitted_points: b.fitted_points,
        })
    }
}

#[derive(Serialize, Deserialize)]
pub struct GroupCertificateBody {
    #[serde(rename = "T")]
    threshold: f64,
    bound: f64,
    /// Probability of each group element.
    measure: Vec<f64>,
    duality_gap: f64,
    cuts: usize,
    psi: Vec<f64>,
}

impl Document for GroupCertificate {
    const KIND: &'static str = "group_certificate";
    type Body = GroupCertificateBody;

    fn to_body(&self) -> GroupCertificateBody {
        GroupCertificateBody {
            threshold: self.threshold,
            bound: self.bound,
            measure: self.measure.weights.clone(),
            duality_gap: self.duality_gap,
            cuts: self.cuts,
            psi: self.psi.psi.clone(),
        }
    }

    fn from_body(b: GroupCertificateBody) -> Result<Self> {
        if b.psi.len() != b.measure.len() {
            return Err(Error::invalid("measure and ψ have different lengths"));
        }
        if b.psi.iter().any(|v| *v < 0.0) {
            return Err(Error::invalid("ψ has a negative value"));
        }
        Ok(GroupCertificate {
            threshold: b.threshold,
            bound: b.bound,
            measure: ElementMeasure::new(b.measure)?,
            duality_gap: b.duality_gap,
            cuts: b.cuts,
            psi: CndFunction { psi: b.psi },
        })
    }
}
