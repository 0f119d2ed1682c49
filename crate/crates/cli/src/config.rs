//! JSON configuration schemas, one document per run. Unknown fields are
//! rejected so typos surface as configuration errors.

use serde::{Deserialize, Serialize};
use toplab::freqmap::PersistenceConfig;
use toplab::integrator::IntegratorConfig;
use toplab::models::{CoupledConfig, TopParams};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![0.5 * (self.min + self.max)];
        }
        (0..self.count)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub u: [f64; 3],
    pub v: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledBlock {
    pub config: CoupledConfig,
    pub x_osc: Vec<f64>,
    pub y_osc: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub top: TopParams,
    pub initial: InitialState,
    pub integrator: IntegratorConfig,
    pub t_end: f64,
    #[serde(default = "one")]
    pub sample_every: usize,
    #[serde(default)]
    pub coupled: Option<CoupledBlock>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpectrumConfig {
    pub c_values: Vec<f64>,
    pub a_range: Range,
    #[serde(default = "default_classify_tol")]
    pub tol: f64,
}

fn default_classify_tol() -> f64 {
    toplab::linstab::DEFAULT_CLASSIFY_TOL
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnfoldingBlock {
    pub lambda0: f64,
    #[serde(default)]
    pub mu1: f64,
    pub mu2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub exps: [u8; 4],
    pub coeff: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripBlock {
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalFormConfig {
    pub unfolding: UnfoldingBlock,
    #[serde(default)]
    pub omega: Vec<f64>,
    /// Higher-order terms of the Hamiltonian (degree >= 3); the quadratic
    /// part is implied by `unfolding`.
    #[serde(default)]
    pub terms: Vec<PolyTerm>,
    /// When set, build the input by pushing the given truncation through a
    /// seeded random cubic generator instead of using `terms`.
    #[serde(default)]
    pub roundtrip: Option<RoundtripBlock>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsBlock {
    pub lambda0: f64,
    #[serde(default)]
    pub mu1: f64,
    pub mu2: f64,
    pub b: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
}

impl CoefficientsBlock {
    pub fn to_coeffs(&self) -> toplab::normalform::NormalFormCoefficients {
        toplab::normalform::NormalFormCoefficients {
            lambda0: self.lambda0,
            mu1: self.mu1,
            mu2: self.mu2,
            b: self.b,
            c1: self.c1,
            c2: self.c2,
            omega: vec![],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopSurfaceBlock {
    pub c: f64,
    pub u3_range: Range,
    pub omega_range: Range,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrataConfig {
    pub coeffs: CoefficientsBlock,
    pub m_range: Range,
    #[serde(default)]
    pub top: Option<TopSurfaceBlock>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiophScanConfig {
    /// Internal frequency vector (held fixed across the scan).
    pub omega: Vec<f64>,
    /// Base rotation frequency of the unfolding supplying ω^N.
    pub lambda0: f64,
    pub mu2_range: Range,
    /// Optional second scan axis scaling the internal frequencies.
    #[serde(default)]
    pub scale_range: Option<Range>,
    pub dioph: toplab::dioph::DiophParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTerm {
    pub frequency: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticBlock {
    pub terms: Vec<SyntheticTerm>,
    pub n: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaffConfig {
    #[serde(default)]
    pub synthetic: Option<SyntheticBlock>,
    /// Alternative input: integrate the top and analyze `u₁ + i u₂`.
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    #[serde(default = "default_refine_tol")]
    pub refine_tol: f64,
}

fn default_max_terms() -> usize {
    5
}

fn default_refine_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopBlock {
    pub mu2: f64,
    #[serde(default)]
    pub radius_s: Option<f64>,
    #[serde(default)]
    pub radius_g: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_turns")]
    pub turns: i32,
    /// Explicit polygon; overrides the ellipse when present.
    #[serde(default)]
    pub nodes: Option<Vec<(f64, f64)>>,
}

fn default_steps() -> usize {
    32
}

fn default_turns() -> i32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonodromyConfig {
    pub coeffs: CoefficientsBlock,
    #[serde(rename = "loop")]
    pub loop_spec: LoopBlock,
}

/// Top-level persistence config is the library one.
pub type PersistenceRun = PersistenceConfig;
