//! Run configurations. Every document rejects unknown keys.

use std::f64::consts::PI;
use std::path::Path;

use halfspace::extension::{BoundaryShape, ExtensionKind, ExtensionOptions, FluxLimitOptions};
use halfspace::grid::HalfSpaceGrid;
use halfspace::liouville::{ExperimentConfig, Scenario};
use halfspace::operator::BoundaryDatum;
use halfspace::solver::SolveConfig;
use halfspace::{KernelVariant, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    /// Defaults to `2 · half_width`.
    #[serde(default)]
    pub height: Option<f64>,
    pub tangential_nodes: usize,
}

impl GridSpec {
    pub fn build(&self, n: usize) -> Result<HalfSpaceGrid, CliError> {
        let h = self.height.unwrap_or(2.0 * self.half_width);
        Ok(HalfSpaceGrid::new(n, self.half_width, h, self.tangential_nodes)?)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 2.0,
            height: Some(2.0),
            tangential_nodes: 65,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEvalConfig {
    pub n: usize,
    pub kernel: KernelVariant,
    pub points: Vec<Vec<f64>>,
}

impl Default for KernelEvalConfig {
    fn default() -> Self {
        Self {
            n: 2,
            kernel: KernelVariant::PoissonType { a: 0.0 },
            points: vec![vec![0.0, 1.0], vec![1.0, 1.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelNormConfig {
    pub n: usize,
    pub kernel: KernelVariant,
}

impl Default for KernelNormConfig {
    fn default() -> Self {
        Self {
            n: 2,
            kernel: KernelVariant::PoissonType { a: 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvarianceConfig {
    pub dimensions: Vec<usize>,
    /// Exponents to test; `None` means `{-0.5, 0, 0.5, 2-n}`.
    pub exponents: Option<Vec<f64>>,
    pub steps: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
    pub min_rate: f64,
}

impl Default for InvarianceConfig {
    fn default() -> Self {
        Self {
            dimensions: vec![2, 3],
            exponents: None,
            steps: vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
            center: vec![0.0],
            radius: 1.0,
            min_rate: 1.8,
        }
    }
}

/// A function of the node position used for boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `c_star · x_n^{1-a} + c2`
    Family { c_star: f64, c2: f64 },
    /// `Σ_k c_k cos(kπ x₁/L + φ_k)` (times the same in `x₂` for `n = 3`), with
    /// `c_k ∈ [-amplitude, amplitude]` and phases drawn from the run seed.
    RandomFourier { amplitude: f64, modes: usize },
}

type Boxed = Box<dyn Fn(&Point) -> f64 + Send + Sync>;

impl FieldSpec {
    fn build(&self, a: f64, half_width: f64, rng: &mut ChaCha8Rng) -> Boxed {
        match *self {
            FieldSpec::Constant { value } => Box::new(move |_| value),
            FieldSpec::Family { c_star, c2 } => {
                let p = 1.0 - a;
                Box::new(move |q: &Point| c_star * q.xn().powf(p) + c2)
            }
            FieldSpec::RandomFourier { amplitude, modes } => {
                let terms: Vec<(f64, f64, f64)> = (1..=modes)
                    .map(|k| {
                        (
                            k as f64 * PI / half_width,
                            rng.gen_range(-amplitude..=amplitude),
                            rng.gen_range(0.0..2.0 * PI),
                        )
                    })
                    .collect();
                Box::new(move |q: &Point| {
                    let g = |x: f64| terms.iter().map(|(w, c, ph)| c * (w * x + ph).cos()).sum::<f64>();
                    let t = q.tangential();
                    if t.len() == 1 {
                        g(t[0])
                    } else {
                        g(t[0]) * g(t[1])
                    }
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    Dirichlet { bottom: FieldSpec, lateral_top: FieldSpec },
    /// `flux` is `lim x_n^a ∂_n u` at the bottom.
    Neumann { flux: FieldSpec, lateral_top: FieldSpec },
}

impl BoundarySpec {
    pub fn build(&self, a: f64, half_width: f64, seed: u64) -> BoundaryDatum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            BoundarySpec::Dirichlet { bottom, lateral_top } => {
                let b = bottom.build(a, half_width, &mut rng);
                let t = lateral_top.build(a, half_width, &mut rng);
                BoundaryDatum::dirichlet(b, t)
            }
            BoundarySpec::Neumann { flux, lateral_top } => {
                let t = lateral_top.build(a, half_width, &mut rng);
                if let FieldSpec::Constant { value } = flux {
                    if *value == 0.0 {
                        return BoundaryDatum::zero_flux(t);
                    }
                }
                let f = flux.build(a, half_width, &mut rng);
                BoundaryDatum::weighted_neumann(f, t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRunConfig {
    pub n: usize,
    pub a: f64,
    pub grid: GridSpec,
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub solver: SolveConfig,
}

impl Default for SolveRunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            a: 0.5,
            grid: GridSpec::default(),
            boundary: BoundarySpec::Dirichlet {
                bottom: FieldSpec::Constant { value: 1.0 },
                lateral_top: FieldSpec::Constant { value: 1.0 },
            },
            solver: SolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendConfig {
    pub kind: ExtensionKind,
    pub a: f64,
    pub data: BoundaryShape,
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub options: ExtensionOptions,
}

impl Default for ExtendConfig {
    fn default() -> Self {
        Self {
            kind: ExtensionKind::Dirichlet,
            a: 0.0,
            data: BoundaryShape::Gaussian {
                amplitude: 1.0,
                center: vec![0.0],
                width: 1.0,
            },
            points: vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.1]],
            options: ExtensionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracLapConfig {
    pub s: f64,
    pub data: BoundaryShape,
    /// Tangential coordinates of the evaluation points.
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub options: FluxLimitOptions,
}

impl Default for FracLapConfig {
    fn default() -> Self {
        Self {
            s: 0.5,
            data: BoundaryShape::Gaussian {
                amplitude: 1.0,
                center: vec![0.0],
                width: 1.0,
            },
            points: vec![vec![0.0], vec![0.5], vec![1.0]],
            options: FluxLimitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `1 + c · y_n^{1-a}`
    Positive { c: f64 },
    /// `y_n^{1-a} - 1`
    Negative,
    /// `c · y_n^{1-a}`, scanned with the logarithmic transform at `a = 2 - n`.
    Logarithmic { c: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSampling {
    pub count: usize,
    /// Centres are uniform in `[-center_range, center_range]^{n-1}`.
    pub center_range: f64,
    /// Radii are log-uniform in this interval.
    pub radius_range: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub half_width: f64,
    pub height: f64,
    pub per_axis: usize,
    pub quasi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingSphereConfig {
    pub n: usize,
    pub a: f64,
    pub family: FamilySpec,
    pub maps: MapSampling,
    pub probes: ProbeSpec,
    #[serde(default = "default_scan_tolerance")]
    pub tolerance: f64,
}

fn default_scan_tolerance() -> f64 {
    1e-12
}

impl Default for MovingSphereConfig {
    fn default() -> Self {
        Self {
            n: 3,
            a: 0.0,
            family: FamilySpec::Positive { c: 1.0 },
            maps: MapSampling {
                count: 50,
                center_range: 2.0,
                radius_range: [0.05, 2.0],
            },
            probes: ProbeSpec {
                half_width: 4.0,
                height: 4.0,
                per_axis: 10,
                quasi: 100,
            },
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub n: usize,
    pub a: f64,
    pub scenario: Scenario,
    pub grid: GridSpec,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            n: 2,
            a: 0.5,
            scenario: Scenario::Dirichlet {
                c_star: 2.0,
                c2: 0.0,
            },
            grid: GridSpec::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}
