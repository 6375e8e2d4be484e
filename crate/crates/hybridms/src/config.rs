//! Run configuration: a single JSON document describing the mesh, degrees,
//! coefficient, sources and experiment parameters.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::AuditTolerances;
use crate::mesh::{CoarseMesh, MeshError, Rect};
use crate::problem::{CoeffSpec, Degrees, SourceTerm};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Mesh source: structured rectangle grid or a polygonal mesh file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSpec {
    Structured {
        nx: usize,
        ny: usize,
        /// [x0, y0, x1, y1]; the unit square when omitted.
        #[serde(default)]
        domain: Option<[f64; 4]>,
    },
    File {
        path: PathBuf,
    },
}

impl MeshSpec {
    pub fn build(&self) -> Result<CoarseMesh, MeshError> {
        match self {
            MeshSpec::Structured { nx, ny, domain } => {
                let d = domain
                    .map(|[x0, y0, x1, y1]| Rect { x0, y0, x1, y1 })
                    .unwrap_or(Rect::UNIT);
                CoarseMesh::structured(*nx, *ny, d)
            }
            MeshSpec::File { path } => crate::mesh::io::load_polygonal_mesh(path),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeshSpec::Structured { nx, ny, .. } => format!("structured-{nx}x{ny}"),
            MeshSpec::File { path } => format!("file:{}", path.display()),
        }
    }
}

/// Source term description (config-level).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// amplitude * sin(pi x) sin(pi y); amplitude defaults to 1.
    SinPiPi {
        #[serde(default)]
        amplitude: Option<f64>,
    },
    /// Explicit per-cell polynomial coefficients (scaled monomial basis).
    PiecewisePoly {
        degree: usize,
        coeffs: Vec<Vec<f64>>,
    },
    /// Random per-cell polynomial of the cell degree m (or `degree`).
    RandomPiecewise {
        seed: u64,
        #[serde(default)]
        degree: Option<usize>,
    },
    /// Expands to `count` random piecewise sources (multi-query suites).
    RandomSuite {
        count: usize,
        seed: u64,
    },
}

impl SourceSpec {
    /// Expand into concrete source terms (RandomSuite yields `count` terms).
    pub fn realize(&self, mesh: &CoarseMesh, m: usize) -> Result<Vec<SourceTerm>, ConfigError> {
        use rand::rngs::StdRng;
        use rand::{RngExt, SeedableRng};
        let random_pw = |mesh: &CoarseMesh, deg: usize, seed: u64| {
            let mut rng = StdRng::seed_from_u64(seed);
            let coeffs = (0..mesh.cells.len())
                .map(|_| {
                    nalgebra::DVector::from_fn(crate::poly::dim_cell(deg), |_, _| {
                        rng.random_range(-1.0..1.0)
                    })
                })
                .collect();
            SourceTerm::piecewise(mesh, deg, coeffs)
        };
        Ok(match self {
            SourceSpec::Zero => vec![SourceTerm::zero()],
            SourceSpec::Constant { value } => vec![SourceTerm::constant(*value)],
            SourceSpec::SinPiPi { amplitude } => {
                vec![SourceTerm::sin_pi_pi(amplitude.unwrap_or(1.0))]
            }
            SourceSpec::PiecewisePoly { degree, coeffs } => {
                if coeffs.len() != mesh.cells.len() {
                    return Err(ConfigError::Invalid(vec![format!(
                        "piecewise_poly supplies {} cells of coefficients, mesh has {}",
                        coeffs.len(),
                        mesh.cells.len()
                    )]));
                }
                let dim = crate::poly::dim_cell(*degree);
                if let Some(bad) = coeffs.iter().position(|c| c.len() != dim) {
                    return Err(ConfigError::Invalid(vec![format!(
                        "piecewise_poly cell {bad} has {} coefficients, degree {degree} needs {dim}",
                        coeffs[bad].len()
                    )]));
                }
                vec![SourceTerm::piecewise(
                    mesh,
                    *degree,
                    coeffs
                        .iter()
                        .map(|c| nalgebra::DVector::from_vec(c.clone()))
                        .collect(),
                )]
            }
            SourceSpec::RandomPiecewise { seed, degree } => {
                vec![random_pw(mesh, degree.unwrap_or(m), *seed)]
            }
            SourceSpec::RandomSuite { count, seed } => (0..*count)
                .map(|i| random_pw(mesh, m, seed.wrapping_add(i as u64)))
                .collect(),
        })
    }
}

/// Degrees with the conventional default m = k - 1 (m = 0 for k = 0).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DegreesSpec {
    pub k: usize,
    #[serde(default)]
    pub m: Option<usize>,
}

impl DegreesSpec {
    pub fn resolve(&self) -> Degrees {
        Degrees::new(self.k, self.m)
    }
}

/// Convergence-study parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    /// Structured division counts (H = 1/n on the unit square).
    #[serde(default = "default_divisions")]
    pub divisions: Vec<usize>,
    /// Face degrees to study.
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
}

fn default_divisions() -> Vec<usize> {
    vec![2, 4, 8, 16]
}

fn default_ks() -> Vec<usize> {
    vec![0, 1]
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            divisions: default_divisions(),
            ks: default_ks(),
        }
    }
}

/// Tolerance overrides; defaults match the acceptance suite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub equivalence_gap: f64,
    pub jump: f64,
    pub neumann: f64,
    pub compatibility: f64,
    pub divergence: f64,
    pub flux_continuity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let a = AuditTolerances::default();
        Tolerances {
            equivalence_gap: 1e-9,
            jump: a.jump,
            neumann: a.neumann,
            compatibility: a.compatibility,
            divergence: a.divergence,
            flux_continuity: a.flux_continuity,
        }
    }
}

impl Tolerances {
    pub fn audit(&self) -> AuditTolerances {
        AuditTolerances {
            jump: self.jump,
            neumann: self.neumann,
            compatibility: self.compatibility,
            divergence: self.divergence,
            flux_continuity: self.flux_continuity,
        }
    }
}

/// The experiment kinds the runner understands (mirrors the CLI subcommands).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Offline,
    SolveMhm,
    SolveMshho,
    SolveFacebased,
    Equivalence,
    Convergence,
    Audit,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Offline => "offline",
            Experiment::SolveMhm => "solve-mhm",
            Experiment::SolveMshho => "solve-mshho",
            Experiment::SolveFacebased => "solve-facebased",
            Experiment::Equivalence => "equivalence",
            Experiment::Convergence => "convergence",
            Experiment::Audit => "audit",
        }
    }
}

/// The full run configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub refinement: u32,
    pub degrees: DegreesSpec,
    pub coefficient: CoeffSpec,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    /// Optional declared experiment; must match the subcommand when present.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub convergence: Option<ConvergenceSpec>,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Validate against an experiment kind; collects every defect.
    pub fn validate(&self, experiment: Experiment) -> Result<(), ConfigError> {
        let mut items = Vec::new();
        if let Some(declared) = self.experiment {
            if declared != experiment {
                items.push(format!(
                    "config declares experiment '{}' but the subcommand is '{}'",
                    declared.name(),
                    experiment.name()
                ));
            }
        }
        if let MeshSpec::Structured { nx, ny, domain } = &self.mesh {
            if *nx < 1 || *ny < 1 {
                items.push(format!("structured mesh needs nx, ny >= 1 (got {nx}x{ny})"));
            }
            if let Some([x0, y0, x1, y1]) = domain {
                if x1 <= x0 || y1 <= y0 {
                    items.push("structured mesh domain rectangle is degenerate".into());
                }
            }
        }
        if let Err(e) = self.coefficient.validate() {
            items.push(e);
        }
        let needs_sources = matches!(
            experiment,
            Experiment::SolveMhm
                | Experiment::SolveMshho
                | Experiment::SolveFacebased
                | Experiment::Equivalence
                | Experiment::Audit
        );
        if needs_sources && self.sources.is_empty() {
            items.push(format!(
                "experiment '{}' needs at least one source term",
                experiment.name()
            ));
        }
        if items.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(items))
        }
    }

    pub fn degrees(&self) -> Degrees {
        self.degrees.resolve()
    }
}
