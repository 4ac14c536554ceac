//! Run configuration: a single TOML file with nested sections, loaded
//! and validated before any compute starts. CLI flags override keys.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{AccommodationProfile, Domain, DomainKind};
use crate::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default = "default_eps_sweep")]
    pub eps_sweep: Vec<f64>,
}

fn default_seed() -> u64 {
    20260826
}

fn default_output_dir() -> String {
    std::env::var("BTE_OUTPUT_DIR").unwrap_or_else(|_| "out".into())
}

fn default_eps_sweep() -> Vec<f64> {
    vec![0.4, 0.2, 0.1]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    /// "ball" or "cylinder".
    pub shape: String,
    pub epsilon: f64,
    #[serde(default = "one")]
    pub radius_base: f64,
    #[serde(default = "one")]
    pub half_length_base: f64,
    /// Constant accommodation; ignored when `caps_diffuse` is set.
    #[serde(default = "one")]
    pub iota: f64,
    /// Diffuse caps + specular lateral wall (the cylinder default).
    #[serde(default = "yes")]
    pub caps_diffuse: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            shape: "cylinder".into(),
            epsilon: 0.5,
            radius_base: 1.0,
            half_length_base: 1.0,
            iota: 1.0,
            caps_diffuse: true,
        }
    }
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        match self.shape.as_str() {
            "ball" => Domain::ball(self.radius_base, self.epsilon, self.iota),
            "cylinder" => {
                if self.caps_diffuse {
                    Domain::cylinder(self.half_length_base, self.radius_base, self.epsilon)
                } else {
                    Domain::new(
                        DomainKind::Cylinder {
                            half_length_base: self.half_length_base,
                            disk_radius_base: self.radius_base,
                        },
                        self.epsilon,
                        AccommodationProfile::Constant(self.iota),
                    )
                }
            }
            other => Err(Error::ConfigInvalid(format!("unknown domain shape '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub v_max: f64,
    pub n_v: usize,
    /// Pinned majorant constant; omit to refit (slow).
    pub c_k: Option<f64>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { v_max: 4.0, n_v: 8, c_k: Some(1.6) }
    }
}

impl KernelSpec {
    pub fn build(&self) -> Result<crate::collision::CollisionKernel> {
        if !(self.v_max > 0.0) || self.n_v < 4 {
            return Err(Error::ConfigInvalid(
                "kernel needs v_max > 0 and at least 4 nodes per axis".into(),
            ));
        }
        Ok(match self.c_k {
            Some(c) => crate::collision::CollisionKernel::with_c_k(
                self.v_max,
                self.n_v,
                crate::collision::QuadratureRule::Midpoint,
                c,
            ),
            None => crate::collision::CollisionKernel::new(
                self.v_max,
                self.n_v,
                crate::collision::QuadratureRule::Midpoint,
            ),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub alpha: f64,
    pub a_radius: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Spatial cells per unit length (axial grids).
    pub cells_per_unit: f64,
    /// Weight exponent q of ω(v) = ⟨v⟩^q.
    pub weight_exponent: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            alpha: 1.0,
            a_radius: 6.0,
            tol: 1e-7,
            max_iter: 30,
            dt: 0.02,
            horizon: 30.0,
            cells_per_unit: 4.0,
            weight_exponent: 10.0,
        }
    }
}

impl SolverSpec {
    pub fn build(&self) -> Result<crate::transport::SolverConfig> {
        let cfg = crate::transport::SolverConfig {
            alpha: self.alpha,
            a_radius: self.a_radius,
            tol: self.tol,
            max_iter: self.max_iter,
            dt: self.dt,
            horizon: self.horizon,
            scheme: crate::transport::Scheme::MildDuhamel,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    pub trajectories: u64,
    pub random_inputs: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { trajectories: 100_000, random_inputs: 20 }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Every referenced spec must construct successfully before any
    /// compute starts.
    pub fn validate(&self) -> Result<()> {
        self.domain.build()?;
        self.kernel.build()?;
        self.solver.build()?;
        if self.eps_sweep.is_empty() || self.eps_sweep.iter().any(|&e| e <= 0.0) {
            return Err(Error::ConfigInvalid("eps_sweep must be positive and non-empty".into()));
        }
        Ok(())
    }
}
