//! JSON problem configuration.
//!
//! ```json
//! {
//!   "domain": { "a": 0.0, "b": 1.0 },
//!   "mesh_n": 64,
//!   "f": { "kind": "affine_quadratic", "params": [1.0, 1.0] },
//!   "g": { "kind": "zero" },
//!   "subspace": { "kind": "full" },
//!   "solver": { "tol_g": 1e-10, "tol_r": 1e-8, "max_iters": 20000, "r_max_guard": 1e6 },
//!   "seed": 0,
//!   "n_starts": 8,
//!   "r_list": [0.01, 0.04, 0.09]
//! }
//! ```
//!
//! Unknown keys are rejected. A custom subspace points at a JSON file holding
//! an array of spanning vectors (nodal values); relative paths resolve against
//! the configuration file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::galerkin::{Field, GalerkinSpace, Subspace};
use crate::integrand::{IntegrandKind, IntegrandSpec, Role};
use crate::solvers::{Problem, SolverSettings};

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn serialize_extended<S: Serializer>(value: &f64, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    if value.is_finite() {
        serializer.serialize_f64(*value)
    } else if value.is_nan() {
        serializer.serialize_str("nan")
    } else if *value > 0.0 {
        serializer.serialize_str("inf")
    } else {
        serializer.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl IntegrandConfig {
    pub fn zero() -> Self {
        Self {
            kind: "zero".into(),
            params: Vec::new(),
        }
    }

    pub fn build(&self, role: Role) -> Result<IntegrandSpec> {
        IntegrandSpec::new(IntegrandKind::from_name(&self.kind, &self.params)?, role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceKind {
    #[default]
    Full,
    ZeroBoundary,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SubspaceConfig {
    pub kind: SubspaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_file: Option<PathBuf>,
}

fn default_n_starts() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    pub mesh_n: usize,
    pub f: IntegrandConfig,
    #[serde(default = "IntegrandConfig::zero")]
    pub g: IntegrandConfig,
    #[serde(default)]
    pub subspace: SubspaceConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub seed: u64,
    /// Random starts for the threshold and uniqueness multistarts.
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    #[serde(default)]
    pub r_list: Vec<f64>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Settings with every tolerance checked for sanity.
    pub fn settings(&self) -> Result<SolverSettings> {
        let s = self.solver;
        if !(s.tol_g > 0.0 && s.tol_r > 0.0 && s.r_max_guard > 0.0 && s.max_iters > 0) {
            return Err(Error::Config(
                "solver tolerances, max_iters and r_max_guard must be positive".into(),
            ));
        }
        Ok(s)
    }

    /// Builds the validated problem. `base_dir` anchors a relative basis file.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<Problem> {
        if self.mesh_n < 1 {
            return Err(Error::Config("mesh_n must be at least 1".into()));
        }
        if let Some(r) = self.r_list.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("r_list entries must be positive, got {r}")));
        }
        self.settings()?;
        let space = GalerkinSpace::new(self.domain.a, self.domain.b, self.mesh_n)?;
        let f = self.f.build(Role::F)?;
        let g = self.g.build(Role::G)?;
        let subspace = self.build_subspace(&space, base_dir)?;
        Problem::new(space, subspace, f, g)
    }

    fn build_subspace(&self, space: &GalerkinSpace, base_dir: Option<&Path>) -> Result<Subspace> {
        match (self.subspace.kind, &self.subspace.basis_file) {
            (SubspaceKind::Full, None) => Ok(Subspace::Full),
            (SubspaceKind::ZeroBoundary, None) => Ok(Subspace::ZeroBoundary),
            (SubspaceKind::Custom, Some(file)) => {
                let path = match base_dir {
                    Some(dir) if file.is_relative() => dir.join(file),
                    _ => file.clone(),
                };
                let text = fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!("cannot read basis file {}: {e}", path.display()))
                })?;
                let vectors: Vec<Vec<f64>> = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("basis file {}: {e}", path.display())))?;
                let fields: Vec<Field> = vectors.into_iter().map(Field::from_vec).collect();
                Subspace::from_spanning(space, &fields)
            }
            (SubspaceKind::Custom, None) => {
                Err(Error::Config("custom subspace needs a basis_file".into()))
            }
            (_, Some(_)) => Err(Error::Config(
                "basis_file is only valid for the custom subspace".into(),
            )),
        }
    }
}
