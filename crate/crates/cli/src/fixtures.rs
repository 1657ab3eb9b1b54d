//! The tomography fixture file.

use std::path::Path;

use icent_core::linalg::{Mat4, C64};
use icent_core::qstate::{fixtures, DensityMatrix4};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const BASIS: &str = "HH,HV,VH,VV";
pub const DEFAULT_PATH: &str = "fixtures/tomography_states.json";
/// Copy of the shipped file, used when no file is found on disk.
pub const EMBEDDED: &str = include_str!("../../../fixtures/tomography_states.json");

/// Limits for a printed (two-decimal) matrix to count as physical.
pub const EIGEN_FLOOR: f64 = -0.02;
pub const TRACE_TOL: f64 = 0.02;
pub const HERMITIAN_TOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub basis: String,
    #[serde(default)]
    pub layout: Option<String>,
    pub states: Vec<FixtureEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub name: String,
    /// Row-major `[re, im]` pairs.
    pub matrix: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub printed: Mat4,
    /// Physical projection of `printed`.
    pub state: DensityMatrix4,
}

fn bad(name: &str, reason: impl Into<String>) -> CliError {
    CliError::Fixture { name: name.into(), reason: reason.into() }
}

impl FixtureEntry {
    pub fn to_fixture(&self) -> Result<Fixture> {
        let name = self.name.as_str();
        if self.matrix.len() != 16 {
            return Err(bad(name, format!("expected 16 entries, found {}", self.matrix.len())));
        }
        let mut m = Mat4::zeros();
        for (k, [re, im]) in self.matrix.iter().enumerate() {
            if !(re.is_finite() && im.is_finite()) {
                return Err(bad(name, format!("entry {k} is not finite")));
            }
            m[(k / 4, k % 4)] = C64::new(*re, *im);
        }
        if m.hermitian_deviation() > HERMITIAN_TOL {
            return Err(bad(name, format!("not Hermitian (deviation {:.3})", m.hermitian_deviation())));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(bad(name, format!("trace {:.4} differs from 1", tr.re)));
        }
        let min_eig = m.hermitian_eigen().values[0];
        if min_eig < EIGEN_FLOOR {
            return Err(bad(name, format!("eigenvalue {min_eig:.4} below {EIGEN_FLOOR}")));
        }
        let state = DensityMatrix4::project(&m.hermitian_part()).map_err(|e| bad(name, e.to_string()))?;
        Ok(Fixture { name: self.name.clone(), printed: m, state })
    }
}

pub fn parse(text: &str, origin: &Path) -> Result<Vec<Fixture>> {
    let file: FixtureFile =
        serde_json::from_str(text).map_err(|source| CliError::Json { path: origin.into(), source })?;
    if file.basis != BASIS {
        return Err(CliError::BadInput(format!("{}: basis {:?}, expected {BASIS:?}", origin.display(), file.basis)));
    }
    file.states.iter().map(FixtureEntry::to_fixture).collect()
}

pub fn load(path: &Path) -> Result<Vec<Fixture>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path)
}

/// The given file, else `fixtures/tomography_states.json` under the working
/// directory, else the embedded copy.
pub fn load_default(path: Option<&Path>) -> Result<Vec<Fixture>> {
    match path {
        Some(p) => load(p),
        None if Path::new(DEFAULT_PATH).exists() => load(Path::new(DEFAULT_PATH)),
        None => parse(EMBEDDED, Path::new("<embedded>")),
    }
}

pub fn builtin() -> Vec<Fixture> {
    parse(EMBEDDED, Path::new("<embedded>")).expect("embedded fixtures are valid")
}

/// Checks that the loaded set is exactly the five shipped matrices.
pub fn check_against_builtin(loaded: &[Fixture]) -> Result<()> {
    for (k, name) in fixtures::NAMES.iter().enumerate() {
        let f = loaded.iter().find(|f| f.name == *name).ok_or_else(|| bad(name, "missing"))?;
        let diff = f.printed.max_abs_diff(&fixtures::printed(k));
        if diff > 1e-12 {
            return Err(bad(name, format!("differs from the reference matrix by {diff:.3e}")));
        }
    }
    Ok(())
}

pub fn to_file(fixtures: &[Fixture]) -> FixtureFile {
    FixtureFile {
        basis: BASIS.into(),
        layout: Some("row-major [re, im] pairs".into()),
        states: fixtures
            .iter()
            .map(|f| FixtureEntry {
                name: f.name.clone(),
                matrix: f.printed.rows.iter().flatten().map(|z| [z.re, z.im]).collect(),
            })
            .collect(),
    }
}
