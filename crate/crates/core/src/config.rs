//! TOML run configuration.
//!
//! ```toml
//! [grid]
//! dim = 1            # 1, 2 or 3
//! points = 64        # per axis, even, >= 4
//! length = 40.0      # per axis
//!
//! [particle]
//! mass = 1.0
//! charge = 1.0
//! cffv_n = 1.0       # optional, defaults to max(mass, 1)
//! hbar_scale = 1.0
//!
//! [field]
//! kind = "uniform_E" # free | uniform_E | uniform_B | harmonic_scalar | crossed_EH | polynomial
//! ex = 0.01
//! window_width = 5.0 # optional, defaults to length / 8; 0 disables the taper
//! ```
//!
//! Field keys per kind: `uniform_E` takes `ex ey ez`; `uniform_B` takes
//! `hx hy hz gauge`; `harmonic_scalar` takes `k`; `crossed_EH` takes
//! `ex ey ez hx hy hz gauge`; `polynomial` takes `phi0 grad hess hx hy hz gauge`.
//! Every kind accepts `window_width` and `stationary`. Any other key is an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldConfig, FieldKind, Gauge, Mat3, Vec3};
use crate::operator::Grid;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    pub points: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dim: 1, points: 64, length: 40.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ParticleSection {
    pub mass: f64,
    pub charge: f64,
    pub cffv_n: Option<f64>,
    pub hbar_scale: f64,
}

impl Default for ParticleSection {
    fn default() -> Self {
        Self { mass: 1.0, charge: 1.0, cffv_n: None, hbar_scale: 1.0 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default = "default_kind")]
    pub kind: FieldKind,
    pub ex: Option<f64>,
    pub ey: Option<f64>,
    pub ez: Option<f64>,
    pub hx: Option<f64>,
    pub hy: Option<f64>,
    pub hz: Option<f64>,
    pub k: Option<f64>,
    pub phi0: Option<f64>,
    pub grad: Option<Vec3>,
    pub hess: Option<Mat3>,
    pub gauge: Option<Gauge>,
    pub window_width: Option<f64>,
    pub stationary: Option<bool>,
}

fn default_kind() -> FieldKind {
    FieldKind::Free
}

/// Which Hamiltonian `spectrum` diagonalises.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum HamiltonianKind {
    #[serde(rename = "cffv")]
    Cffv,
    #[serde(rename = "fw-exact")]
    FwExact,
    #[serde(rename = "fw-closed")]
    FwClosed,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub hamiltonian: HamiltonianKind,
    /// Number of Landau levels tabulated for magnetic fields.
    pub levels: usize,
    /// Exclude the zero-momentum mode (massless runs).
    pub exclude_zero_mode: bool,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { hamiltonian: HamiltonianKind::Cffv, levels: 5, exclude_zero_mode: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Parameter values for the N sweep; empty means `{m, 2m, 5m}` (or `{0.5, 1, 3}` when massless).
    pub n_list: Vec<f64>,
    pub tol: f64,
    /// Steps and time step of the twin DKP/CFFV evolution.
    pub steps: usize,
    pub dt: f64,
    /// Random test points for the dipole gradient check.
    pub samples: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { n_list: Vec::new(), tol: 1e-9, steps: 200, dt: 0.01, samples: 20 }
    }
}

/// Gaussian wavepacket `exp(-|r - center|^2 / (4 width^2) + i momentum.r)`
/// placed on the positive-energy branch.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PacketSection {
    pub center: Vec3,
    pub momentum: Vec3,
    pub width: f64,
}

impl Default for PacketSection {
    fn default() -> Self {
        Self { center: [0.0; 3], momentum: [0.0; 3], width: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub dt: f64,
    pub steps: usize,
    /// Record every this many steps.
    pub record_every: usize,
    pub drift_threshold: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self { dt: 0.01, steps: 100, record_every: 10, drift_threshold: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub r0: Vec3,
    pub pi0: Vec3,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self { r0: [0.0; 3], pi0: [1.0, 0.0, 0.0], t_end: 10.0, dt: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EhrenfestSection {
    pub t_end: f64,
    pub dt: f64,
    pub samples: usize,
    pub tol: f64,
}

impl Default for EhrenfestSection {
    fn default() -> Self {
        Self { t_end: 5.0, dt: 0.02, samples: 10, tol: 0.02 }
    }
}

/// Whole run configuration; every section is optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub grid: GridSection,
    pub particle: ParticleSection,
    pub field: FieldSection,
    pub spectrum: SpectrumSection,
    pub verify: VerifySection,
    pub packet: PacketSection,
    pub evolve: EvolveSection,
    pub trajectory: TrajectorySection,
    pub ehrenfest: EhrenfestSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, if present.
fn key_line(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        let name = line.split('=').next().unwrap_or("").trim();
        if current == section && name == key {
            return i + 1;
        }
    }
    0
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
    Error::Config { line, message: e.message().trim().to_string() }
}

impl Config {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.points, self.grid.length)
    }
}

impl FieldSection {
    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        macro_rules! mark {
            ($($k:ident),*) => { $( if self.$k.is_some() { v.push(stringify!($k)); } )* };
        }
        mark!(ex, ey, ez, hx, hy, hz, k, phi0, grad, hess, gauge);
        v
    }

    fn allowed(kind: FieldKind) -> &'static [&'static str] {
        match kind {
            FieldKind::Free => &[],
            FieldKind::UniformE => &["ex", "ey", "ez"],
            FieldKind::UniformB => &["hx", "hy", "hz", "gauge"],
            FieldKind::HarmonicScalar => &["k"],
            FieldKind::CrossedEH => &["ex", "ey", "ez", "hx", "hy", "hz", "gauge"],
            FieldKind::Polynomial => &["phi0", "grad", "hess", "hx", "hy", "hz", "gauge"],
        }
    }

    /// Validated [`FieldConfig`]; `text` is only used to locate errors.
    pub fn to_field(&self, text: &str) -> Result<FieldConfig> {
        let allowed = Self::allowed(self.kind);
        if let Some(bad) = self.present().into_iter().find(|k| !allowed.contains(k)) {
            return Err(Error::Config {
                line: key_line(text, "field", bad),
                message: format!(
                    "key `{bad}` is not a parameter of field kind `{}` (allowed: {})",
                    self.kind.name(),
                    if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") }
                ),
            });
        }
        let e = [self.ex, self.ey, self.ez].map(|x| x.unwrap_or(0.0));
        let h = [self.hx, self.hy, self.hz].map(|x| x.unwrap_or(0.0));
        let mut f = match self.kind {
            FieldKind::Free => FieldConfig::free(),
            FieldKind::UniformE => FieldConfig::uniform_e(e),
            FieldKind::UniformB => FieldConfig::uniform_b(h),
            FieldKind::HarmonicScalar => FieldConfig::harmonic_scalar(self.k.unwrap_or(1.0)),
            FieldKind::CrossedEH => FieldConfig::crossed(e, h),
            FieldKind::Polynomial => {
                let mut f = FieldConfig::free();
                f.kind = FieldKind::Polynomial;
                f.phi0 = self.phi0.unwrap_or(0.0);
                f.grad = self.grad.unwrap_or([0.0; 3]);
                f.hess = self.hess.unwrap_or([[0.0; 3]; 3]);
                f.h = h;
                f
            }
        };
        f.gauge = self.gauge.unwrap_or_default();
        f.window_width = self.window_width;
        f.stationary = self.stationary.unwrap_or(true);
        f.validate().map_err(|err| Error::Config {
            line: key_line(text, "field", "kind"),
            message: err.to_string(),
        })?;
        Ok(f)
    }
}

/// Parses a configuration file.
pub fn load_config(text: &str) -> Result<Config> {
    let cfg: Config = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    cfg.field.to_field(text)?;
    Ok(cfg)
}

/// Parses a configuration and applies `section.key=value` overrides.
///
/// Values are read as TOML literals; anything that does not parse as one is
/// taken as a bare string (so `--set field.kind=uniform_E` works unquoted).
pub fn load_config_with_overrides(text: &str, overrides: &[String]) -> Result<Config> {
    load_config(text)?;
    if overrides.is_empty() {
        return load_config(text);
    }
    let mut table: toml::Table = text.parse().map_err(|e| toml_error(text, e))?;
    for ov in overrides {
        let (path, raw) = ov.split_once('=').ok_or_else(|| Error::Config {
            line: 0,
            message: format!("override `{ov}` is not of the form section.key=value"),
        })?;
        let (section, key) = path.trim().split_once('.').ok_or_else(|| Error::Config {
            line: 0,
            message: format!("override key `{path}` must be section.key"),
        })?;
        let value = parse_value(raw.trim());
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(key.to_string(), value);
            }
            _ => {
                return Err(Error::Config { line: 0, message: format!("`{section}` is not a section") });
            }
        }
    }
    let merged = toml::to_string(&table).map_err(|e| Error::Config { line: 0, message: e.to_string() })?;
    load_config(&merged).map_err(|e| match e {
        Error::Config { message, .. } => Error::Config {
            line: 0,
            message: format!("{message} (after applying --set overrides)"),
        },
        other => other,
    })
}

fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Field section of a configuration file.
pub fn load_field(text: &str) -> Result<FieldConfig> {
    let cfg: Config = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    cfg.field.to_field(text)
}
