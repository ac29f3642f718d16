//! Run configuration: a TOML file whose sections mirror the subcommands.
//! Command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use blowup_core::diagnostics::ReportConfig;
use blowup_core::geometry::{BoundaryCurve, Grading};
use blowup_core::green::SearchOptions;
use blowup_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "BLOWUP_OUTPUT_ROOT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomized φ-search starts.
    pub seed: u64,
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub solver: SolveConfig,
    pub solve: SolveOptions,
    pub diagnostics: ReportConfig,
    pub green: GreenOptions,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    /// `disk`, `ellipse` or `star`.
    pub preset: String,
    pub radius: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub amplitude: Option<f64>,
    pub lobes: Option<u32>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            preset: "disk".into(),
            radius: None,
            a: None,
            b: None,
            amplitude: None,
            lobes: None,
        }
    }
}

impl DomainConfig {
    pub fn curve(&self) -> anyhow::Result<BoundaryCurve> {
        let mut params = Vec::new();
        for (key, value) in [
            ("radius", self.radius),
            ("a", self.a),
            ("b", self.b),
            ("amplitude", self.amplitude),
            ("lobes", self.lobes.map(f64::from)),
        ] {
            if let Some(v) = value {
                params.push((key, v));
            }
        }
        let curve = BoundaryCurve::preset(&self.preset, &params)?;
        if self.preset == "disk" && self.radius.is_some_and(|r| r != 1.0) {
            bail!("the disk preset is the unit disk");
        }
        Ok(curve)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub h: f64,
    /// Grading points as `(x,y):factor` (projected onto the boundary) or
    /// `s:factor` (arc-length parameter).
    pub grade: Vec<String>,
    /// Innermost ring radius of graded fans.
    pub core: Option<f64>,
    /// `solve` grades around the bubble sites when no points are given.
    pub auto_grade: bool,
    pub auto_factor: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            h: 0.1,
            grade: Vec::new(),
            core: None,
            auto_grade: true,
            auto_factor: 8.0,
        }
    }
}

/// Parses one `--grade` entry into an arc parameter and a factor.
pub fn parse_grade(curve: &BoundaryCurve, spec: &str) -> anyhow::Result<(f64, f64)> {
    let (point, factor) = spec
        .rsplit_once(':')
        .with_context(|| format!("grading `{spec}` is not of the form POINT:FACTOR"))?;
    let factor: f64 = factor.trim().parse().with_context(|| format!("bad grading factor in `{spec}`"))?;
    if !(factor >= 1.0 && factor.is_finite()) {
        bail!("grading factor must be at least 1, got {factor}");
    }
    let point = point.trim();
    let s = if let Some(inner) = point.strip_prefix('(').and_then(|p| p.strip_suffix(')')) {
        let xy: Vec<f64> = inner
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad point in `{spec}`"))?;
        if xy.len() != 2 {
            bail!("grading point `{point}` needs two coordinates");
        }
        curve.closest_param([xy[0], xy[1]])
    } else {
        curve.wrap(point.parse().with_context(|| format!("bad arc parameter in `{spec}`"))?)
    };
    Ok((s, factor))
}

impl MeshConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            bail!("mesh size h must be positive, got {}", self.h);
        }
        if self.core.is_some_and(|c| !(c > 0.0)) {
            bail!("core radius must be positive");
        }
        Ok(())
    }

    /// Explicit grading, if any. All points share one factor.
    pub fn grading(&self, curve: &BoundaryCurve) -> anyhow::Result<Option<Grading>> {
        if self.grade.is_empty() {
            return Ok(None);
        }
        let parsed = self
            .grade
            .iter()
            .map(|g| parse_grade(curve, g))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let factor = parsed[0].1;
        if parsed.iter().any(|&(_, f)| f != factor) {
            bail!("all grading points must use the same factor");
        }
        let mut g = Grading::new(parsed.iter().map(|&(s, _)| s).collect(), factor);
        g.core = self.core;
        Ok(Some(g))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Comma-separated arc parameters, or `auto` for a φ-critical search.
    pub peaks: String,
    /// Peak count for `auto`.
    pub m: usize,
    /// `bubble` or `constant`.
    pub ansatz: String,
    /// Initial value for the constant ansatz.
    pub constant: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            peaks: "0".into(),
            m: 1,
            ansatz: "bubble".into(),
            constant: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PeakSpec {
    Sites(Vec<f64>),
    Auto(usize),
}

impl SolveOptions {
    pub fn peak_spec(&self) -> anyhow::Result<PeakSpec> {
        if self.peaks.trim() == "auto" {
            if self.m == 0 {
                bail!("--m must be at least 1");
            }
            return Ok(PeakSpec::Auto(self.m));
        }
        let sites = self
            .peaks
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad peak list `{}`", self.peaks))?;
        Ok(PeakSpec::Sites(sites))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenOptions {
    /// Number of equally spaced Robin samples.
    pub robin_samples: Option<usize>,
    /// Peak count for the φ-critical search.
    pub phi_crit: Option<usize>,
    /// Randomized starts of the search.
    pub starts: usize,
    pub search: SearchOptions,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self {
            robin_samples: None,
            phi_crit: None,
            starts: 2,
            search: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths are resolved under `$BLOWUP_OUTPUT_ROOT` when set.
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[mesh]\nhh = 0.1\n").is_err());
        assert!(toml::from_str::<RunConfig>("colour = 1\n").is_err());
    }

    #[test]
    fn grading_entries() {
        let curve = BoundaryCurve::preset("ellipse", &[("a", 2.0), ("b", 1.0)]).unwrap();
        let (s, f) = parse_grade(&curve, "(2,0):8").unwrap();
        assert!(s.abs() < 1e-9 || (s - curve.length()).abs() < 1e-9);
        assert_eq!(f, 8.0);
        assert_eq!(parse_grade(&curve, "1.5:4").unwrap(), (1.5, 4.0));
        assert!(parse_grade(&curve, "(2,0)").is_err());
        assert!(parse_grade(&curve, "(2,0):0.5").is_err());
    }

    #[test]
    fn peak_lists() {
        let mut s = SolveOptions::default();
        assert_eq!(s.peak_spec().unwrap(), PeakSpec::Sites(vec![0.0]));
        s.peaks = "auto".into();
        s.m = 2;
        assert_eq!(s.peak_spec().unwrap(), PeakSpec::Auto(2));
        s.peaks = "0,x".into();
        assert!(s.peak_spec().is_err());
    }
}
