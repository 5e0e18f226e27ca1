//! Run configuration: a TOML file with one flat section per module.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::specs::{self, GridSpec, ModeRange, ProfileSpec, RhoSpec};
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub profile: ProfileSection,
    pub spectrum: SpectrumSection,
    pub measure: MeasureSection,
    pub invariants: InvariantsSection,
    pub symbols: SymbolsSection,
    pub inverse: InverseSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub output_dir: PathBuf,
    /// Worker threads; 0 means one per core.
    pub threads: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            output_dir: PathBuf::from("eqspec-out"),
            threads: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFamily {
    RoundSphere,
    PerturbedWell,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub family: ProfileFamily,
    /// Polynomial P, constant term first (perturbed_well).
    pub coefficients: Vec<f64>,
    /// Knots and values of v (tabulated).
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    /// Use x ↦ v(-x) instead.
    pub mirrored: bool,
    /// Points of the single-well certificate grid.
    pub grid_size: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            family: ProfileFamily::RoundSphere,
            coefficients: Vec::new(),
            knots: Vec::new(),
            values: Vec::new(),
            mirrored: false,
            grid_size: eqspec::profiles::DEFAULT_CERT_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// "a..b", inclusive.
    pub m_range: String,
    pub cells: usize,
    pub lambda_max: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            m_range: "0..5".into(),
            cells: 4096,
            lambda_max: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSection {
    pub alpha: f64,
    pub modes: Vec<i64>,
    pub rho: String,
    pub cells: usize,
    pub richardson: bool,
    /// Relative tolerance of the I₁, I₂ quadratures.
    pub quadrature_tol: f64,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            alpha: 1.0,
            modes: vec![16, 24, 32, 48, 64, 96, 128],
            rho: "indicator:4:0.1".into(),
            cells: 8192,
            richardson: true,
            quadrature_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantsSection {
    pub alpha: f64,
    /// "default:N" or "linspace:lo:hi:N".
    pub lambda_grid: String,
    pub endpoint_rule: eqspec::invariants::EndpointRule,
}

impl Default for InvariantsSection {
    fn default() -> Self {
        InvariantsSection {
            alpha: 1.0,
            lambda_grid: "default:200".into(),
            endpoint_rule: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolsSection {
    pub max_order: u32,
}

impl Default for SymbolsSection {
    fn default() -> Self {
        SymbolsSection {
            max_order: eqspec::semiclassics::DEFAULT_MAX_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseSection {
    pub alpha: f64,
    /// CSV with columns lambda, W, Q (for `reconstruct`).
    pub input: Option<PathBuf>,
    pub lambda_points: usize,
    pub s_points: usize,
    pub threshold: f64,
    pub smoothing_window: usize,
    pub smoothing_degree: usize,
    pub noise_threshold: f64,
    pub pivot_threshold: f64,
    pub series_terms: usize,
    pub series_window: f64,
    pub split_tol: f64,
    pub neg_tol: f64,
    pub x_points: usize,
    pub x_cover: f64,
    pub x_eval: f64,
}

impl Default for InverseSection {
    fn default() -> Self {
        let o = eqspec::inverse::RoundtripOptions::default();
        let i = o.inverse;
        InverseSection {
            alpha: 1.0,
            input: None,
            lambda_points: o.lambda_points,
            s_points: i.s_points,
            threshold: i.threshold,
            smoothing_window: i.smoothing.window,
            smoothing_degree: i.smoothing.degree,
            noise_threshold: i.smoothing.noise_threshold,
            pivot_threshold: i.volterra.pivot_threshold,
            series_terms: i.series_terms,
            series_window: i.series_window,
            split_tol: i.split_tol,
            neg_tol: i.neg_tol,
            x_points: i.x_points,
            x_cover: o.x_cover,
            x_eval: o.x_eval,
        }
    }
}

impl InverseSection {
    pub fn roundtrip_options(&self) -> eqspec::inverse::RoundtripOptions {
        use eqspec::abel::{SmoothingOptions, VolterraOptions};
        eqspec::inverse::RoundtripOptions {
            lambda_points: self.lambda_points,
            x_cover: self.x_cover,
            x_eval: self.x_eval,
            inverse: eqspec::inverse::InverseOptions {
                s_points: self.s_points,
                threshold: self.threshold,
                smoothing: SmoothingOptions {
                    window: self.smoothing_window,
                    degree: self.smoothing_degree,
                    noise_threshold: self.noise_threshold,
                },
                volterra: VolterraOptions {
                    pivot_threshold: self.pivot_threshold,
                },
                neg_tol: self.neg_tol,
                split_tol: self.split_tol,
                series_terms: self.series_terms,
                series_window: self.series_window,
                x_points: self.x_points,
            },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn nonzero(name: &str, v: f64) -> Result<(), CliError> {
    if v != 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be finite and nonzero, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be at least {min}, got {v}")))
    }
}

fn fraction(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        at_least("profile.grid_size", self.profile.grid_size, 16)?;
        self.profile_spec().build()?;

        let s = &self.spectrum;
        ModeRange::parse(&s.m_range)?;
        at_least("spectrum.cells", s.cells, eqspec::laplace::MIN_CELLS)?;
        positive("spectrum.lambda_max", s.lambda_max)?;

        let m = &self.measure;
        nonzero("measure.alpha", m.alpha)?;
        if m.modes.is_empty() || m.modes.contains(&0) {
            return Err(CliError::Config("measure.modes must be nonempty and nonzero".into()));
        }
        RhoSpec::parse(&m.rho)?;
        at_least("measure.cells", m.cells, eqspec::laplace::MIN_CELLS)?;
        positive("measure.quadrature_tol", m.quadrature_tol)?;

        nonzero("invariants.alpha", self.invariants.alpha)?;
        GridSpec::parse(&self.invariants.lambda_grid)?;

        at_least("symbols.max_order", self.symbols.max_order as usize, 1)?;

        let i = &self.inverse;
        nonzero("inverse.alpha", i.alpha)?;
        at_least("inverse.lambda_points", i.lambda_points, 8)?;
        at_least("inverse.s_points", i.s_points, 8)?;
        fraction("inverse.threshold", i.threshold)?;
        at_least("inverse.smoothing_window", i.smoothing_window, 3)?;
        if i.smoothing_window % 2 == 0 || i.smoothing_window <= i.smoothing_degree + 1 {
            return Err(CliError::Config(format!(
                "inverse.smoothing_window must be odd and exceed smoothing_degree + 1, got {} and {}",
                i.smoothing_window, i.smoothing_degree
            )));
        }
        at_least("inverse.smoothing_degree", i.smoothing_degree, 2)?;
        positive("inverse.noise_threshold", i.noise_threshold)?;
        positive("inverse.pivot_threshold", i.pivot_threshold)?;
        fraction("inverse.series_window", i.series_window)?;
        positive("inverse.split_tol", i.split_tol)?;
        positive("inverse.neg_tol", i.neg_tol)?;
        at_least("inverse.x_points", i.x_points, 3)?;
        fraction("inverse.x_cover", i.x_cover)?;
        fraction("inverse.x_eval", i.x_eval)?;
        if i.x_eval > i.x_cover {
            return Err(CliError::Config(format!(
                "inverse.x_eval ({}) must not exceed inverse.x_cover ({})",
                i.x_eval, i.x_cover
            )));
        }
        Ok(())
    }

    pub fn profile_spec(&self) -> ProfileSpec {
        let p = &self.profile;
        ProfileSpec {
            family: p.family,
            coefficients: p.coefficients.clone(),
            knots: p.knots.clone(),
            values: p.values.clone(),
            mirrored: p.mirrored,
        }
    }

    /// Replace the profile section from a spec string.
    pub fn set_profile(&mut self, spec: &str) -> Result<(), CliError> {
        let s = specs::parse_profile(spec)?;
        self.profile.family = s.family;
        self.profile.coefficients = s.coefficients;
        self.profile.knots = s.knots;
        self.profile.values = s.values;
        self.profile.mirrored = s.mirrored;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::parse("[spectrum]\ncels = 10\n"),
            Err(CliError::Config(_))
        ));
        assert!(RunConfig::parse("[nonsense]\n").is_err());
    }

    #[test]
    fn negative_cells_are_rejected() {
        assert!(RunConfig::parse("[spectrum]\ncells = -4\n").is_err());
        assert!(RunConfig::parse("[spectrum]\ncells = 4\n").is_err());
    }

    #[test]
    fn linear_term_is_rejected() {
        let t = "[profile]\nfamily = \"perturbed_well\"\ncoefficients = [0.0, 0.5]\n";
        assert!(RunConfig::parse(t).is_err());
    }

    #[test]
    fn sections_parse() {
        let t = r#"
[run]
threads = 2
[profile]
family = "perturbed_well"
coefficients = [0.0, 0.0, 1.0, 0.3]
[inverse]
s_points = 300
"#;
        let c = RunConfig::parse(t).unwrap();
        assert_eq!(c.run.threads, 2);
        assert_eq!(c.inverse.s_points, 300);
        assert_eq!(c.inverse.roundtrip_options().inverse.s_points, 300);
    }
}
