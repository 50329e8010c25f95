//! JSON configuration: the magnetic system, numerical settings and
//! experiment parameters.
//!
//! Every section is optional; omitted values fall back to the defaults listed
//! in the README. Unknown keys are rejected so that typos surface as input
//! errors rather than silently ignored settings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::FundamentalDomain;
use crate::dynamics::{CriteriaGrid, MagneticSystem};
use crate::error::{MaglabError, Result};
use crate::fields::{BumpSpec, OneFormField, OneFormSpec, ScalarField, ScalarSpec};
use crate::geometry::{Surface, Word};
use crate::orbit::SolverOptions;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub genus: u32,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { genus: 2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Largest RK4 step.
    pub h: f64,
    /// Minimum number of steps per period.
    pub min_steps: usize,
    /// Target length of one shooting segment.
    pub segment_length: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            h: o.max_step,
            min_steps: o.shoot_steps,
            segment_length: o.segment_length,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub grad_tol: f64,
    pub max_iterations: usize,
    pub stagnation_window: usize,
    pub newton_tol: f64,
    pub newton_max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            m: o.m,
            grad_tol: o.grad_tol,
            max_iterations: o.max_iterations,
            stagnation_window: o.stagnation_window,
            newton_tol: o.newton_tol,
            newton_max_iterations: o.newton_max_iterations,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriteriaConfig {
    pub radial: usize,
    pub angular: usize,
    pub directions: usize,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            radial: 8,
            angular: 32,
            directions: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub panels: usize,
    pub order: usize,
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panels: 4,
            order: 8,
            tolerance: 1e-6,
        }
    }
}

fn default_bump() -> ScalarSpec {
    ScalarSpec::Bump(BumpSpec {
        center: [0.2, 0.1],
        radius: 0.9,
        amplitude: 0.05,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearizationConfig {
    pub epsilons: Vec<f64>,
    /// Conformal direction `h = 2f g₀`.
    pub conformal: ScalarSpec,
    /// 1-form direction `β`.
    pub one_form: OneFormSpec,
    /// Classes to evaluate; the shortest `classes` are used when empty.
    pub words: Vec<String>,
    pub classes: usize,
}

impl Default for LinearizationConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            conformal: default_bump(),
            one_form: OneFormSpec {
                pairs: vec![crate::fields::PairSpec {
                    u: ScalarSpec::Bump(BumpSpec {
                        center: [-0.2, 0.3],
                        radius: 1.0,
                        amplitude: 0.5,
                    }),
                    v: ScalarSpec::Bump(BumpSpec {
                        center: [0.3, -0.1],
                        radius: 0.9,
                        amplitude: 0.5,
                    }),
                    coeff: 0.2,
                }],
                exact_part: None,
            },
            words: Vec::new(),
            classes: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConformalConfig {
    /// Conformal exponent `f` of `g₂ = e^{2f} g₁`.
    pub f: ScalarSpec,
    /// Number of shortest classes in the action gap.
    pub classes: usize,
    /// Word lengths of the pseudo-random classes used for orbit averages.
    pub average_lengths: Vec<usize>,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self {
            f: default_bump(),
            classes: 20,
            average_lengths: vec![1, 2, 4, 6, 8],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragesConfig {
    pub lengths: Vec<usize>,
    pub per_length: usize,
}

impl Default for AveragesConfig {
    fn default() -> Self {
        Self {
            lengths: (1..=12).collect(),
            per_length: 1,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentsConfig {
    pub linearization: LinearizationConfig,
    pub conformal: ConformalConfig,
    pub averages: AveragesConfig,
}

/// Top-level configuration file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub name: Option<String>,
    pub surface: SurfaceConfig,
    /// Conformal exponent `f` of the metric `e^{2f} g_hyp`.
    pub metric: ScalarSpec,
    pub one_form: OneFormSpec,
    pub integrator: IntegratorConfig,
    pub solver: SolverConfig,
    pub words: Vec<String>,
    /// Seed for every pseudo-random choice.
    pub seed: u64,
    pub criteria: CriteriaConfig,
    pub quadrature: QuadratureConfig,
    pub experiments: ExperimentsConfig,
}

impl Config {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|source| MaglabError::Json {
            path: origin.to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| MaglabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.surface.genus != 2 {
            return Err(MaglabError::Input(format!(
                "only the genus-2 octagon surface is supported, got genus {}",
                self.surface.genus
            )));
        }
        if self.solver.m < 16 {
            return Err(MaglabError::Input(format!("solver.M must be at least 16, got {}", self.solver.m)));
        }
        let positive = [
            ("integrator.h", self.integrator.h),
            ("integrator.segment_length", self.integrator.segment_length),
            ("solver.grad_tol", self.solver.grad_tol),
            ("solver.newton_tol", self.solver.newton_tol),
            ("quadrature.tolerance", self.quadrature.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MaglabError::Input(format!("{name} must be positive, got {v}")));
            }
        }
        validate_ladder(&self.experiments.linearization.epsilons)?;
        Ok(())
    }

    pub fn surface(&self) -> Result<Surface> {
        Surface::standard()
    }

    pub fn system(&self, surface: &Surface) -> Result<MagneticSystem> {
        let f = ScalarField::from_spec(&self.metric, surface)?;
        let alpha = OneFormField::from_spec(&self.one_form, surface)?;
        Ok(MagneticSystem::new(surface.clone(), f, alpha).with_id(self.name.clone().unwrap_or_else(|| "system".into())))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            m: self.solver.m,
            grad_tol: self.solver.grad_tol,
            max_iterations: self.solver.max_iterations,
            stagnation_window: self.solver.stagnation_window,
            shoot_steps: self.integrator.min_steps,
            max_step: self.integrator.h,
            newton_tol: self.solver.newton_tol,
            newton_max_iterations: self.solver.newton_max_iterations,
            segment_length: self.integrator.segment_length,
        }
    }

    pub fn grid(&self, surface: &Surface) -> CriteriaGrid {
        CriteriaGrid::octagon(surface, self.criteria.radial, self.criteria.angular, self.criteria.directions)
    }

    pub fn domain(&self) -> Result<FundamentalDomain> {
        FundamentalDomain::new(self.quadrature.panels, self.quadrature.order, self.quadrature.tolerance)
    }

    pub fn words(&self) -> Result<Vec<Word>> {
        parse_word_list(&self.words)
    }
}

/// An ε ladder must be strictly decreasing, positive and have at least 3 values.
pub fn validate_ladder(eps: &[f64]) -> Result<()> {
    if eps.len() < 3 {
        return Err(MaglabError::Input(format!("epsilon ladder needs at least 3 values, got {}", eps.len())));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(MaglabError::Input("epsilon ladder values must be positive".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(MaglabError::Input("epsilon ladder must be strictly decreasing".into()));
    }
    Ok(())
}

pub fn parse_word_list<S: AsRef<str>>(items: &[S]) -> Result<Vec<Word>> {
    items.iter().map(|s| s.as_ref().parse::<Word>()).collect()
}

/// Words from a text file: whitespace separated, `#` starts a comment.
pub fn parse_words_text(text: &str) -> Result<Vec<Word>> {
    let tokens: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .collect();
    if tokens.is_empty() {
        return Err(MaglabError::Input("word list is empty".into()));
    }
    parse_word_list(&tokens)
}

pub fn load_words(path: &Path) -> Result<Vec<Word>> {
    let text = std::fs::read_to_string(path).map_err(|source| MaglabError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_words_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let cfg = Config::from_json("{}", "inline").unwrap();
        assert_eq!(cfg.solver.m, 1024);
        assert_eq!(cfg.experiments.linearization.epsilons.len(), 5);
        let cfg = Config::from_json(r#"{"solver": {"M": 256, "grad_tol": 1e-9}, "words": ["ab", "c"]}"#, "inline").unwrap();
        assert_eq!(cfg.solver_options().m, 256);
        assert_eq!(cfg.words().unwrap().len(), 2);
        for bad in [
            r#"{"surface": {"genus": 3}}"#,
            r#"{"solver": {"M": 8}}"#,
            r#"{"integrator": {"h": -1}}"#,
            r#"{"experiments": {"linearization": {"epsilons": [0.1, 0.2, 0.01]}}}"#,
            r#"{"experiments": {"linearization": {"epsilons": [0.1, 0.01]}}}"#,
            r#"{"unknown": 1}"#,
        ] {
            let err = Config::from_json(bad, "inline").unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}: {err}");
        }
    }

    #[test]
    fn word_files() {
        let w = parse_words_text("ab  # first\nAB c\n\n# nothing\n").unwrap();
        assert_eq!(w.iter().map(|w| w.to_string()).collect::<Vec<_>>(), ["ab", "AB", "c"]);
        assert!(parse_words_text("# only comments").is_err());
        assert!(parse_words_text("ax").is_err());
        let err = load_words(Path::new("/nonexistent/words.txt")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/words.txt"));
    }

    #[test]
    fn system_from_config() {
        let cfg = Config::from_json(
            r#"{"name": "demo", "metric": {"center": [0.1, 0.0], "radius": 0.8, "amplitude": 0.05},
                "one_form": {"pairs": [{"u": {"center": [0.0, 0.2], "radius": 1.0, "amplitude": 0.5},
                                        "v": {"center": [0.2, 0.0], "radius": 1.0, "amplitude": 0.5}, "coeff": 0.3}]}}"#,
            "inline",
        )
        .unwrap();
        let s = cfg.surface().unwrap();
        let sys = cfg.system(&s).unwrap();
        assert_eq!(sys.id, "demo");
        assert!(!sys.f().is_zero());
        assert!(!sys.alpha().unwrap().is_zero());
    }
}
