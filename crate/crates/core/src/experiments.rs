//! Headline experiments built on the orbit solver and the X-ray transform.

use serde::Serialize;

use crate::config::{validate_ladder, Config};
use crate::domain::FundamentalDomain;
use crate::dynamics::{crit_b_margin, CritBReport, CriteriaGrid, MagneticSystem, CRIT_B_READING, NABLA_Y_CONVENTION};
use crate::error::{MaglabError, Result};
use crate::fields::{OneFormField, ScalarField, SymTensorField};
use crate::geometry::Word;
use crate::orbit::{canonical_classes, solve_classes, ClosedOrbit, SolverOptions};
use crate::report::{fmt_f64, opt_cell, Table, Tabular};
use crate::xray::{xray_i2, AnyPair, PairSpec, PotentialPair, TensorPair};

/// Numerical settings shared by the experiments.
#[derive(Clone, Debug)]
pub struct Context {
    pub opts: SolverOptions,
    pub grid: CriteriaGrid,
    pub domain: FundamentalDomain,
    pub seed: u64,
}

impl Context {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let surface = cfg.surface()?;
        Ok(Self {
            opts: cfg.solver_options(),
            grid: cfg.grid(&surface),
            domain: cfg.domain()?,
            seed: cfg.seed,
        })
    }
}

fn require_crit_b(sys: &MagneticSystem, grid: &CriteriaGrid, what: &str) -> Result<()> {
    let r = crit_b_margin(sys, grid)?;
    if !r.pass {
        return Err(MaglabError::Precondition(format!(
            "{what}: system '{}' fails the crit_b criterion (margin {:.3e})",
            sys.id, r.worst
        )));
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`, over the pairs with `y > floor`.
pub fn loglog_slope(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && y.is_finite() && *y > floor)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Worst Euler–Lagrange residual and speed error over the orbits behind a report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Certification {
    pub orbits: usize,
    pub max_el_residual: f64,
    pub max_speed_error: f64,
}

impl Certification {
    pub fn add(&mut self, o: &ClosedOrbit) {
        self.orbits += 1;
        self.max_el_residual = self.max_el_residual.max(o.el_residual);
        self.max_speed_error = self.max_speed_error.max(o.max_speed_error);
    }

    pub fn merge(&mut self, other: &Certification) {
        self.orbits += other.orbits;
        self.max_el_residual = self.max_el_residual.max(other.max_el_residual);
        self.max_speed_error = self.max_speed_error.max(other.max_speed_error);
    }

    /// EL residual below `1e−6` and speed within `1e−8` of 1.
    pub fn pass(&self) -> bool {
        self.max_el_residual < 1e-6 && self.max_speed_error < 1e-8
    }
}

/// Remainders below this are treated as exact zeros in slope fits.
pub const REMAINDER_FLOOR: f64 = 1e-14;

// ---------------------------------------------------------------------------
// linearization

/// Perturbation direction: conformal part `h = 2f·g₀` and a 1-form `β`.
#[derive(Clone, Debug, Default)]
pub struct LinearDirection {
    pub conformal: ScalarField,
    pub beta: OneFormField,
}

impl LinearDirection {
    pub fn is_zero(&self) -> bool {
        self.conformal.is_zero() && self.beta.is_zero()
    }

    /// The system `(e^{2εf} g₀, α₀ + εβ)`.
    pub fn perturb(&self, sys0: &MagneticSystem, eps: f64) -> Result<MagneticSystem> {
        let alpha0 = sys0
            .alpha()
            .ok_or_else(|| MaglabError::Input("linearization needs a system on the closed surface".into()))?;
        Ok(sys0
            .with_f(sys0.f().sum(&self.conformal.scaled(eps)))
            .with_alpha(alpha0.sum(&self.beta.scaled(eps))))
    }

    /// The first-order pair `[½h, −β] = [f·g₀, −β]`.
    pub fn first_order_pair(&self) -> TensorPair {
        TensorPair::new(
            SymTensorField::metric_multiple(self.conformal.clone(), 1.0),
            self.beta.scaled(-1.0),
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearizationRow {
    pub epsilon: f64,
    /// `max_c |A_ε(c) − A₀(c) − ε I₂[½h, −β](c)|`.
    pub remainder: Option<f64>,
    pub worst_word: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearizationReport {
    pub words: Vec<String>,
    pub base_actions: Vec<f64>,
    /// `I₂[½h, −β](c)` per class.
    pub first_order: Vec<f64>,
    pub rows: Vec<LinearizationRow>,
    /// Fitted exponent of the remainder; `None` when the remainder vanishes.
    pub slope: Option<f64>,
    /// Whether the slope lies in `[1.8, 2.2]`.
    pub second_order: Option<bool>,
    pub certification: Certification,
}

fn first_error(orbits: &[Result<ClosedOrbit>], words: &[Word]) -> Option<MaglabError> {
    orbits.iter().zip(words).find_map(|(r, w)| match r {
        Err(e) => Some(MaglabError::Refinement(format!("class {w}: {e}"))),
        Ok(o) if !o.refined => Some(MaglabError::Refinement(format!(
            "class {w}: shooting stopped at residual {:.3e}",
            o.shooting_residual
        ))),
        Ok(_) => None,
    })
}

fn collect_orbits(orbits: Vec<Result<ClosedOrbit>>, words: &[Word]) -> Result<Vec<ClosedOrbit>> {
    if let Some(e) = first_error(&orbits, words) {
        return Err(e);
    }
    Ok(orbits.into_iter().map(|r| r.expect("checked")).collect())
}

/// Taylor remainder of the marked action along a straight line of systems,
/// and its fitted order in `ε`.
pub fn linearization_experiment(
    sys0: &MagneticSystem,
    direction: &LinearDirection,
    epsilons: &[f64],
    words: &[Word],
    ctx: &Context,
) -> Result<LinearizationReport> {
    validate_ladder(epsilons)?;
    let classes = canonical_classes(words)?;
    if classes.is_empty() {
        return Err(MaglabError::Input("linearization needs at least one class".into()));
    }
    require_crit_b(sys0, &ctx.grid, "linearization")?;
    let base = collect_orbits(solve_classes(sys0, &classes, &ctx.opts), &classes)?;
    let mut certification = Certification::default();
    base.iter().for_each(|o| certification.add(o));
    let pair = direction.first_order_pair();
    let first_order = base
        .iter()
        .map(|o| xray_i2(sys0, &pair, o))
        .collect::<Result<Vec<f64>>>()?;

    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if direction.is_zero() {
            rows.push(LinearizationRow {
                epsilon: eps,
                remainder: Some(0.0),
                worst_word: None,
                error: None,
            });
            continue;
        }
        let sys = direction.perturb(sys0, eps)?;
        let orbits = solve_classes(&sys, &classes, &ctx.opts);
        let row = match first_error(&orbits, &classes) {
            Some(e) => {
                log::warn!("linearization row ε = {eps:e} aborted: {e}");
                LinearizationRow {
                    epsilon: eps,
                    remainder: None,
                    worst_word: None,
                    error: Some(e.to_string()),
                }
            }
            None => {
                let mut worst = (0.0, 0);
                for (i, r) in orbits.iter().enumerate() {
                    let o = r.as_ref().expect("checked");
                    certification.add(o);
                    let rem = (o.action - base[i].action - eps * first_order[i]).abs();
                    if rem > worst.0 {
                        worst = (rem, i);
                    }
                }
                LinearizationRow {
                    epsilon: eps,
                    remainder: Some(worst.0),
                    worst_word: (worst.0 > 0.0).then(|| classes[worst.1].to_string()),
                    error: None,
                }
            }
        };
        rows.push(row);
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.remainder.map(|x| (r.epsilon, x))).collect();
    let slope = loglog_slope(&pts, REMAINDER_FLOOR);
    Ok(LinearizationReport {
        words: classes.iter().map(Word::to_string).collect(),
        base_actions: base.iter().map(|o| o.action).collect(),
        first_order,
        rows,
        slope,
        second_order: slope.map(|s| (1.8..=2.2).contains(&s)),
        certification,
    })
}

impl Tabular for LinearizationReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("linearization", &["epsilon", "remainder", "worst_word", "error"]);
        for r in &self.rows {
            t.push(vec![
                fmt_f64(r.epsilon),
                opt_cell(r.remainder),
                r.worst_word.clone().unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        let mut c = Table::new("first_order", &["word", "base_action", "i2"]);
        for ((w, a), d) in self.words.iter().zip(&self.base_actions).zip(&self.first_order) {
            c.push(vec![w.clone(), fmt_f64(*a), fmt_f64(*d)]);
        }
        let mut s = Table::new("fit", &["slope", "second_order"]);
        s.push(vec![
            opt_cell(self.slope),
            self.second_order.map(|b| b.to_string()).unwrap_or_default(),
        ]);
        vec![t, c, s]
    }
}

// ---------------------------------------------------------------------------
// conformal

/// A chain `v₀ ≤ v₁ ≤ … ≤ v_k` with the slack of every step.
#[derive(Clone, Debug, Serialize)]
pub struct HolderChain {
    pub values: Vec<f64>,
    pub slacks: Vec<f64>,
    /// Every step holds up to `tolerance`.
    pub holds: bool,
    /// `v_k − v₀` exceeds `tolerance`.
    pub strict: bool,
    pub tolerance: f64,
}

impl HolderChain {
    pub fn new(values: Vec<f64>, tolerance: f64) -> Self {
        let slacks: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let holds = slacks.iter().all(|s| *s >= -tolerance);
        let strict = values[values.len() - 1] - values[0] > tolerance;
        Self {
            values,
            slacks,
            holds,
            strict,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AverageRow {
    pub word: String,
    /// Period, i.e. `ℓ_{g₁}` at unit speed.
    pub length_g1: f64,
    pub energy_g2: f64,
    pub length_g2: f64,
    /// `(E_{g₂} + ½ℓ_{g₂}) / ℓ_{g₁}`.
    pub functional: f64,
    /// `(1/ℓ_{g₁}) ∫ α`.
    pub alpha_average: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapRow {
    pub word: String,
    pub action_g1: Option<f64>,
    pub action_g2: Option<f64>,
    pub difference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConformalReport {
    /// `vol(g₂)/vol(g₁)` for the systems as given.
    pub volume_ratio: f64,
    /// When the ratio exceeds 1 the roles of `g₁` and `g₂` are exchanged
    /// (and `f` negated) so that the normalized volume of `g₂` is at most 1.
    pub swapped: bool,
    /// Energy chain `∫e^{2f} ≤ (∫e^{2f})^{2/2} ≤ vol(g₂) ≤ 1` in the normalized measure.
    pub energy_chain: HolderChain,
    /// Length chain `∫e^f ≤ (∫e^{2f})^{1/2} ≤ vol(g₂)^{1/2} ≤ 1`.
    pub length_chain: HolderChain,
    /// `½∫(e^{2f} + e^f) dvol` in the normalized measure.
    pub comparison: f64,
    pub quadrature_warning: bool,
    pub quadrature_error: f64,
    pub averages: Vec<AverageRow>,
    pub classes: Vec<GapRow>,
    /// `max_c |A_{g₂,α}(c) − A_{g₁,α}(c)|` over the classes that solved.
    pub gap: f64,
    pub gap_word: Option<String>,
    pub complete: bool,
    pub certification: Certification,
}

/// Volume chains, Birkhoff averages and the marked-action gap for
/// `g₂ = e^{2f} g₁` with the same 1-form.
pub fn conformal_experiment(
    sys1: &MagneticSystem,
    f: &ScalarField,
    gap_words: &[Word],
    average_words: &[Word],
    ctx: &Context,
) -> Result<ConformalReport> {
    if f.amplitude_bound() > 0.1 + 1e-15 {
        return Err(MaglabError::Precondition(format!(
            "conformal exponent amplitude {} exceeds 0.1",
            f.amplitude_bound()
        )));
    }
    if f.is_constant() && !f.is_zero() {
        return Err(MaglabError::Precondition("conformal exponent must be nonconstant".into()));
    }
    if sys1.is_cover_only() {
        return Err(MaglabError::Input("conformal experiment needs a system on the closed surface".into()));
    }
    require_crit_b(sys1, &ctx.grid, "conformal experiment")?;
    let sys2 = sys1.with_f(sys1.f().sum(f)).with_id(format!("{}+conformal", sys1.id));
    let surface = sys1.surface().clone();

    let volume_ratio_of = |base: &MagneticSystem, g: &ScalarField| -> Result<[crate::domain::QuadratureResult; 4]> {
        ctx.domain.integrate_many(|z| {
            let loc = surface.locate(z)?;
            let w = (2.0 * base.f().jet(&loc).value()).exp();
            let u = g.jet(&loc).value();
            Ok([w, w * (2.0 * u).exp(), w * u.exp(), w * 0.5 * ((2.0 * u).exp() + u.exp())])
        })
    };
    let raw = volume_ratio_of(sys1, f)?;
    let volume_ratio = raw[1].value / raw[0].value;
    let swapped = volume_ratio > 1.0;
    let (base, g) = if swapped {
        (sys2.clone(), f.scaled(-1.0))
    } else {
        (sys1.clone(), f.clone())
    };
    let q = if swapped { volume_ratio_of(&base, &g)? } else { raw };
    let vol = q[0].value;
    let e2 = q[1].value / vol;
    let e1 = q[2].value / vol;
    let comparison = q[3].value / vol;
    let quadrature_error = q.iter().map(|r| r.error_estimate / vol).fold(0.0, f64::max);
    let tol = 1e-12 + 4.0 * quadrature_error;
    // n = 2 on a surface: vol(g₁)^{(n−2)/n} = 1 and (∫e^{nf})^{2/n} = vol(g₂).
    let energy_chain = HolderChain::new(vec![e2, e2, e2, 1.0], tol);
    let length_chain = HolderChain::new(vec![e1, e2.sqrt(), e2.sqrt(), 1.0], tol);

    let mut certification = Certification::default();
    let averages = if average_words.is_empty() {
        Vec::new()
    } else {
        let classes = canonical_classes(average_words)?;
        let orbits = collect_orbits(solve_classes(&base, &classes, &ctx.opts), &classes)?;
        orbits.iter().for_each(|o| certification.add(o));
        orbits
            .iter()
            .map(|o| {
                let energy_g2 = 0.5 * o.integrate(|s| Ok((2.0 * g.value_at(&surface, s.point.z)?).exp()))?;
                let length_g2 = o.integrate(|s| Ok(g.value_at(&surface, s.point.z)?.exp()))?;
                Ok(AverageRow {
                    word: o.word.to_string(),
                    length_g1: o.period,
                    energy_g2,
                    length_g2,
                    functional: (energy_g2 + 0.5 * length_g2) / o.period,
                    alpha_average: o.alpha_integral / o.period,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };

    let classes = canonical_classes(gap_words)?;
    let o1 = solve_classes(sys1, &classes, &ctx.opts);
    let o2 = solve_classes(&sys2, &classes, &ctx.opts);
    let mut rows = Vec::with_capacity(classes.len());
    let mut gap = 0.0;
    let mut gap_word = None;
    for ((w, a), b) in classes.iter().zip(&o1).zip(&o2) {
        for o in [a, b].into_iter().flatten() {
            certification.add(o);
        }
        let fetch = |r: &Result<ClosedOrbit>| match r {
            Ok(o) if o.refined => Ok(o.action),
            Ok(o) => Err(format!("shooting stopped at residual {:.3e}", o.shooting_residual)),
            Err(e) => Err(e.to_string()),
        };
        let (x, y) = (fetch(a), fetch(b));
        let difference = match (&x, &y) {
            (Ok(x), Ok(y)) => Some(y - x),
            _ => None,
        };
        if let Some(d) = difference {
            if d.abs() > gap {
                gap = d.abs();
                gap_word = Some(w.to_string());
            }
        }
        let error = [x.as_ref().err(), y.as_ref().err()]
            .into_iter()
            .flatten()
            .next()
            .cloned();
        rows.push(GapRow {
            word: w.to_string(),
            action_g1: x.ok(),
            action_g2: y.ok(),
            difference,
            error,
        });
    }
    let complete = rows.iter().all(|r| r.error.is_none());
    Ok(ConformalReport {
        volume_ratio,
        swapped,
        energy_chain,
        length_chain,
        comparison,
        quadrature_warning: q.iter().any(|r| r.warning),
        quadrature_error,
        averages,
        classes: rows,
        gap,
        gap_word,
        complete,
        certification,
    })
}

impl Tabular for ConformalReport {
    fn tables(&self) -> Vec<Table> {
        let mut chains = Table::new("holder_chains", &["chain", "step", "value", "slack"]);
        for (name, c) in [("energy", &self.energy_chain), ("length", &self.length_chain)] {
            for (i, v) in c.values.iter().enumerate() {
                let slack = if i == 0 { String::new() } else { fmt_f64(c.slacks[i - 1]) };
                chains.push(vec![name.into(), i.to_string(), fmt_f64(*v), slack]);
            }
        }
        let mut av = Table::new(
            "orbit_averages",
            &["word", "length_g1", "energy_g2", "length_g2", "functional", "comparison", "alpha_average"],
        );
        for r in &self.averages {
            av.push(vec![
                r.word.clone(),
                fmt_f64(r.length_g1),
                fmt_f64(r.energy_g2),
                fmt_f64(r.length_g2),
                fmt_f64(r.functional),
                fmt_f64(self.comparison),
                fmt_f64(r.alpha_average),
            ]);
        }
        let mut gap = Table::new("action_gap", &["word", "action_g1", "action_g2", "difference", "error"]);
        for r in &self.classes {
            gap.push(vec![
                r.word.clone(),
                opt_cell(r.action_g1),
                opt_cell(r.action_g2),
                opt_cell(r.difference),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        let mut s = Table::new("summary", &["volume_ratio", "swapped", "gap", "gap_word", "energy_strict", "length_strict"]);
        s.push(vec![
            fmt_f64(self.volume_ratio),
            self.swapped.to_string(),
            fmt_f64(self.gap),
            self.gap_word.clone().unwrap_or_default(),
            self.energy_chain.strict.to_string(),
            self.length_chain.strict.to_string(),
        ]);
        vec![chains, av, gap, s]
    }
}

// ---------------------------------------------------------------------------
// 1-form averages

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub word: String,
    pub letters: usize,
    pub period: f64,
    pub alpha_integral: Option<f64>,
    pub average: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Log-log slope of `|average|` against the period.
    pub trend_slope: Option<f64>,
    pub decreasing: bool,
}

/// `(1/ℓ) ∫_γ α` along the orbits of `words`, in the given order.
pub fn oneform_average_decay(sys: &MagneticSystem, words: &[Word], ctx: &Context) -> Result<DecayReport> {
    let orbits = solve_classes(sys, words, &ctx.opts);
    let rows: Vec<DecayRow> = words
        .iter()
        .zip(orbits)
        .map(|(w, r)| match r {
            Ok(o) => DecayRow {
                word: w.to_string(),
                letters: w.len(),
                period: o.period,
                alpha_integral: Some(o.alpha_integral),
                average: Some(o.alpha_integral / o.period),
                error: None,
            },
            Err(e) => DecayRow {
                word: w.to_string(),
                letters: w.len(),
                period: f64::NAN,
                alpha_integral: None,
                average: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.average.map(|a| (r.period, a.abs())))
        .collect();
    let trend_slope = loglog_slope(&pts, REMAINDER_FLOOR);
    let all_zero = pts.iter().all(|p| p.1 <= REMAINDER_FLOOR);
    Ok(DecayReport {
        rows,
        trend_slope,
        decreasing: all_zero || trend_slope.is_some_and(|s| s < 0.0),
    })
}

impl Tabular for DecayReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("oneform_averages", &["word", "letters", "period", "alpha_integral", "average", "error"]);
        for r in &self.rows {
            t.push(vec![
                r.word.clone(),
                r.letters.to_string(),
                fmt_f64(r.period),
                opt_cell(r.alpha_integral),
                opt_cell(r.average),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        let mut s = Table::new("trend", &["slope", "decreasing"]);
        s.push(vec![opt_cell(self.trend_slope), self.decreasing.to_string()]);
        vec![t, s]
    }
}

// ---------------------------------------------------------------------------
// criteria

#[derive(Clone, Debug, Serialize)]
pub struct CritDpRow {
    pub word: String,
    pub crit_dp: Option<f64>,
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriteriaReport {
    pub crit_b: CritBReport,
    pub orbits: Vec<CritDpRow>,
    /// Every listed orbit solved and satisfies `T ∫ max(0, k) ≤ 4`.
    pub crit_dp_pass: bool,
    /// `"s-injectivity criteria satisfied: yes"` when either criterion holds.
    pub verdict: String,
    pub notes: Vec<String>,
}

pub fn criteria_report(sys: &MagneticSystem, grid: &CriteriaGrid, words: &[Word], ctx: &Context) -> Result<CriteriaReport> {
    let crit_b = crit_b_margin(sys, grid)?;
    let orbits: Vec<CritDpRow> = if words.is_empty() || sys.is_cover_only() {
        Vec::new()
    } else {
        let classes = canonical_classes(words)?;
        let solved = solve_classes(sys, &classes, &ctx.opts);
        classes
            .iter()
            .zip(solved)
            .map(|(w, r)| match r {
                Ok(o) => CritDpRow {
                    word: w.to_string(),
                    crit_dp: Some(o.crit_dp),
                    pass: Some(o.crit_dp_pass),
                    error: None,
                },
                Err(e) => CritDpRow {
                    word: w.to_string(),
                    crit_dp: None,
                    pass: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    };
    let crit_dp_pass = !orbits.is_empty() && orbits.iter().all(|r| r.pass == Some(true));
    let yes = crit_b.pass || crit_dp_pass;
    Ok(CriteriaReport {
        crit_b,
        orbits,
        crit_dp_pass,
        verdict: format!("s-injectivity criteria satisfied: {}", if yes { "yes" } else { "no" }),
        notes: vec![
            format!("crit_b: {CRIT_B_READING}"),
            format!("∇Y: {NABLA_Y_CONVENTION}"),
            "crit_dp: T ∫₀^T max(0, k(γ̇)) dt ≤ 4 on every listed orbit (trapezoid rule on the orbit samples)".into(),
            "verdict: yes when crit_b holds on the grid or crit_dp holds on every listed orbit".into(),
        ],
    })
}

impl Tabular for CriteriaReport {
    fn tables(&self) -> Vec<Table> {
        let mut b = Table::new("crit_b", &["worst", "worst_x", "worst_y", "worst_angle", "pass"]);
        b.push(vec![
            fmt_f64(self.crit_b.worst),
            fmt_f64(self.crit_b.worst_point[0]),
            fmt_f64(self.crit_b.worst_point[1]),
            fmt_f64(self.crit_b.worst_angle),
            self.crit_b.pass.to_string(),
        ]);
        let mut d = Table::new("crit_dp", &["word", "crit_dp", "pass", "error"]);
        for r in &self.orbits {
            d.push(vec![
                r.word.clone(),
                opt_cell(r.crit_dp),
                r.pass.map(|p| p.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        let mut v = Table::new("verdict", &["verdict"]);
        v.push(vec![self.verdict.clone()]);
        vec![b, d, v]
    }
}

// ---------------------------------------------------------------------------
// x-ray

#[derive(Clone, Debug, Serialize)]
pub struct XrayRow {
    pub word: String,
    pub i2: Option<f64>,
    /// `|I₂| ≤ bound` for potential pairs.
    pub within_bound: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct XrayReport {
    pub kind: String,
    /// `‖ξ‖_{C¹} + ‖φ‖_{C¹}` for potential pairs.
    pub c1_norm: Option<f64>,
    /// `1e−5 · c1_norm`.
    pub bound: Option<f64>,
    pub rows: Vec<XrayRow>,
    /// All rows solved and, for potential pairs, stay within the bound.
    pub pass: bool,
    pub certification: Certification,
}

/// Relative tolerance of the kernel check.
pub const KERNEL_TOLERANCE: f64 = 1e-5;

/// `I₂` of a pair over the classes of `words`. Potential pairs are checked
/// against `1e−5 (‖ξ‖_{C¹} + ‖φ‖_{C¹})`.
pub fn xray_report(sys: &MagneticSystem, spec: &PairSpec, words: &[Word], ctx: &Context) -> Result<XrayReport> {
    let pair = AnyPair::from_spec(spec, sys)?;
    let (kind, c1) = match &pair {
        AnyPair::Potential(p) => ("potential", Some(p.source.c1_norm(sys)?)),
        AnyPair::Tensor(_) => ("tensor", None),
    };
    let classes = canonical_classes(words)?;
    let orbits = solve_classes(sys, &classes, &ctx.opts);
    let bound = c1.map(|c| KERNEL_TOLERANCE * c);
    let rows: Vec<XrayRow> = classes
        .iter()
        .zip(&orbits)
        .map(|(w, r)| {
            let value = r.as_ref().map_err(|e| e.to_string()).and_then(|o| {
                if !o.refined {
                    return Err(format!("shooting stopped at residual {:.3e}", o.shooting_residual));
                }
                xray_i2(sys, &pair, o).map_err(|e| e.to_string())
            });
            match value {
                Ok(v) => XrayRow {
                    word: w.to_string(),
                    i2: Some(v),
                    within_bound: bound.map(|b| v.abs() <= b),
                    error: None,
                },
                Err(e) => XrayRow {
                    word: w.to_string(),
                    i2: None,
                    within_bound: None,
                    error: Some(e),
                },
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.error.is_none() && r.within_bound != Some(false));
    let mut certification = Certification::default();
    orbits.iter().flatten().for_each(|o| certification.add(o));
    Ok(XrayReport {
        kind: kind.into(),
        c1_norm: c1,
        bound,
        rows,
        pass,
        certification,
    })
}

/// Kernel containment for a potential pair over already solved orbits.
pub fn kernel_containment(sys: &MagneticSystem, pp: &PotentialPair, orbits: &[ClosedOrbit]) -> Result<(f64, f64)> {
    let image = crate::xray::d_mu(sys, pp);
    let mut worst: f64 = 0.0;
    for o in orbits {
        worst = worst.max(xray_i2(sys, &image, o)?.abs());
    }
    Ok((worst, KERNEL_TOLERANCE * pp.c1_norm(sys)?))
}

impl Tabular for XrayReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("xray", &["word", "i2", "within_bound", "error"]);
        for r in &self.rows {
            t.push(vec![
                r.word.clone(),
                opt_cell(r.i2),
                r.within_bound.map(|b| b.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        vec![t]
    }
}

// ---------------------------------------------------------------------------
// single orbit

#[derive(Clone, Debug, Serialize)]
pub struct OrbitReport {
    pub word: String,
    pub period: f64,
    pub action: f64,
    pub length: f64,
    pub alpha_integral: f64,
    pub el_residual: f64,
    pub closure_error: f64,
    pub max_speed_error: f64,
    pub crit_dp: f64,
    pub crit_dp_pass: bool,
    pub refined: bool,
    pub newton_iterations: usize,
    pub shooting_residual: f64,
    /// `(t, x, y, θ)` on the universal cover, thinned to at most 257 rows.
    pub trajectory: Vec<[f64; 4]>,
}

impl OrbitReport {
    pub fn new(o: &ClosedOrbit) -> Self {
        let n = o.samples.len();
        let stride = (n - 1).div_ceil(256).max(1);
        let mut trajectory = Vec::new();
        let mut i = 0;
        loop {
            let p = o.cover_sample(i);
            trajectory.push([o.samples[i].t, p.z.re, p.z.im, p.angle()]);
            if i == n - 1 {
                break;
            }
            i = (i + stride).min(n - 1);
        }
        Self {
            word: o.word.to_string(),
            period: o.period,
            action: o.action,
            length: o.length,
            alpha_integral: o.alpha_integral,
            el_residual: o.el_residual,
            closure_error: o.closure_error,
            max_speed_error: o.max_speed_error,
            crit_dp: o.crit_dp,
            crit_dp_pass: o.crit_dp_pass,
            refined: o.refined,
            newton_iterations: o.newton_iterations,
            shooting_residual: o.shooting_residual,
            trajectory,
        }
    }
}

impl Tabular for OrbitReport {
    fn tables(&self) -> Vec<Table> {
        let mut s = Table::new(
            "orbit",
            &["word", "period", "action", "length", "alpha_integral", "el_residual", "closure_error", "crit_dp", "refined"],
        );
        s.push(vec![
            self.word.clone(),
            fmt_f64(self.period),
            fmt_f64(self.action),
            fmt_f64(self.length),
            fmt_f64(self.alpha_integral),
            fmt_f64(self.el_residual),
            fmt_f64(self.closure_error),
            fmt_f64(self.crit_dp),
            self.refined.to_string(),
        ]);
        let mut t = Table::new("trajectory", &["t", "x", "y", "theta"]);
        for r in &self.trajectory {
            t.push(r.iter().map(|x| fmt_f64(*x)).collect());
        }
        vec![s, t]
    }
}
