//! Group-invariant fields on the surface and the conformal metric.
//!
//! Scalars are sums of averaged bumps: a compactly supported profile of the
//! hyperbolic distance to every translate of a center. With radius at most 1
//! (below half the systole) the orbit sum is finite and the field is exactly
//! invariant. One-forms are built as `Σ c u dv` (+ optional `dφ`) from such
//! scalars, so they are honest 1-forms on the closed surface. Symmetric
//! 2-tensors combine conformal multiples of the hyperbolic metric with
//! symmetrized products `sym(du ⊗ dv)`.
//!
//! Evaluation returns order-3 [`Jet`]s in the coordinates of the point asked
//! for, which may be a point of the universal cover far from the octagon.

use serde::{Deserialize, Serialize};

use crate::error::{MaglabError, Result};
use crate::geometry::{circumradius, cosh_distance_minus_one, Complex, Location, Surface, CHART_BUFFER};
use crate::jet::Jet;

/// Largest admissible bump radius.
pub const MAX_BUMP_RADIUS: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

/// JSON description of a scalar field: either a single bump or a constant plus
/// a list of bumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarSpec {
    Bump(BumpSpec),
    Sum {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        bumps: Vec<BumpSpec>,
    },
}

impl Default for ScalarSpec {
    fn default() -> Self {
        ScalarSpec::Sum {
            constant: 0.0,
            bumps: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub u: ScalarSpec,
    pub v: ScalarSpec,
    pub coeff: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneFormSpec {
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_part: Option<ScalarSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalTermSpec {
    pub scale: f64,
    #[serde(default)]
    pub exponent: ScalarSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSpec {
    /// Terms `scale · e^{2ψ} g_hyp`.
    #[serde(default)]
    pub conformal: Vec<ConformalTermSpec>,
    /// Terms `coeff · sym(du ⊗ dv)`.
    #[serde(default)]
    pub products: Vec<PairSpec>,
    /// Multiple of the system metric `e^{2f} g_hyp`.
    #[serde(default)]
    pub system_metric: f64,
    /// Terms `coeff · u · g` with `g` the system metric.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metric_multiples: Vec<MetricMultipleSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricMultipleSpec {
    pub coeff: f64,
    pub scalar: ScalarSpec,
}

/// Derivatives of `G(s) = arccosh(1 + s)^2` through third order.
fn acosh_sq_derivs(s: f64) -> [f64; 4] {
    if s < 0.5 {
        // G(s) = Σ c_k s^{k+1},  c_{k+1}/c_k = -(k+1)^2 / (2 (k+3/2)(k+2))
        let mut out = [0.0; 4];
        let mut c = 2.0;
        // s^k, s^(k-1), s^(k-2)
        let mut pw = [1.0, 0.0, 0.0];
        for k in 0..40 {
            let kf = k as f64;
            out[0] += c * pw[0] * s;
            out[1] += (kf + 1.0) * c * pw[0];
            out[2] += (kf + 1.0) * kf * c * pw[1];
            out[3] += (kf + 1.0) * kf * (kf - 1.0) * c * pw[2];
            c *= -(kf + 1.0) * (kf + 1.0) / (2.0 * (kf + 1.5) * (kf + 2.0));
            pw = [pw[0] * s, pw[0], pw[1]];
        }
        out
    } else {
        let x = 1.0 + s;
        let a = x.acosh();
        let q2 = s * (s + 2.0);
        let q = q2.sqrt();
        let q3 = q2 * q;
        [
            a * a,
            2.0 * a / q,
            2.0 / q2 - 2.0 * a * x / q3,
            -6.0 * x / (q2 * q2) - 2.0 * a / q3 + 6.0 * a * x * x / (q3 * q2),
        ]
    }
}

/// Derivatives of `ψ(τ) = exp(1 - 1/(1 - τ))`, the bump profile as a function
/// of `τ = (t/r)^2`.
fn profile_derivs(tau: f64) -> [f64; 4] {
    if tau >= 1.0 {
        return [0.0; 4];
    }
    let u = 1.0 / (1.0 - tau);
    let psi = (1.0 - u).exp();
    let u2 = u * u;
    let u3 = u2 * u;
    let u4 = u2 * u2;
    [
        psi,
        -u2 * psi,
        (u4 - 2.0 * u3) * psi,
        (-u4 * u2 + 6.0 * u4 * u - 6.0 * u4) * psi,
    ]
}

/// The bump profile `χ(t) = exp(1 - 1/(1 - (t/r)^2))` for `t < r`, zero beyond.
pub fn bump_profile(t: f64, radius: f64) -> f64 {
    profile_derivs((t / radius).powi(2))[0]
}

/// `cosh d(z, c) - 1` as a jet in `z`.
fn cosh_distance_jet(z: Complex, c: Complex) -> Jet {
    let x = Jet::var_x(z.re);
    let y = Jet::var_y(z.im);
    let dx = x.add_const(-c.re);
    let dy = y.add_const(-c.im);
    let num = dx * dx + dy * dy;
    let den = (x * x + y * y).scale(-(1.0 - c.norm_sqr())).add_const(1.0 - c.norm_sqr());
    (num * den.recip()).scale(2.0)
}

#[derive(Clone, Debug)]
struct BumpTerm {
    spec: BumpSpec,
    s_max: f64,
    /// Translates of the center that can reach the enlarged octagon.
    translates: Vec<Complex>,
}

impl BumpTerm {
    fn new(spec: &BumpSpec, surface: &Surface) -> Result<Self> {
        let center = Complex::new(spec.center[0], spec.center[1]);
        if !(center.norm_sqr() < 1.0) {
            return Err(MaglabError::Input(format!("bump center {center} is not inside the unit disk")));
        }
        if !(spec.radius > 0.0 && spec.radius <= MAX_BUMP_RADIUS) {
            return Err(MaglabError::Input(format!(
                "bump radius {} outside (0, {MAX_BUMP_RADIUS}]",
                spec.radius
            )));
        }
        if !spec.amplitude.is_finite() {
            return Err(MaglabError::Input("bump amplitude is not finite".into()));
        }
        let (c0, _) = surface.group().normalize_matrix(center, 1e-12)?;
        let reach = circumradius() + 4.0 * CHART_BUFFER + spec.radius + 0.5;
        let origin = Complex::new(0.0, 0.0);
        let d_center = crate::geometry::distance_unchecked(origin, c0);
        let translates = surface
            .group()
            .enumerate(reach + d_center, crate::geometry::DEFAULT_ENUMERATION_CAP)?
            .into_iter()
            .map(|g| g.matrix.apply_unchecked(c0))
            .filter(|p| crate::geometry::distance_unchecked(origin, *p) <= reach)
            .collect();
        Ok(Self {
            spec: spec.clone(),
            s_max: spec.radius.cosh() - 1.0,
            translates,
        })
    }

    fn accumulate(&self, loc: &Location, out: &mut Jet) {
        if self.spec.amplitude == 0.0 {
            return;
        }
        let r2 = self.spec.radius * self.spec.radius;
        for &p in &self.translates {
            if cosh_distance_minus_one(loc.w, p) >= self.s_max {
                continue;
            }
            let s = cosh_distance_jet(loc.z, loc.lift(p));
            if s.value() >= self.s_max {
                continue;
            }
            let tau = s.compose(acosh_sq_derivs(s.value())).scale(1.0 / r2);
            *out += tau.compose(profile_derivs(tau.value())).scale(self.spec.amplitude);
        }
    }
}

/// An invariant scalar field `constant + Σ amplitude · Σ_g χ(d(z, g·center))`.
#[derive(Clone, Debug, Default)]
pub struct ScalarField {
    constant: f64,
    bumps: Vec<BumpTerm>,
}

impl ScalarField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            bumps: Vec::new(),
        }
    }

    pub fn averaged_bump(center: Complex, radius: f64, amplitude: f64, surface: &Surface) -> Result<Self> {
        Self::from_spec(
            &ScalarSpec::Bump(BumpSpec {
                center: [center.re, center.im],
                radius,
                amplitude,
            }),
            surface,
        )
    }

    pub fn from_spec(spec: &ScalarSpec, surface: &Surface) -> Result<Self> {
        match spec {
            ScalarSpec::Bump(b) => Ok(Self {
                constant: 0.0,
                bumps: vec![BumpTerm::new(b, surface)?],
            }),
            ScalarSpec::Sum { constant, bumps } => Ok(Self {
                constant: *constant,
                bumps: bumps.iter().map(|b| BumpTerm::new(b, surface)).collect::<Result<_>>()?,
            }),
        }
    }

    pub fn spec(&self) -> ScalarSpec {
        ScalarSpec::Sum {
            constant: self.constant,
            bumps: self.bumps.iter().map(|b| b.spec.clone()).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.bumps.iter().all(|b| b.spec.amplitude == 0.0)
    }

    /// Whether the field is constant (no bump with nonzero amplitude).
    pub fn is_constant(&self) -> bool {
        self.bumps.iter().all(|b| b.spec.amplitude == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.constant *= k;
        for b in &mut out.bumps {
            b.spec.amplitude *= k;
        }
        out
    }

    pub fn sum(&self, other: &ScalarField) -> Self {
        let mut out = self.clone();
        out.constant += other.constant;
        out.bumps.extend(other.bumps.iter().cloned());
        out
    }

    /// Largest bump amplitude, a cheap sup-norm bound.
    pub fn amplitude_bound(&self) -> f64 {
        self.constant.abs() + self.bumps.iter().map(|b| b.spec.amplitude.abs()).sum::<f64>()
    }

    pub fn jet(&self, loc: &Location) -> Jet {
        let mut out = Jet::constant(self.constant);
        for b in &self.bumps {
            b.accumulate(loc, &mut out);
        }
        out
    }

    pub fn value_at(&self, surface: &Surface, z: Complex) -> Result<f64> {
        Ok(self.jet(&surface.locate(z)?).value())
    }
}

/// An invariant 1-form `Σ c u dv + dφ`.
#[derive(Clone, Debug, Default)]
pub struct OneFormField {
    pairs: Vec<(ScalarField, ScalarField, f64)>,
    exact: Option<ScalarField>,
}

impl OneFormField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_spec(spec: &OneFormSpec, surface: &Surface) -> Result<Self> {
        let pairs = spec
            .pairs
            .iter()
            .map(|p| {
                Ok((
                    ScalarField::from_spec(&p.u, surface)?,
                    ScalarField::from_spec(&p.v, surface)?,
                    p.coeff,
                ))
            })
            .collect::<Result<_>>()?;
        let exact = spec
            .exact_part
            .as_ref()
            .map(|s| ScalarField::from_spec(s, surface))
            .transpose()?;
        Ok(Self { pairs, exact })
    }

    pub fn spec(&self) -> OneFormSpec {
        OneFormSpec {
            pairs: self
                .pairs
                .iter()
                .map(|(u, v, c)| PairSpec {
                    u: u.spec(),
                    v: v.spec(),
                    coeff: *c,
                })
                .collect(),
            exact_part: self.exact.as_ref().map(|e| e.spec()),
        }
    }

    /// `c · u dv`.
    pub fn product(u: ScalarField, v: ScalarField, coeff: f64) -> Self {
        Self {
            pairs: vec![(u, v, coeff)],
            exact: None,
        }
    }

    /// `dφ`.
    pub fn exact(phi: ScalarField) -> Self {
        Self {
            pairs: Vec::new(),
            exact: Some(phi),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.pairs.iter().all(|(u, v, c)| *c == 0.0 || u.is_zero() || v.is_constant())
            && self.exact.as_ref().is_none_or(|e| e.is_constant())
    }

    pub fn has_exact_part(&self) -> bool {
        self.exact.is_some()
    }

    /// The same form with its `dφ` summand dropped.
    pub fn without_exact_part(&self) -> Self {
        Self {
            pairs: self.pairs.clone(),
            exact: None,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            pairs: self.pairs.iter().map(|(u, v, c)| (u.clone(), v.clone(), c * k)).collect(),
            exact: self.exact.as_ref().map(|e| e.scaled(k)),
        }
    }

    pub fn sum(&self, other: &OneFormField) -> Self {
        let mut pairs = self.pairs.clone();
        pairs.extend(other.pairs.iter().cloned());
        let exact = match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Some(a.sum(b)),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        Self { pairs, exact }
    }

    /// Component jets `(α₁, α₂)`, exact through order 2.
    pub fn jets(&self, loc: &Location) -> [Jet; 2] {
        let mut out = [Jet::zero(), Jet::zero()];
        for (u, v, c) in &self.pairs {
            let uj = u.jet(loc).scale(*c);
            let vj = v.jet(loc);
            out[0] += uj * vj.dx();
            out[1] += uj * vj.dy();
        }
        if let Some(phi) = &self.exact {
            let p = phi.jet(loc);
            out[0] += p.dx();
            out[1] += p.dy();
        }
        out
    }

    /// Coefficient of `dα = (∂₁α₂ − ∂₂α₁) dx∧dy`, exact through order 2.
    pub fn exterior_derivative(&self, loc: &Location) -> Jet {
        let mut out = Jet::zero();
        for (u, v, c) in &self.pairs {
            let uj = u.jet(loc).scale(*c);
            let vj = v.jet(loc);
            out += uj.dx() * vj.dy() - uj.dy() * vj.dx();
        }
        out
    }

    /// Sup-norm-type size bound used for relative tolerances.
    pub fn amplitude_bound(&self) -> f64 {
        self.pairs
            .iter()
            .map(|(u, v, c)| c.abs() * u.amplitude_bound() * v.amplitude_bound())
            .sum::<f64>()
            + self.exact.as_ref().map_or(0.0, |e| e.amplitude_bound())
    }
}

/// An invariant symmetric 2-tensor.
#[derive(Clone, Debug, Default)]
pub struct SymTensorField {
    conformal: Vec<(f64, ScalarField)>,
    products: Vec<(ScalarField, ScalarField, f64)>,
    system_metric: f64,
    metric_multiples: Vec<(f64, ScalarField)>,
}

impl SymTensorField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_spec(spec: &TensorSpec, surface: &Surface) -> Result<Self> {
        Ok(Self {
            conformal: spec
                .conformal
                .iter()
                .map(|t| Ok((t.scale, ScalarField::from_spec(&t.exponent, surface)?)))
                .collect::<Result<_>>()?,
            products: spec
                .products
                .iter()
                .map(|p| {
                    Ok((
                        ScalarField::from_spec(&p.u, surface)?,
                        ScalarField::from_spec(&p.v, surface)?,
                        p.coeff,
                    ))
                })
                .collect::<Result<_>>()?,
            system_metric: spec.system_metric,
            metric_multiples: spec
                .metric_multiples
                .iter()
                .map(|t| Ok((t.coeff, ScalarField::from_spec(&t.scalar, surface)?)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn spec(&self) -> TensorSpec {
        TensorSpec {
            conformal: self
                .conformal
                .iter()
                .map(|(scale, e)| ConformalTermSpec {
                    scale: *scale,
                    exponent: e.spec(),
                })
                .collect(),
            products: self
                .products
                .iter()
                .map(|(u, v, c)| PairSpec {
                    u: u.spec(),
                    v: v.spec(),
                    coeff: *c,
                })
                .collect(),
            system_metric: self.system_metric,
            metric_multiples: self
                .metric_multiples
                .iter()
                .map(|(c, u)| MetricMultipleSpec {
                    coeff: *c,
                    scalar: u.spec(),
                })
                .collect(),
        }
    }

    /// `coeff · u · g` with `g` the evaluating system's metric.
    pub fn metric_multiple(u: ScalarField, coeff: f64) -> Self {
        Self {
            metric_multiples: vec![(coeff, u)],
            ..Self::default()
        }
    }

    /// `c · g` with `g` the metric of whichever system evaluates the tensor.
    pub fn system_metric(c: f64) -> Self {
        Self {
            system_metric: c,
            ..Self::default()
        }
    }

    /// `scale · e^{2ψ} g_hyp`.
    pub fn conformal(scale: f64, exponent: ScalarField) -> Self {
        Self {
            conformal: vec![(scale, exponent)],
            ..Self::default()
        }
    }

    /// `coeff · sym(du ⊗ dv)`.
    pub fn product(u: ScalarField, v: ScalarField, coeff: f64) -> Self {
        Self {
            products: vec![(u, v, coeff)],
            ..Self::default()
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            conformal: self.conformal.iter().map(|(s, e)| (s * k, e.clone())).collect(),
            products: self.products.iter().map(|(u, v, c)| (u.clone(), v.clone(), c * k)).collect(),
            system_metric: self.system_metric * k,
            metric_multiples: self.metric_multiples.iter().map(|(c, u)| (c * k, u.clone())).collect(),
        }
    }

    pub fn sum(&self, other: &SymTensorField) -> Self {
        let mut out = self.clone();
        out.conformal.extend(other.conformal.iter().cloned());
        out.products.extend(other.products.iter().cloned());
        out.system_metric += other.system_metric;
        out.metric_multiples.extend(other.metric_multiples.iter().cloned());
        out
    }

    /// Components `(p₁₁, p₁₂, p₂₂)`; `lambda` is the log conformal factor of
    /// the evaluating system's metric.
    pub fn jets(&self, loc: &Location, lambda: &Jet) -> [Jet; 3] {
        let mut out = [Jet::zero(); 3];
        let mut iso = Jet::zero();
        if !self.conformal.is_empty() {
            let hyp = hyperbolic_log_factor(loc.z);
            for (scale, psi) in &self.conformal {
                iso += (psi.jet(loc) + hyp).scale(2.0).exp().scale(*scale);
            }
        }
        if self.system_metric != 0.0 || !self.metric_multiples.is_empty() {
            let g = lambda.scale(2.0).exp();
            let mut weight = Jet::constant(self.system_metric);
            for (c, u) in &self.metric_multiples {
                weight += u.jet(loc).scale(*c);
            }
            iso += weight * g;
        }
        out[0] += iso;
        out[2] += iso;
        for (u, v, c) in &self.products {
            let du = u.jet(loc);
            let dv = v.jet(loc);
            let (ux, uy, vx, vy) = (du.dx(), du.dy(), dv.dx(), dv.dy());
            out[0] += (ux * vx).scale(*c);
            out[1] += (ux * vy + uy * vx).scale(0.5 * c);
            out[2] += (uy * vy).scale(*c);
        }
        out
    }
}

/// `ln 2 − ln(1 − |z|²)`, the log conformal factor of the hyperbolic metric.
pub fn hyperbolic_log_factor(z: Complex) -> Jet {
    let x = Jet::var_x(z.re);
    let y = Jet::var_y(z.im);
    (x * x + y * y).scale(-1.0).add_const(1.0).ln().scale(-1.0).add_const(std::f64::consts::LN_2)
}

/// The metric `e^{2f} g_hyp = e^{2λ} δ` with `λ = f + ln 2 − ln(1 − |z|²)`.
#[derive(Clone, Debug, Default)]
pub struct ConformalMetric {
    pub f: ScalarField,
}

/// Christoffel symbols `gamma[k][i][j] = Γ^k_ij`.
pub type Christoffel<T> = [[[T; 2]; 2]; 2];

impl ConformalMetric {
    pub fn new(f: ScalarField) -> Self {
        Self { f }
    }

    pub fn hyperbolic() -> Self {
        Self::default()
    }

    /// Jet of the log conformal factor λ.
    pub fn lambda(&self, loc: &Location) -> Jet {
        self.f.jet(loc) + hyperbolic_log_factor(loc.z)
    }

    pub fn christoffel(&self, loc: &Location) -> Christoffel<f64> {
        let g = christoffel_jets(&self.lambda(loc));
        let mut out = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out[k][i][j] = g[k][i][j].value();
                }
            }
        }
        out
    }

    pub fn gaussian_curvature(&self, loc: &Location) -> f64 {
        curvature(&self.lambda(loc))
    }
}

/// `Γ^k_ij = δ_ik λ_j + δ_jk λ_i − δ_ij λ_k`, exact through order 2.
pub fn christoffel_jets(lambda: &Jet) -> Christoffel<Jet> {
    let d = [lambda.dx(), lambda.dy()];
    let mut out = [[[Jet::zero(); 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = Jet::zero();
                if i == k {
                    v += d[j];
                }
                if j == k {
                    v += d[i];
                }
                if i == j {
                    v = v - d[k];
                }
                out[k][i][j] = v;
            }
        }
    }
    out
}

/// Gaussian curvature `K = −e^{−2λ} Δ λ` of `e^{2λ} δ`.
pub fn curvature(lambda: &Jet) -> f64 {
    -(-2.0 * lambda.value()).exp() * lambda.laplacian()
}

/// Metric coefficient `e^{2λ}` at a point.
#[inline]
pub fn metric_factor(lambda: f64) -> f64 {
    (2.0 * lambda).exp()
}

pub fn inner(lambda: f64, v: [f64; 2], w: [f64; 2]) -> f64 {
    metric_factor(lambda) * (v[0] * w[0] + v[1] * w[1])
}

pub fn norm(lambda: f64, v: [f64; 2]) -> f64 {
    inner(lambda, v, v).sqrt()
}

/// Index lowering `v ↦ g(v, ·)`.
pub fn lower(lambda: f64, v: [f64; 2]) -> [f64; 2] {
    let e = metric_factor(lambda);
    [e * v[0], e * v[1]]
}

/// Index raising, inverse of [`lower`].
pub fn raise(lambda: f64, xi: [f64; 2]) -> [f64; 2] {
    let e = metric_factor(-lambda);
    [e * xi[0], e * xi[1]]
}
