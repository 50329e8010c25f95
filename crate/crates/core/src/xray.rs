//! The magnetic X-ray transform on pairs `[p, q]` of a symmetric 2-tensor and
//! a 1-form, the coupled operators `D_μ`, `D_μ*` and their identities.
//!
//! Potential pairs `D_μ[ξ, φ] = [Dξ, Yξ + dφ]` integrate to zero over every
//! closed magnetic geodesic: along the flow,
//! `d/dt (ξ(γ̇) + φ(γ)) = Dξ(γ̇, γ̇) + ξ(Yγ̇) + dφ(γ̇)`. So the range of `D_μ`
//! lies in the kernel of `I₂`, which is what the kernel checks measure.
//!
//! Divergences use `(tr ∇p)_j = g^{ik} ∇_i p_{kj}`, the trace over a
//! g-orthonormal frame of `(∇_{e_i} p)(e_i, ·)`.

use serde::{Deserialize, Serialize};

use crate::domain::{FundamentalDomain, QuadratureResult};
use crate::dynamics::{flow, FlowOptions, MagneticSystem, PhasePoint, PointData};
use crate::error::{MaglabError, Result};
use crate::fields::{christoffel_jets, OneFormField, OneFormSpec, ScalarField, ScalarSpec, SymTensorField, TensorSpec};
use crate::geometry::{Complex, Surface};
use crate::jet::Jet;
use crate::orbit::ClosedOrbit;

/// Jets of a pair at one point: `p = (p₁₁, p₁₂, p₂₂)`, `q = (q₁, q₂)`.
#[derive(Clone, Copy, Debug)]
pub struct PairJets {
    pub p: [Jet; 3],
    pub q: [Jet; 2],
}

impl PairJets {
    pub fn p_matrix(&self) -> [[f64; 2]; 2] {
        let (a, b, c) = (self.p[0].value(), self.p[1].value(), self.p[2].value());
        [[a, b], [b, c]]
    }

    /// `p(v, v) + q(v)`.
    pub fn on_vector(&self, v: [f64; 2]) -> f64 {
        let p = self.p_matrix();
        let mut out = 0.0;
        for i in 0..2 {
            out += self.q[i].value() * v[i];
            for j in 0..2 {
                out += p[i][j] * v[i] * v[j];
            }
        }
        out
    }
}

/// Anything that yields a tensor pair at points of the surface.
pub trait PairField {
    fn pair_jets(&self, pd: &PointData) -> PairJets;
}

/// An explicit pair `[p, q]`.
#[derive(Clone, Debug, Default)]
pub struct TensorPair {
    pub p: SymTensorField,
    pub q: OneFormField,
}

impl TensorPair {
    pub fn new(p: SymTensorField, q: OneFormField) -> Self {
        Self { p, q }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.p.scaled(k), self.q.scaled(k))
    }

    pub fn sum(&self, other: &TensorPair) -> Self {
        Self::new(self.p.sum(&other.p), self.q.sum(&other.q))
    }
}

impl PairField for TensorPair {
    fn pair_jets(&self, pd: &PointData) -> PairJets {
        PairJets {
            p: self.p.jets(&pd.loc, &pd.lambda),
            q: self.q.jets(&pd.loc),
        }
    }
}

/// The argument `[ξ, φ]` of `D_μ`.
#[derive(Clone, Debug, Default)]
pub struct PotentialPair {
    pub xi: OneFormField,
    pub phi: ScalarField,
}

impl PotentialPair {
    pub fn new(xi: OneFormField, phi: ScalarField) -> Self {
        Self { xi, phi }
    }

    /// `‖ξ‖_{C¹} + ‖φ‖_{C¹}` estimated as the largest `|ξ|_g + |Dξ|_g + |φ| + |dφ|_g`
    /// over a grid of the octagon.
    pub fn c1_norm(&self, sys: &MagneticSystem) -> Result<f64> {
        let grid = crate::dynamics::CriteriaGrid::octagon(sys.surface(), 8, 16, 1);
        let image = d_mu(sys, self);
        let mut worst: f64 = 0.0;
        for &z in &grid.points {
            let pd = sys.point(z)?;
            let e = (-2.0 * pd.lambda.value()).exp();
            let xi = self.xi.jets(&pd.loc);
            let phi = self.phi.jet(&pd.loc);
            let pj = image.pair_jets(&pd);
            let xi_n = (e * (xi[0].value().powi(2) + xi[1].value().powi(2))).sqrt();
            let p = pj.p_matrix();
            let dxi_n = e * (p[0][0].powi(2) + 2.0 * p[0][1].powi(2) + p[1][1].powi(2)).sqrt();
            let dphi_n = (e * (phi.dx().value().powi(2) + phi.dy().value().powi(2))).sqrt();
            worst = worst.max(xi_n + dxi_n + phi.value().abs() + dphi_n);
        }
        Ok(worst)
    }
}

/// `D_μ[ξ, φ]`, evaluated lazily.
#[derive(Clone, Debug)]
pub struct PotentialImage {
    pub source: PotentialPair,
}

/// `D_μ[ξ, φ] = [Dξ, Yξ + dφ]` with `D` the symmetrized covariant derivative.
pub fn d_mu(_sys: &MagneticSystem, pp: &PotentialPair) -> PotentialImage {
    PotentialImage { source: pp.clone() }
}

impl PairField for PotentialImage {
    fn pair_jets(&self, pd: &PointData) -> PairJets {
        let xi = self.source.xi.jets(&pd.loc);
        let phi = self.source.phi.jet(&pd.loc);
        let gamma = christoffel_jets(&pd.lambda);
        let dxi = [[xi[0].dx(), xi[1].dx()], [xi[0].dy(), xi[1].dy()]];
        // (Dξ)_ij = ½(∂_i ξ_j + ∂_j ξ_i) − Γ^k_ij ξ_k
        let sym = |i: usize, j: usize| -> Jet {
            let mut out = (dxi[i][j] + dxi[j][i]).scale(0.5);
            for (k, x) in xi.iter().enumerate() {
                out = out - gamma[k][i][j] * *x;
            }
            out
        };
        // (Yξ)_i = ξ_k Y^k_i = b (ξ₂, −ξ₁)
        let b = pd.b;
        PairJets {
            p: [sym(0, 0), sym(0, 1), sym(1, 1)],
            q: [b * xi[1] + phi.dx(), -(b * xi[0]) + phi.dy()],
        }
    }
}

fn check_orbit(sys: &MagneticSystem, orbit: &ClosedOrbit) -> Result<()> {
    if orbit.system_fingerprint != sys.fingerprint() {
        return Err(MaglabError::Input(format!(
            "orbit of class {} was computed for a different magnetic system",
            orbit.word
        )));
    }
    Ok(())
}

/// `I₂[p, q](c) = ∫ p(γ̇, γ̇) + q(γ̇) dt` over the refined orbit of the class.
pub fn xray_i2<P: PairField + ?Sized>(sys: &MagneticSystem, pair: &P, orbit: &ClosedOrbit) -> Result<f64> {
    check_orbit(sys, orbit)?;
    orbit.integrate(|s| {
        let pd = sys.point(s.point.z)?;
        Ok(pair.pair_jets(&pd).on_vector(s.point.v))
    })
}

/// `I₁[q, φ](c) = ∫ q(γ̇) + φ(γ) dt`.
pub fn xray_i1(sys: &MagneticSystem, q: &OneFormField, phi: &ScalarField, orbit: &ClosedOrbit) -> Result<f64> {
    check_orbit(sys, orbit)?;
    orbit.integrate(|s| {
        let pd = sys.point(s.point.z)?;
        let qj = q.jets(&pd.loc);
        Ok(qj[0].value() * s.point.v[0] + qj[1].value() * s.point.v[1] + phi.jet(&pd.loc).value())
    })
}

/// Pointwise value of `D_μ*[p, q] = [−tr ∇p − Yq, −tr ∇q]` as a 1-form and a function.
pub fn d_mu_star_at(pd: &PointData, pj: &PairJets) -> ([f64; 2], f64) {
    let gamma = christoffel_jets(&pd.lambda);
    let g_inv = (-2.0 * pd.lambda.value()).exp();
    let p = pj.p_matrix();
    let dp = |i: usize, k: usize, j: usize| -> f64 {
        let idx = match (k.min(j), k.max(j)) {
            (0, 0) => 0,
            (0, 1) => 1,
            _ => 2,
        };
        pj.p[idx].d(i).value()
    };
    let mut div_p = [0.0; 2];
    for (j, out) in div_p.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..2 {
            // g^{ik} = e^{−2λ} δ^{ik}
            let k = i;
            let mut term = dp(i, k, j);
            for l in 0..2 {
                term -= gamma[l][i][k].value() * p[l][j] + gamma[l][i][j].value() * p[k][l];
            }
            acc += term;
        }
        *out = g_inv * acc;
    }
    let mut div_q = 0.0;
    for i in 0..2 {
        let mut term = pj.q[i].d(i).value();
        for l in 0..2 {
            term -= gamma[l][i][i].value() * pj.q[l].value();
        }
        div_q += term;
    }
    div_q *= g_inv;
    let b = pd.b.value();
    let yq = [b * pj.q[1].value(), -b * pj.q[0].value()];
    ([-div_p[0] - yq[0], -div_p[1] - yq[1]], -div_q)
}

/// `D_μ*` of a pair at a point of the disk.
pub fn d_mu_star<P: PairField + ?Sized>(sys: &MagneticSystem, pair: &P, z: Complex) -> Result<([f64; 2], f64)> {
    let pd = sys.point(z)?;
    Ok(d_mu_star_at(&pd, &pair.pair_jets(&pd)))
}

/// `L²` inner product of pairs, `∫ ⟨p, p'⟩_g + ⟨q, q'⟩_g dvol_g` over the octagon.
pub fn pair_inner<P, Q>(sys: &MagneticSystem, a: &P, b: &Q, domain: &FundamentalDomain) -> Result<QuadratureResult>
where
    P: PairField + ?Sized,
    Q: PairField + ?Sized,
{
    domain.integrate(|z| {
        let pd = sys.point(z)?;
        let (x, y) = (a.pair_jets(&pd), b.pair_jets(&pd));
        let e2 = (2.0 * pd.lambda.value()).exp();
        let (px, py) = (x.p_matrix(), y.p_matrix());
        let pp = px[0][0] * py[0][0] + 2.0 * px[0][1] * py[0][1] + px[1][1] * py[1][1];
        let qq = x.q[0].value() * y.q[0].value() + x.q[1].value() * y.q[1].value();
        // relative to the hyperbolic density already in the weights
        Ok((pp / (e2 * e2) + qq / e2) * e2 * hyperbolic_density_inverse(z))
    })
}

/// `L²` inner product of a potential pair with a 1-form/function pair given pointwise.
pub fn potential_inner<F>(sys: &MagneticSystem, pp: &PotentialPair, other: F, domain: &FundamentalDomain) -> Result<QuadratureResult>
where
    F: Fn(&PointData) -> ([f64; 2], f64),
{
    domain.integrate(|z| {
        let pd = sys.point(z)?;
        let xi = pp.xi.jets(&pd.loc);
        let phi = pp.phi.jet(&pd.loc).value();
        let (eta, psi) = other(&pd);
        let e2 = (2.0 * pd.lambda.value()).exp();
        let v = (xi[0].value() * eta[0] + xi[1].value() * eta[1]) / e2 + phi * psi;
        Ok(v * e2 * hyperbolic_density_inverse(z))
    })
}

fn hyperbolic_density_inverse(z: Complex) -> f64 {
    let s = 1.0 - z.norm_sqr();
    s * s / 4.0
}

/// Both sides of `⟨D_μ u, w⟩ = ⟨u, D_μ* w⟩`.
pub fn adjointness<P: PairField + ?Sized>(
    sys: &MagneticSystem,
    u: &PotentialPair,
    w: &P,
    domain: &FundamentalDomain,
) -> Result<(QuadratureResult, QuadratureResult)> {
    let lhs = pair_inner(sys, &d_mu(sys, u), w, domain)?;
    let rhs = potential_inner(sys, u, |pd| d_mu_star_at(pd, &w.pair_jets(pd)), domain)?;
    Ok((lhs, rhs))
}

/// `L²` norm of `D_μ*` of a pair; zero for solenoidal pairs.
pub fn solenoidal_defect<P: PairField + ?Sized>(sys: &MagneticSystem, pair: &P, domain: &FundamentalDomain) -> Result<QuadratureResult> {
    let r = domain.integrate(|z| {
        let pd = sys.point(z)?;
        let (eta, psi) = d_mu_star_at(&pd, &pair.pair_jets(&pd));
        let e2 = (2.0 * pd.lambda.value()).exp();
        let v = (eta[0] * eta[0] + eta[1] * eta[1]) / e2 + psi * psi;
        Ok(v * e2 * hyperbolic_density_inverse(z))
    })?;
    Ok(QuadratureResult {
        value: r.value.max(0.0).sqrt(),
        error_estimate: r.error_estimate / (2.0 * r.value.abs().sqrt().max(1e-300)),
        warning: r.warning,
    })
}

/// Largest defect of `d/dt (ξ(γ̇) + φ(γ)) = Dξ(γ̇, γ̇) + (Yξ + dφ)(γ̇)` over
/// the given phase points, with the derivative taken by centered differences
/// of step `step` along the magnetic flow.
pub fn flow_identity_check(sys: &MagneticSystem, pp: &PotentialPair, points: &[PhasePoint], step: f64) -> Result<f64> {
    let image = d_mu(sys, pp);
    let observable = |p: &PhasePoint| -> Result<f64> {
        let pd = sys.point(p.z)?;
        let xi = pp.xi.jets(&pd.loc);
        Ok(xi[0].value() * p.v[0] + xi[1].value() * p.v[1] + pp.phi.jet(&pd.loc).value())
    };
    let mut worst: f64 = 0.0;
    for p in points {
        let fwd = flow(sys, p, step, FlowOptions::steps(1).in_cover())?.end;
        let bwd = flow(sys, p, -step, FlowOptions::steps(1).in_cover())?.end;
        let derivative = (observable(&fwd)? - observable(&bwd)?) / (2.0 * step);
        let pd = sys.point(p.z)?;
        let predicted = image.pair_jets(&pd).on_vector(p.v);
        worst = worst.max((derivative - predicted).abs());
    }
    Ok(worst)
}

/// Serialized pair: either explicit components or a potential `[ξ, φ]`
/// whose image under `D_μ` is meant.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSpec {
    Potential {
        xi: OneFormSpec,
        #[serde(default)]
        phi: ScalarSpec,
    },
    Tensor {
        #[serde(default)]
        p: TensorSpec,
        #[serde(default)]
        q: OneFormSpec,
    },
}

/// A pair ready for evaluation.
#[derive(Clone, Debug)]
pub enum AnyPair {
    Tensor(TensorPair),
    Potential(PotentialImage),
}

impl PairField for AnyPair {
    fn pair_jets(&self, pd: &PointData) -> PairJets {
        match self {
            AnyPair::Tensor(t) => t.pair_jets(pd),
            AnyPair::Potential(p) => p.pair_jets(pd),
        }
    }
}

impl AnyPair {
    pub fn from_spec(spec: &PairSpec, sys: &MagneticSystem) -> Result<Self> {
        let surface: &Surface = sys.surface();
        Ok(match spec {
            PairSpec::Tensor { p, q } => AnyPair::Tensor(TensorPair::new(
                SymTensorField::from_spec(p, surface)?,
                OneFormField::from_spec(q, surface)?,
            )),
            PairSpec::Potential { xi, phi } => AnyPair::Potential(d_mu(
                sys,
                &PotentialPair::new(OneFormField::from_spec(xi, surface)?, ScalarField::from_spec(phi, surface)?),
            )),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use crate::orbit::{solve_class, SolverOptions};
    use rand::{RngExt, SeedableRng};

    fn bump(s: &Surface, x: f64, y: f64, r: f64, a: f64) -> ScalarField {
        ScalarField::averaged_bump(Complex::new(x, y), r, a, s).unwrap()
    }

    fn system(s: &Surface) -> MagneticSystem {
        MagneticSystem::new(
            s.clone(),
            bump(s, 0.2, 0.1, 0.9, 0.05),
            OneFormField::product(bump(s, -0.3, 0.2, 1.0, 0.5), bump(s, 0.1, -0.4, 0.8, 0.6), 0.3),
        )
    }

    fn potential(s: &Surface) -> PotentialPair {
        PotentialPair::new(
            OneFormField::product(bump(s, 0.2, 0.2, 1.0, 0.4), bump(s, -0.1, 0.1, 1.0, 0.4), 0.5),
            bump(s, 0.0, -0.2, 1.0, 0.2),
        )
    }

    fn random_points(sys: &MagneticSystem, n: usize, seed: u64) -> Vec<PhasePoint> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z = Complex::from_polar(0.6 * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
                PhasePoint::from_angle(sys, z, rng.random_range(0.0..std::f64::consts::TAU)).unwrap()
            })
            .collect()
    }

    #[test]
    fn potential_image_examples() {
        let s = Surface::standard().unwrap();
        let sys = system(&s);
        let phi = bump(&s, 0.1, 0.1, 0.8, 1.0);
        let img = d_mu(&sys, &PotentialPair::new(OneFormField::zero(), phi.clone()));
        let pd = sys.point(Complex::new(0.2, -0.1)).unwrap();
        let pj = img.pair_jets(&pd);
        let dphi = phi.jet(&pd.loc);
        assert!(pj.p.iter().all(|j| j.value() == 0.0));
        assert!((pj.q[0].value() - dphi.dx().value()).abs() < 1e-15);
        // constants are in the kernel
        let c = d_mu(&sys, &PotentialPair::new(OneFormField::zero(), ScalarField::constant(3.0)));
        let pj = c.pair_jets(&pd);
        assert!(pj.p.iter().chain(pj.q.iter()).all(|j| j.value().abs() < 1e-15));
    }

    #[test]
    fn flow_identity_and_order() {
        let s = Surface::standard().unwrap();
        let sys = system(&s);
        // the defect is h²/6 times a third derivative along the flow, so the
        // threshold needs fields of modest C³ size
        let full = potential(&s);
        let pp = PotentialPair::new(full.xi.scaled(0.1), full.phi.scaled(0.1));
        let pts = random_points(&sys, 200, 3);
        let d = flow_identity_check(&sys, &pp, &pts, 1e-4).unwrap();
        assert!(d < 1e-7, "{d}");
        let d1 = flow_identity_check(&sys, &pp, &pts[..20], 4e-2).unwrap();
        let d2 = flow_identity_check(&sys, &pp, &pts[..20], 2e-2).unwrap();
        let ratio = d1 / d2;
        assert!((3.0..5.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn metric_is_parallel_and_adjointness_holds() {
        let s = Surface::standard().unwrap();
        let sys = system(&s);
        let g = TensorPair::new(SymTensorField::system_metric(2.0), OneFormField::zero());
        let (eta, psi) = d_mu_star(&sys, &g, Complex::new(0.3, 0.2)).unwrap();
        assert!(eta[0].abs() < 1e-12 && eta[1].abs() < 1e-12 && psi == 0.0);
        let domain = FundamentalDomain::new(8, 12, 1e-6).unwrap();
        assert!(solenoidal_defect(&sys, &g, &domain).unwrap().value < 1e-10);
        let u = potential(&s);
        let w = TensorPair::new(
            SymTensorField::product(bump(&s, 0.1, 0.2, 0.9, 1.0), bump(&s, -0.3, -0.1, 0.8, 1.0), 0.7)
                .sum(&SymTensorField::conformal(0.2, bump(&s, 0.2, -0.2, 0.6, 0.3))),
            OneFormField::product(bump(&s, 0.4, 0.0, 0.9, 1.0), bump(&s, 0.0, 0.4, 0.9, 1.0), 1.0),
        );
        let (lhs, rhs) = adjointness(&sys, &u, &w, &domain).unwrap();
        let rel = (lhs.value - rhs.value).abs() / lhs.value.abs().max(rhs.value.abs());
        assert!(rel < 1e-4, "{} vs {}", lhs.value, rhs.value);
        assert!(solenoidal_defect(&sys, &d_mu(&sys, &u), &domain).unwrap().value > 1e-3);
    }

    #[test]
    fn orbit_transforms() {
        let s = Surface::standard().unwrap();
        let sys = system(&s);
        let o = solve_class(&sys, &"ab".parse().unwrap(), &SolverOptions::default()).unwrap();
        let g = TensorPair::new(SymTensorField::system_metric(1.0), OneFormField::zero());
        assert!((xray_i2(&sys, &g, &o).unwrap() - o.length).abs() < 1e-8);
        let a = TensorPair::new(SymTensorField::zero(), sys.alpha().unwrap().clone());
        assert!((xray_i2(&sys, &a, &o).unwrap() - (o.length - o.action)).abs() < 1e-8);
        let pp = potential(&s);
        let v = xray_i2(&sys, &d_mu(&sys, &pp), &o).unwrap();
        assert!(v.abs() < 1e-6, "{v}");
        let phi = bump(&s, 0.1, 0.1, 0.8, 1.0);
        assert!(xray_i1(&sys, &OneFormField::exact(phi), &ScalarField::zero(), &o).unwrap().abs() < 1e-8);
        let t = xray_i1(&sys, &OneFormField::zero(), &ScalarField::constant(1.0), &o).unwrap();
        assert!((t - o.period).abs() < 1e-10);
        let other = sys.with_f(ScalarField::zero());
        assert!(matches!(xray_i2(&other, &g, &o), Err(MaglabError::Input(_))));
    }
}
