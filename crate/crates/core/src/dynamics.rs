//! Magnetic systems, the Lorentz force, the magnetic geodesic flow and the
//! pointwise injectivity criteria.
//!
//! In the conformal coordinates `g = e^{2λ} δ` the magnetic geodesic equation
//! reads
//!
//! ```text
//! z'' = −2 (∇λ·z') z' + |z'|² ∇λ + b J z',     J(v₁, v₂) = (−v₂, v₁),
//! ```
//!
//! with `b = (∂₁α₂ − ∂₂α₁) e^{−2λ}`, so that `dα(v, w) = g(w, b J v)`.

use log::warn;
use serde::Serialize;

use crate::error::{MaglabError, Result};
use crate::fields::{christoffel_jets, curvature, metric_factor, ConformalMetric, OneFormField, ScalarField};
use crate::geometry::{Complex, Location, MobiusTransform, Surface};
use crate::jet::Jet;

/// How the second orthonormal direction enters the solenoidal criterion.
pub const CRIT_B_READING: &str =
    "sec and the Lorentz term are evaluated on w ⟂ v (the only sectional plane in dimension 2); w = v would make the criterion vacuous";
/// Convention for the covariant derivative of the Lorentz force in k_x(v).
pub const NABLA_Y_CONVENTION: &str = "(∇_z Y)(v): derivative of Y in the direction z ⟂ v, applied to v";

/// Source of the magnetic field.
#[derive(Clone, Debug)]
pub enum MagneticSource {
    /// An honest 1-form on the closed surface.
    Exact(OneFormField),
    /// A prescribed constant field strength `b`, only meaningful on the
    /// universal cover (no closed exact system has constant nonzero `b`).
    ConstantCover(f64),
}

#[derive(Clone, Debug)]
pub struct MagneticSystem {
    surface: Surface,
    pub metric: ConformalMetric,
    pub source: MagneticSource,
    pub id: String,
}

/// Local geometric data at a point.
#[derive(Clone, Copy, Debug)]
pub struct PointData {
    pub loc: Location,
    /// Log conformal factor, exact through order 3.
    pub lambda: Jet,
    /// Components of α, exact through order 2 (zero for a prescribed field).
    pub alpha: [Jet; 2],
    /// Field strength `b = dα / dvol_g`, exact through order 2.
    pub b: Jet,
}

impl PointData {
    pub fn metric_factor(&self) -> f64 {
        metric_factor(self.lambda.value())
    }

    pub fn inner(&self, v: [f64; 2], w: [f64; 2]) -> f64 {
        self.metric_factor() * (v[0] * w[0] + v[1] * w[1])
    }

    pub fn norm(&self, v: [f64; 2]) -> f64 {
        self.inner(v, v).sqrt()
    }

    pub fn curvature(&self) -> f64 {
        curvature(&self.lambda)
    }

    /// Lorentz force `Y v = b J v`.
    pub fn lorentz(&self, v: [f64; 2]) -> [f64; 2] {
        let b = self.b.value();
        [-b * v[1], b * v[0]]
    }

    /// `(∇_w Y)(v)` from the Christoffel symbols and the jet of `b`.
    pub fn nabla_lorentz(&self, w: [f64; 2], v: [f64; 2]) -> [f64; 2] {
        let gamma = christoffel_jets(&self.lambda);
        let b = self.b.value();
        let db = self.b.grad();
        // Y^k_j = b J^k_j
        let jm = [[0.0, -1.0], [1.0, 0.0]];
        let y = |k: usize, j: usize| b * jm[k][j];
        let mut out = [0.0; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut d = db[i] * jm[k][j];
                    for l in 0..2 {
                        d += gamma[k][i][l].value() * y(l, j) - gamma[l][i][j].value() * y(k, l);
                    }
                    out[k] += w[i] * d * v[j];
                }
            }
        }
        out
    }

    /// Right-hand side of the magnetic geodesic equation.
    pub fn acceleration(&self, v: [f64; 2]) -> [f64; 2] {
        let gl = self.lambda.grad();
        let dot = gl[0] * v[0] + gl[1] * v[1];
        let vv = v[0] * v[0] + v[1] * v[1];
        let b = self.b.value();
        [
            -2.0 * dot * v[0] + vv * gl[0] - b * v[1],
            -2.0 * dot * v[1] + vv * gl[1] + b * v[0],
        ]
    }
}

impl MagneticSystem {
    pub fn new(surface: Surface, f: ScalarField, alpha: OneFormField) -> Self {
        Self {
            surface,
            metric: ConformalMetric::new(f),
            source: MagneticSource::Exact(alpha),
            id: "system".into(),
        }
    }

    /// The hyperbolic plane with a prescribed constant field strength.
    pub fn constant_field_cover(surface: Surface, b: f64) -> Self {
        Self {
            surface,
            metric: ConformalMetric::hyperbolic(),
            source: MagneticSource::ConstantCover(b),
            id: format!("cover-constant-b-{b}"),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    /// Hash of the field specifications; orbits remember it to detect misuse.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let mut h = DefaultHasher::new();
        serde_json::to_string(&self.metric.f.spec()).unwrap_or_default().hash(&mut h);
        match &self.source {
            MagneticSource::Exact(a) => serde_json::to_string(&a.spec()).unwrap_or_default().hash(&mut h),
            MagneticSource::ConstantCover(b) => b.to_bits().hash(&mut h),
        }
        h.finish()
    }

    pub fn f(&self) -> &ScalarField {
        &self.metric.f
    }

    pub fn alpha(&self) -> Option<&OneFormField> {
        match &self.source {
            MagneticSource::Exact(a) => Some(a),
            MagneticSource::ConstantCover(_) => None,
        }
    }

    pub fn is_cover_only(&self) -> bool {
        matches!(self.source, MagneticSource::ConstantCover(_))
    }

    /// Same metric, different 1-form.
    pub fn with_alpha(&self, alpha: OneFormField) -> Self {
        Self {
            surface: self.surface.clone(),
            metric: self.metric.clone(),
            source: MagneticSource::Exact(alpha),
            id: self.id.clone(),
        }
    }

    /// Same 1-form, different conformal exponent.
    pub fn with_f(&self, f: ScalarField) -> Self {
        Self {
            surface: self.surface.clone(),
            metric: ConformalMetric::new(f),
            source: self.source.clone(),
            id: self.id.clone(),
        }
    }

    pub fn locate(&self, z: Complex) -> Result<Location> {
        if self.is_cover_only() {
            if !(z.norm_sqr() < 1.0) {
                return Err(MaglabError::Domain(format!("point {z} is not inside the unit disk")));
            }
            return Ok(Location {
                z,
                w: z,
                h: MobiusTransform::identity(),
                trivial: true,
            });
        }
        self.surface.locate(z)
    }

    pub fn point_at(&self, loc: &Location) -> PointData {
        let lambda = self.metric.lambda(loc);
        let (alpha, b) = match &self.source {
            MagneticSource::Exact(a) => {
                let comps = a.jets(loc);
                let da = a.exterior_derivative(loc);
                (comps, da * lambda.scale(-2.0).exp())
            }
            MagneticSource::ConstantCover(b) => ([Jet::zero(); 2], Jet::constant(*b)),
        };
        PointData {
            loc: *loc,
            lambda,
            alpha,
            b,
        }
    }

    pub fn point(&self, z: Complex) -> Result<PointData> {
        Ok(self.point_at(&self.locate(z)?))
    }

    /// Field strength `b` with `dα = b dvol_g`.
    pub fn field_strength(&self, z: Complex) -> Result<f64> {
        Ok(self.point(z)?.b.value())
    }

    /// The Lorentz force `Y_z(v)`.
    pub fn lorentz_force(&self, z: Complex, v: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.point(z)?.lorentz(v))
    }
}

/// A unit tangent vector (in the coordinates of `z`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub z: Complex,
    pub v: [f64; 2],
}

impl PhasePoint {
    /// Normalizes `v` to unit length for the system's metric.
    pub fn new(sys: &MagneticSystem, z: Complex, v: [f64; 2]) -> Result<Self> {
        let pd = sys.point(z)?;
        let n = pd.norm(v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(MaglabError::Input("zero or non-finite tangent vector".into()));
        }
        Ok(Self {
            z,
            v: [v[0] / n, v[1] / n],
        })
    }

    /// Unit vector at Euclidean angle `theta`.
    pub fn from_angle(sys: &MagneticSystem, z: Complex, theta: f64) -> Result<Self> {
        Self::new(sys, z, [theta.cos(), theta.sin()])
    }

    pub fn angle(&self) -> f64 {
        self.v[1].atan2(self.v[0])
    }

    /// Image under an isometry.
    pub fn transform(&self, t: &MobiusTransform) -> PhasePoint {
        let d = t.derivative(self.z);
        let v = d * Complex::new(self.v[0], self.v[1]);
        PhasePoint {
            z: t.apply_unchecked(self.z),
            v: [v.re, v.im],
        }
    }

    pub fn reversed(&self) -> PhasePoint {
        PhasePoint {
            z: self.z,
            v: [-self.v[0], -self.v[1]],
        }
    }
}

/// Moves a phase point into the octagon. Returns the normalized point `q` and
/// the element `h` with `p = h·q`.
pub fn deck_normalize(surface: &Surface, p: &PhasePoint) -> Result<(PhasePoint, MobiusTransform)> {
    let (_, h) = surface.group().normalize_matrix(p.z, 1e-12)?;
    Ok((p.transform(&h.inverse()), h))
}

/// A state along a trajectory; the universal-cover position is `deck·z`.
#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub t: f64,
    pub point: PhasePoint,
    pub deck: MobiusTransform,
}

impl Sample {
    pub fn cover_point(&self) -> PhasePoint {
        self.point.transform(&self.deck)
    }
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    /// Final state in the chart of the octagon (or the cover, for cover-only systems).
    pub end: PhasePoint,
    /// Accumulated deck transformation: the cover position is `deck·end`.
    pub deck: MobiusTransform,
    /// Largest `| |v|_g − 1 |` observed before renormalization.
    pub max_speed_drift: f64,
    pub steps: usize,
    /// Dense output (every step, including the initial state), if requested.
    pub samples: Vec<Sample>,
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub steps: usize,
    pub record: bool,
    /// Keep the trajectory in the octagon by deck normalization.
    pub normalize: bool,
}

impl FlowOptions {
    /// Fixed number of steps.
    pub fn steps(steps: usize) -> Self {
        Self {
            steps: steps.max(1),
            record: false,
            normalize: true,
        }
    }

    /// Steps of size at most `h` over time `t`.
    pub fn max_step(t: f64, h: f64) -> Self {
        Self::steps((t.abs() / h).ceil() as usize)
    }

    pub fn recorded(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn in_cover(mut self) -> Self {
        self.normalize = false;
        self
    }
}

/// Slack before a trajectory is moved back into the octagon.
const FLOW_NORMALIZE_BUFFER: f64 = 0.05;

fn rk4_step(sys: &MagneticSystem, z: Complex, v: [f64; 2], h: f64) -> Result<(Complex, [f64; 2])> {
    let eval = |z: Complex, v: [f64; 2]| -> Result<[f64; 2]> {
        if !(z.norm_sqr() < 1.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(MaglabError::NumericalBlowup(format!("trajectory left the disk at {z}")));
        }
        Ok(sys.point(z)?.acceleration(v))
    };
    let add = |z: Complex, d: [f64; 2], s: f64| z + Complex::new(d[0] * s, d[1] * s);
    let lin = |v: [f64; 2], a: [f64; 2], s: f64| [v[0] + a[0] * s, v[1] + a[1] * s];

    let a1 = eval(z, v)?;
    let v2 = lin(v, a1, h / 2.0);
    let a2 = eval(add(z, v, h / 2.0), v2)?;
    let v3 = lin(v, a2, h / 2.0);
    let a3 = eval(add(z, v2, h / 2.0), v3)?;
    let v4 = lin(v, a3, h);
    let a4 = eval(add(z, v3, h), v4)?;
    let zn = z + Complex::new(
        h / 6.0 * (v[0] + 2.0 * v2[0] + 2.0 * v3[0] + v4[0]),
        h / 6.0 * (v[1] + 2.0 * v2[1] + 2.0 * v3[1] + v4[1]),
    );
    let vn = [
        v[0] + h / 6.0 * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0]),
        v[1] + h / 6.0 * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1]),
    ];
    Ok((zn, vn))
}

/// Integrates the magnetic geodesic flow for time `t` (negative times run
/// backwards) with classical RK4, renormalizing the speed after every step.
pub fn flow(sys: &MagneticSystem, p: &PhasePoint, t: f64, opts: FlowOptions) -> Result<FlowResult> {
    if !t.is_finite() {
        return Err(MaglabError::Input("flow time must be finite".into()));
    }
    let normalize = opts.normalize && !sys.is_cover_only();
    let n = opts.steps;
    let h = t / n as f64;
    let mut state = *p;
    let mut deck = MobiusTransform::identity();
    let mut max_drift: f64 = 0.0;
    let mut samples = Vec::with_capacity(if opts.record { n + 1 } else { 0 });
    if normalize {
        let (w, m) = sys.surface().group().normalize_matrix(state.z, FLOW_NORMALIZE_BUFFER)?;
        if m != MobiusTransform::identity() {
            state = state.transform(&m.inverse());
            deck = m;
        }
        let _ = w;
    }
    if opts.record {
        samples.push(Sample {
            t: 0.0,
            point: state,
            deck,
        });
    }
    for i in 0..n {
        let (z, v) = rk4_step(sys, state.z, state.v, h)?;
        if !(z.norm_sqr() < 1.0 - 1e-12) {
            return Err(MaglabError::NumericalBlowup(format!(
                "trajectory reached |z| = {} at t = {}",
                z.norm(),
                (i + 1) as f64 * h
            )));
        }
        let pd = sys.point(z)?;
        let speed = pd.norm(v);
        if !speed.is_finite() {
            return Err(MaglabError::NumericalBlowup("non-finite velocity".into()));
        }
        max_drift = max_drift.max((speed - 1.0).abs());
        state = PhasePoint {
            z,
            v: [v[0] / speed, v[1] / speed],
        };
        if normalize {
            let (_, m) = sys.surface().group().normalize_matrix(state.z, FLOW_NORMALIZE_BUFFER)?;
            if m != MobiusTransform::identity() {
                state = state.transform(&m.inverse());
                deck = deck.compose(&m);
            }
        }
        if opts.record {
            samples.push(Sample {
                t: (i + 1) as f64 * h,
                point: state,
                deck,
            });
        }
    }
    Ok(FlowResult {
        end: state,
        deck,
        max_speed_drift: max_drift,
        steps: n,
        samples,
    })
}

/// Unit vector `J v` (rotation by +90°), the unit normal to `v` in dimension 2.
fn rotate(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

fn unit(pd: &PointData, v: [f64; 2], what: &str) -> Result<[f64; 2]> {
    let n = pd.norm(v);
    if !(n > 0.0) {
        return Err(MaglabError::Input(format!("{what} vector is zero")));
    }
    if (n - 1.0).abs() > 1e-10 {
        warn!("{what} vector has norm {n}; normalizing");
    }
    Ok([v[0] / n, v[1] / n])
}

/// Magnetic sectional curvature
/// `R(w,v,v,w) + g((∇_w Y)(v), w) + ¼|Y w|² + ¾ g(w, Y v)²`.
pub fn magnetic_sectional(sys: &MagneticSystem, z: Complex, v: [f64; 2], w: [f64; 2]) -> Result<f64> {
    let pd = sys.point(z)?;
    let v = unit(&pd, v, "v")?;
    let w = unit(&pd, w, "w")?;
    Ok(sectional_at(&pd, v, w))
}

fn sectional_at(pd: &PointData, v: [f64; 2], w: [f64; 2]) -> f64 {
    let vw = pd.inner(v, w);
    let riem = pd.curvature() * (pd.inner(v, v) * pd.inner(w, w) - vw * vw);
    let yw = pd.lorentz(w);
    let yv = pd.lorentz(v);
    riem + pd.inner(pd.nabla_lorentz(w, v), w) + 0.25 * pd.inner(yw, yw) + 0.75 * pd.inner(w, yv).powi(2)
}

/// `sup` over the two unit `u ⟂ v` of
/// `2R(u,v,v,u) + g(Yv,u)² + 5|Yu|² − 2 g((∇_u Y)(v), u)`.
pub fn dp_k(sys: &MagneticSystem, z: Complex, v: [f64; 2]) -> Result<f64> {
    let pd = sys.point(z)?;
    let v = unit(&pd, v, "v")?;
    Ok(dp_k_at(&pd, v))
}

pub(crate) fn dp_k_at(pd: &PointData, v: [f64; 2]) -> f64 {
    let n = 2.0;
    let jv = rotate(v);
    let s = 1.0 / pd.norm(jv);
    [1.0, -1.0]
        .iter()
        .map(|sign| {
            let u = [jv[0] * s * sign, jv[1] * s * sign];
            let uv = pd.inner(u, v);
            let riem = pd.curvature() * (pd.inner(v, v) * pd.inner(u, u) - uv * uv);
            let yu = pd.lorentz(u);
            2.0 * riem + pd.inner(pd.lorentz(v), u).powi(2) + (n + 3.0) * pd.inner(yu, yu)
                - 2.0 * pd.inner(pd.nabla_lorentz(u, v), u)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `sec_v(w) + ½ g(w, Y v)²` at `w = J v`.
pub(crate) fn crit_b_at(pd: &PointData, v: [f64; 2]) -> f64 {
    let n = 2.0;
    let jv = rotate(v);
    let s = 1.0 / pd.norm(jv);
    let w = [jv[0] * s, jv[1] * s];
    sectional_at(pd, v, w) + (n / 2.0 - 1.0 + 2.0 / (n + 2.0)) * pd.inner(w, pd.lorentz(v)).powi(2)
}

/// Deterministic sample grid of points and directions.
#[derive(Clone, Debug)]
pub struct CriteriaGrid {
    pub points: Vec<Complex>,
    pub directions: usize,
}

impl CriteriaGrid {
    /// Polar grid over the octagon: `radial × angular` points plus the center,
    /// with `directions` unit directions at each.
    pub fn octagon(surface: &Surface, radial: usize, angular: usize, directions: usize) -> Self {
        let rmax = (crate::geometry::circumradius() / 2.0).tanh();
        let mut points = vec![Complex::new(0.0, 0.0)];
        for i in 1..=radial {
            let r = rmax * i as f64 / radial as f64;
            for j in 0..angular {
                let z = Complex::from_polar(r, std::f64::consts::TAU * j as f64 / angular as f64);
                if surface.group().in_domain(z, 1e-9) {
                    points.push(z);
                }
            }
        }
        Self { points, directions }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CritBReport {
    /// Largest margin over the grid.
    pub worst: f64,
    pub worst_point: [f64; 2],
    pub worst_angle: f64,
    pub pass: bool,
    pub reading: &'static str,
}

/// `max` over the grid of `sec_v(w) + ½ g(w, Yv)²`, `w ⟂ v`; passes iff negative.
pub fn crit_b_margin(sys: &MagneticSystem, grid: &CriteriaGrid) -> Result<CritBReport> {
    if grid.points.is_empty() || grid.directions == 0 {
        return Err(MaglabError::Input("empty criteria grid".into()));
    }
    let mut worst = (f64::NEG_INFINITY, Complex::new(0.0, 0.0), 0.0);
    for &z in &grid.points {
        let pd = sys.point(z)?;
        let e = (-pd.lambda.value()).exp();
        for k in 0..grid.directions {
            let theta = std::f64::consts::TAU * k as f64 / grid.directions as f64;
            let v = [e * theta.cos(), e * theta.sin()];
            let m = crit_b_at(&pd, v);
            if m > worst.0 {
                worst = (m, z, theta);
            }
        }
    }
    Ok(CritBReport {
        worst: worst.0,
        worst_point: [worst.1.re, worst.1.im],
        worst_angle: worst.2,
        pass: worst.0 < 0.0,
        reading: CRIT_B_READING,
    })
}

/// `T ∫₀^T max(0, k) dt` by the composite trapezoid rule on uniformly spaced
/// values of `k`, and whether it is at most 4.
pub fn crit_dp_from_values(period: f64, k: &[f64]) -> Result<(f64, bool)> {
    if k.len() < 2 {
        return Err(MaglabError::Input("need at least two samples of k".into()));
    }
    let h = period / (k.len() - 1) as f64;
    let pos: Vec<f64> = k.iter().map(|x| x.max(0.0)).collect();
    let integral = h * (pos.iter().sum::<f64>() - 0.5 * (pos[0] + pos[pos.len() - 1]));
    let value = period * integral;
    Ok((value, value <= 4.0))
}
