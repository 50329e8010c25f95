//! Closed magnetic geodesics: discrete action minimization seeded on the
//! geodesic axis, Newton shooting against the deck transformation, and the
//! marked action spectrum.
//!
//! A [`DiscreteLoop`] lives in universal-cover coordinates with its closure
//! point given by the deck transformation of its class. Minimization uses the
//! exact gradient and Hessian of the discretized action together with the
//! period, which is optimal at `T = sqrt(M Σ |Δ|²_g)`. Refinement then solves
//! for a true periodic orbit by multiple shooting: the loop is cut into
//! segments of moderate length, each started from the octagon, and the
//! segments are matched through short group elements. This keeps every
//! computation near the origin even for long words.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SMatrix, Vector2, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{dp_k_at, flow, FlowOptions, MagneticSystem, PhasePoint};
use crate::error::{MaglabError, Result};
use crate::geometry::{geodesic_point, systole, Complex, MobiusTransform, Surface, Word};

/// Numerical settings of the orbit pipeline.
#[derive(Clone, Debug, Serialize)]
pub struct SolverOptions {
    /// Points of the discrete loop.
    pub m: usize,
    /// Stopping threshold on the intrinsic sup-norm of the action gradient.
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Non-decreasing iterations tolerated before giving up.
    pub stagnation_window: usize,
    /// Minimum number of RK4 steps over one period.
    pub shoot_steps: usize,
    /// Largest RK4 step.
    pub max_step: f64,
    /// Target sup-norm of the shooting residual.
    pub newton_tol: f64,
    pub newton_max_iterations: usize,
    /// Target length of one shooting segment.
    pub segment_length: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            m: 1024,
            grad_tol: 1e-8,
            max_iterations: 5000,
            stagnation_window: 50,
            shoot_steps: 10_000,
            max_step: 1e-3,
            newton_tol: 1e-10,
            newton_max_iterations: 30,
            segment_length: 1.5,
        }
    }
}

/// A closed polygon `z₀ … z_{M−1}` in the universal cover, closed up by
/// `z_M = closure·z₀`, with a period `T`.
#[derive(Clone, Debug)]
pub struct DiscreteLoop {
    pub word: Word,
    pub closure: MobiusTransform,
    pub points: Vec<Complex>,
    pub period: f64,
}

impl DiscreteLoop {
    pub fn m(&self) -> usize {
        self.points.len()
    }

    /// Point with cyclic index, continued through the closure.
    pub fn point(&self, j: isize) -> Complex {
        let m = self.m() as isize;
        if j >= m {
            self.closure.apply_unchecked(self.point(j - m))
        } else if j < 0 {
            self.closure.inverse().apply_unchecked(self.point(j + m))
        } else {
            self.points[j as usize]
        }
    }
}

/// `M` points equally spaced along the axis of the word's deck transformation,
/// conjugated so that the axis passes through the octagon.
pub fn initial_loop(surface: &Surface, word: &Word, m: usize) -> Result<DiscreteLoop> {
    if m < 16 {
        return Err(MaglabError::Input(format!("discrete loops need M >= 16, got {m}")));
    }
    let word = word.cyclic_reduce();
    if word.is_empty() {
        return Err(MaglabError::Input("contractible classes carry no minimizer".into()));
    }
    let rho = surface.group().word_to_matrix(&word);
    let length = rho.translation_length()?;
    let (p, _) = rho.axis()?;
    let (_, k) = surface.group().normalize_matrix(p, 1e-12)?;
    let closure = k.inverse().compose(&rho).compose(&k);
    let (p, u) = closure.axis()?;
    let points = (0..m)
        .map(|i| geodesic_point(p, u, -0.5 * length + length * i as f64 / m as f64))
        .collect();
    Ok(DiscreteLoop {
        word,
        closure,
        points,
        period: length,
    })
}

/// Value, gradient and (optionally) Hessian blocks of one segment's terms.
struct SegmentTerms {
    q: f64,
    p: f64,
    /// `∂Q/∂a, ∂Q/∂c` and `∂P/∂a, ∂P/∂c`.
    dq: [Vector2<f64>; 2],
    dp: [Vector2<f64>; 2],
    /// Second derivatives `[aa, ac, cc]`.
    hq: [Matrix2<f64>; 3],
    hp: [Matrix2<f64>; 3],
}

fn segment_terms(sys: &MagneticSystem, a: Complex, c: Complex, hessian: bool) -> Result<SegmentTerms> {
    let mid = (a + c) * 0.5;
    let pd = sys.point(mid)?;
    let d = Vector2::new(c.re - a.re, c.im - a.im);
    let dd = d.norm_squared();
    // E = e^{2λ} with its first and second derivatives
    let lam = &pd.lambda;
    let e = pd.metric_factor();
    let gl = Vector2::new(lam.partial(1, 0), lam.partial(0, 1));
    let ge = gl * (2.0 * e);
    let q = e * dd;
    let dq = [ge * (0.5 * dd) - d * (2.0 * e), ge * (0.5 * dd) + d * (2.0 * e)];
    let al = Vector2::new(pd.alpha[0].value(), pd.alpha[1].value());
    // grad_alpha[(i, k)] = ∂_i α_k
    let grad_alpha = Matrix2::new(
        pd.alpha[0].partial(1, 0),
        pd.alpha[1].partial(1, 0),
        pd.alpha[0].partial(0, 1),
        pd.alpha[1].partial(0, 1),
    );
    let p = al.dot(&d);
    let ga_d = grad_alpha * d;
    let dp = [ga_d * 0.5 - al, ga_d * 0.5 + al];
    let mut hq = [Matrix2::zeros(); 3];
    let mut hp = [Matrix2::zeros(); 3];
    if hessian {
        let hl = Matrix2::new(lam.partial(2, 0), lam.partial(1, 1), lam.partial(1, 1), lam.partial(0, 2));
        let he = (gl * gl.transpose() * 4.0 + hl * 2.0) * e;
        let base = he * (0.25 * dd);
        let ge_d = ge * d.transpose();
        let id = Matrix2::identity() * (2.0 * e);
        hq[0] = base - ge_d - ge_d.transpose() + id;
        hq[1] = base + ge_d - ge_d.transpose() - id;
        hq[2] = base + ge_d + ge_d.transpose() + id;
        // Σ_k ∂_ij α_k Δ_k
        let second = |i: usize, j: usize| -> f64 {
            let (px, py) = match (i, j) {
                (0, 0) => (2, 0),
                (1, 1) => (0, 2),
                _ => (1, 1),
            };
            pd.alpha[0].partial(px, py) * d[0] + pd.alpha[1].partial(px, py) * d[1]
        };
        let s2 = Matrix2::new(second(0, 0), second(0, 1), second(1, 0), second(1, 1)) * 0.25;
        hp[0] = s2 - (grad_alpha + grad_alpha.transpose()) * 0.5;
        hp[1] = s2 + (grad_alpha - grad_alpha.transpose()) * 0.5;
        hp[2] = s2 + (grad_alpha + grad_alpha.transpose()) * 0.5;
    }
    Ok(SegmentTerms { q, p, dq, dp, hq, hp })
}

/// The `dφ` summand of α enters the discrete action as `Σ φ(zᵢ₊₁) − φ(zᵢ)`,
/// which vanishes identically on a closed loop, so it is dropped up front.
fn discrete_system(sys: &MagneticSystem) -> Cow<'_, MagneticSystem> {
    match sys.alpha() {
        Some(a) if a.has_exact_part() => Cow::Owned(sys.with_alpha(a.without_exact_part())),
        _ => Cow::Borrowed(sys),
    }
}

/// The discrete action
/// `Σ |Δᵢ|²_{g(midᵢ)} M/(2T) + T/2 − Σ α(midᵢ)(Δᵢ)` at the loop's own period,
/// with the exact part of α differenced at the endpoints instead.
pub fn discrete_action(sys: &MagneticSystem, lp: &DiscreteLoop) -> Result<f64> {
    let sys = &*discrete_system(sys);
    let (sq, sp) = sums(sys, lp)?;
    let m = lp.m() as f64;
    Ok(m * sq / (2.0 * lp.period) + lp.period / 2.0 - sp)
}

fn sums(sys: &MagneticSystem, lp: &DiscreteLoop) -> Result<(f64, f64)> {
    let m = lp.m() as isize;
    let mut sq = 0.0;
    let mut sp = 0.0;
    for i in 0..m {
        let t = segment_terms(sys, lp.point(i), lp.point(i + 1), false)?;
        sq += t.q;
        sp += t.p;
    }
    Ok((sq, sp))
}

/// Derivatives of the action with respect to all points and the period.
struct ActionDerivatives {
    value: f64,
    sum_q: f64,
    grad: Vec<Vector2<f64>>,
    grad_sum_q: Vec<Vector2<f64>>,
    grad_t: f64,
    /// `diag[i] = H_ii`, `off[i] = H_{i,i+1}` (cyclic, `off[M−1]` couples the last point to the first).
    diag: Vec<Matrix2<f64>>,
    off: Vec<Matrix2<f64>>,
}

/// Real 2×2 Jacobian of a holomorphic map with derivative `d`.
fn holo_jacobian(d: Complex) -> Matrix2<f64> {
    Matrix2::new(d.re, -d.im, d.im, d.re)
}

fn action_derivatives(sys: &MagneticSystem, lp: &DiscreteLoop, hessian: bool) -> Result<ActionDerivatives> {
    let m = lp.m();
    let mf = m as f64;
    let t = lp.period;
    let k = mf / (2.0 * t);
    let mut sum_q = 0.0;
    let mut sum_p = 0.0;
    let mut grad_q = vec![Vector2::zeros(); m];
    let mut grad_p = vec![Vector2::zeros(); m];
    let mut diag = vec![Matrix2::zeros(); m];
    let mut off = vec![Matrix2::zeros(); m];
    let z0 = lp.points[0];
    let jr = holo_jacobian(lp.closure.derivative(z0));
    for i in 0..m {
        let a = lp.points[i];
        let c = lp.point(i as isize + 1);
        let st = segment_terms(sys, a, c, hessian)?;
        sum_q += st.q;
        sum_p += st.p;
        let h = [
            st.hq[0] * k - st.hp[0],
            st.hq[1] * k - st.hp[1],
            st.hq[2] * k - st.hp[2],
        ];
        grad_q[i] += st.dq[0];
        grad_p[i] += st.dp[0];
        if i + 1 < m {
            grad_q[i + 1] += st.dq[1];
            grad_p[i + 1] += st.dp[1];
            if hessian {
                diag[i] += h[0];
                off[i] += h[1];
                diag[i + 1] += h[2];
            }
        } else {
            // closing segment: c = ρ(z₀)
            let gc_q = jr.transpose() * st.dq[1];
            let gc_p = jr.transpose() * st.dp[1];
            grad_q[0] += gc_q;
            grad_p[0] += gc_p;
            if hessian {
                diag[i] += h[0];
                off[i] += h[1] * jr;
                let g = st.dq[1] * k - st.dp[1];
                // second derivatives of Re ρ, Im ρ: ∂xx = ρ'', ∂xy = iρ'', ∂yy = −ρ''
                let closure = lp.closure;
                let d2 = {
                    let den = closure.b.conj() * z0 + closure.a.conj();
                    Complex::new(-2.0, 0.0) * closure.b.conj() / (den * den * den)
                };
                let curv = Matrix2::new(
                    g[0] * d2.re + g[1] * d2.im,
                    g[0] * (-d2.im) + g[1] * d2.re,
                    g[0] * (-d2.im) + g[1] * d2.re,
                    -(g[0] * d2.re + g[1] * d2.im),
                );
                diag[0] += jr.transpose() * h[2] * jr + curv;
            }
        }
    }
    let grad: Vec<Vector2<f64>> = grad_q.iter().zip(&grad_p).map(|(q, p)| q * k - p).collect();
    Ok(ActionDerivatives {
        value: k * sum_q + t / 2.0 - sum_p,
        sum_q,
        grad,
        grad_sum_q: grad_q,
        grad_t: -mf * sum_q / (2.0 * t * t) + 0.5,
        diag,
        off,
    })
}

/// Gradient of the discrete action with respect to the points (at fixed period).
pub fn action_gradient(sys: &MagneticSystem, lp: &DiscreteLoop) -> Result<Vec<[f64; 2]>> {
    let sys = &*discrete_system(sys);
    Ok(action_derivatives(sys, lp, false)?.grad.iter().map(|g| [g[0], g[1]]).collect())
}

/// Solves the symmetric system with cyclic block-tridiagonal point part and a
/// scalar border (the period). `diag`, `off` as in [`ActionDerivatives`];
/// `col` is the coupling of each point with the period and `corner` the
/// period-period entry.
fn solve_cyclic_bordered(
    diag: &[Matrix2<f64>],
    off: &[Matrix2<f64>],
    col: &[Vector2<f64>],
    corner: f64,
    rhs: &[Vector2<f64>],
    rhs_t: f64,
) -> Option<(Vec<Vector2<f64>>, f64)> {
    let m = diag.len();
    // Border variables: point 0 (2) and the period (1). Interior: points 1..m−1.
    // Interior coupling with the border, as 2×3 blocks.
    let n = m - 1;
    let mut bcoup = vec![SMatrix::<f64, 2, 3>::zeros(); n];
    for (idx, b) in bcoup.iter_mut().enumerate() {
        let i = idx + 1;
        b.fixed_view_mut::<2, 1>(0, 2).copy_from(&col[i]);
    }
    // H_{1,0} = off[0]ᵀ, H_{m−1,0} = off[m−1]
    {
        let mut v = bcoup[0].fixed_view_mut::<2, 2>(0, 0);
        v += off[0].transpose();
    }
    {
        let mut v = bcoup[n - 1].fixed_view_mut::<2, 2>(0, 0);
        v += off[m - 1];
    }
    // Block Thomas on the interior with augmented right-hand sides [rhs | bcoup].
    type Aug = SMatrix<f64, 2, 4>;
    let mut dprime: Vec<Matrix2<f64>> = Vec::with_capacity(n);
    let mut rprime: Vec<Aug> = Vec::with_capacity(n);
    for idx in 0..n {
        let i = idx + 1;
        let mut a = diag[i];
        let mut r = Aug::zeros();
        r.fixed_view_mut::<2, 1>(0, 0).copy_from(&rhs[i]);
        r.fixed_view_mut::<2, 3>(0, 1).copy_from(&bcoup[idx]);
        if idx > 0 {
            // lower block L_i = H_{i,i−1} = off[i−1]ᵀ, upper U_{i−1} = off[i−1]
            let l = off[i - 1].transpose();
            let inv_prev = dprime[idx - 1].try_inverse()?;
            let f = l * inv_prev;
            a -= f * off[i - 1];
            r -= f * rprime[idx - 1];
        }
        dprime.push(a);
        rprime.push(r);
    }
    let mut x = vec![Aug::zeros(); n];
    for idx in (0..n).rev() {
        let i = idx + 1;
        let mut r = rprime[idx];
        if idx + 1 < n {
            r -= off[i] * x[idx + 1];
        }
        x[idx] = dprime[idx].try_inverse()? * r;
    }
    // Schur complement on the border.
    let mut s = Matrix3::zeros();
    s.fixed_view_mut::<2, 2>(0, 0).copy_from(&diag[0]);
    s.fixed_view_mut::<2, 1>(0, 2).copy_from(&col[0]);
    s.fixed_view_mut::<1, 2>(2, 0).copy_from(&col[0].transpose());
    s[(2, 2)] = corner;
    let mut rb = Vector3::new(rhs[0][0], rhs[0][1], rhs_t);
    for idx in 0..n {
        let ct = bcoup[idx].transpose();
        s -= ct * x[idx].fixed_view::<2, 3>(0, 1);
        rb -= ct * x[idx].fixed_view::<2, 1>(0, 0);
    }
    let y = s.lu().solve(&rb)?;
    let mut out = Vec::with_capacity(m);
    out.push(Vector2::new(y[0], y[1]));
    for xi in x.iter() {
        out.push(xi.fixed_view::<2, 1>(0, 0) - xi.fixed_view::<2, 3>(0, 1) * y);
    }
    Some((out, y[2]))
}

/// Intrinsic sup-norm of the point gradient and the period derivative.
/// The first point's tangential component is excluded: sliding the loop along
/// itself is almost a symmetry of the discretization, and that mode is pinned.
fn gradient_norm(lp: &DiscreteLoop, d: &ActionDerivatives) -> f64 {
    let t = pinned_tangent(lp);
    let pts = lp
        .points
        .iter()
        .zip(&d.grad)
        .enumerate()
        .map(|(i, (z, g))| {
            let g = if i == 0 { g - t * g.dot(&t) } else { *g };
            g.norm() * (1.0 - z.norm_sqr()) / 2.0
        })
        .fold(0.0, f64::max);
    pts.max(d.grad_t.abs())
}

/// Roundoff floor of the gradient: closing the loop applies a deck
/// transformation with entries of size `cosh(T/2)` to a point near the disk
/// boundary, which costs about `ε cosh²(T/2)` in position.
pub fn gradient_floor(lp: &DiscreteLoop) -> f64 {
    1e-14 * (0.5 * lp.period).cosh().powi(2) * lp.m() as f64 / lp.period
}

/// Euclidean unit tangent of the loop at its first point.
fn pinned_tangent(lp: &DiscreteLoop) -> Vector2<f64> {
    let t = lp.point(1) - lp.point(-1);
    Vector2::new(t.re, t.im) / t.norm()
}

/// Summary of a descent run.
#[derive(Clone, Debug, Serialize)]
pub struct DescentReport {
    pub iterations: usize,
    pub action: f64,
    pub gradient_norm: f64,
}

/// Minimizes the discrete action jointly in the points and the period with a
/// damped Newton iteration (exact Hessian, Levenberg–Marquardt safeguard).
pub fn minimize_action(sys: &MagneticSystem, lp: &DiscreteLoop, opts: &SolverOptions) -> Result<(DiscreteLoop, DescentReport)> {
    let sys = &*discrete_system(sys);
    let mut cur = lp.clone();
    let (sq, _) = sums(sys, &cur)?;
    cur.period = (cur.m() as f64 * sq).sqrt();
    let mut d = action_derivatives(sys, &cur, true)?;
    let tol = opts.grad_tol.max(gradient_floor(&cur));
    let mut mu = 1e-6;
    let mut since_decrease = 0;
    for iter in 0..opts.max_iterations {
        let gn = gradient_norm(&cur, &d);
        if gn < tol {
            return Ok((
                cur,
                DescentReport {
                    iterations: iter,
                    action: d.value,
                    gradient_norm: gn,
                },
            ));
        }
        log::debug!("descent {} iter {iter}: action {:.15e} grad {gn:.3e} damping {mu:.1e}", cur.word, d.value);
        let m = cur.m() as f64;
        let t = cur.period;
        let col: Vec<Vector2<f64>> = d.grad_sum_q.iter().map(|g| g * (-m / (2.0 * t * t))).collect();
        let corner = m * d.sum_q / (t * t * t);
        // Marquardt damping: each block is scaled by its own size, which varies
        // by orders of magnitude along long loops
        let block_scale: Vec<f64> = d.diag.iter().map(|b| 0.5 * b.trace().abs()).collect();
        let mut damped: Vec<Matrix2<f64>> = d
            .diag
            .iter()
            .zip(&block_scale)
            .map(|(b, s)| b + Matrix2::identity() * (mu * s))
            .collect();
        let mut rhs: Vec<Vector2<f64>> = d.grad.iter().map(|g| -g).collect();
        let pin = pinned_tangent(&cur);
        damped[0] += pin * pin.transpose() * (1e4 * block_scale[0]);
        let along = rhs[0].dot(&pin);
        rhs[0] -= pin * along;
        let step = solve_cyclic_bordered(&damped, &d.off, &col, corner * (1.0 + mu), &rhs, -d.grad_t);
        let mut accepted = false;
        if let Some((dz, dt)) = step {
            let mut trial = cur.clone();
            let mut ok = true;
            for (z, s) in trial.points.iter_mut().zip(&dz) {
                *z += Complex::new(s[0], s[1]);
                if !(z.norm_sqr() < 1.0) {
                    ok = false;
                }
            }
            trial.period += dt;
            if ok && trial.period > 0.0 {
                if let Ok(nd) = action_derivatives(sys, &trial, true) {
                    if nd.value <= d.value || gradient_norm(&trial, &nd) < gn * 0.5 && nd.value <= d.value + 1e-13 * d.value.abs() {
                        if nd.value < d.value {
                            since_decrease = 0;
                        } else {
                            since_decrease += 1;
                        }
                        cur = trial;
                        d = nd;
                        mu /= 4.0;
                        accepted = true;
                    }
                }
            }
        }
        if !accepted {
            mu *= 8.0;
            since_decrease += 1;
        }
        if since_decrease >= opts.stagnation_window {
            return Err(MaglabError::Stagnation {
                iterations: iter + 1,
                diagnostics: format!(
                    "word {}: action {:.6e}, gradient norm {:.3e}, damping {:.1e}",
                    cur.word, d.value, gn, mu
                ),
            });
        }
    }
    Err(MaglabError::Stagnation {
        iterations: opts.max_iterations,
        diagnostics: format!(
            "word {}: iteration cap reached with gradient norm {:.3e}",
            cur.word,
            gradient_norm(&cur, &d)
        ),
    })
}

/// A state along a refined orbit, in the octagon chart.
#[derive(Clone, Copy, Debug)]
pub struct OrbitSample {
    pub t: f64,
    pub point: PhasePoint,
    pub segment: usize,
    /// Deck transformation accumulated within the segment.
    pub local_deck: MobiusTransform,
}

/// A refined periodic magnetic geodesic.
#[derive(Clone, Debug)]
pub struct ClosedOrbit {
    pub word: Word,
    pub system_id: String,
    pub system_fingerprint: u64,
    /// Starting state (in the octagon chart of the first segment).
    pub initial: PhasePoint,
    pub period: f64,
    /// Deck transformation closing the orbit in the chart of `initial`.
    pub closure: MobiusTransform,
    /// Chart of each segment relative to the first.
    pub segment_charts: Vec<MobiusTransform>,
    pub samples: Vec<OrbitSample>,
    pub action: f64,
    pub length: f64,
    pub alpha_integral: f64,
    pub el_residual: f64,
    pub closure_error: f64,
    pub max_speed_error: f64,
    pub max_speed_drift: f64,
    pub crit_dp: f64,
    pub crit_dp_pass: bool,
    pub refined: bool,
    pub newton_iterations: usize,
    pub shooting_residual: f64,
}

impl ClosedOrbit {
    /// Uniform step between samples.
    pub fn step(&self) -> f64 {
        self.period / (self.samples.len() - 1) as f64
    }

    /// Sample `i` in the chart of the initial point.
    pub fn cover_sample(&self, i: usize) -> PhasePoint {
        let s = &self.samples[i];
        s.point.transform(&self.segment_charts[s.segment].compose(&s.local_deck))
    }

    /// Composite Simpson rule over the samples.
    pub fn integrate<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&OrbitSample) -> Result<f64>,
    {
        let n = self.samples.len() - 1;
        let h = self.step();
        let mut acc = 0.0;
        for (i, s) in self.samples.iter().enumerate() {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * f(s)?;
        }
        Ok(acc * h / 3.0)
    }
}

/// Shooting nodes: one chart per segment.
struct Shooting<'a> {
    sys: &'a MagneticSystem,
    k: usize,
    steps_per_segment: usize,
    /// Transition from the chart of node `j+1` (node 0 for the last) into the chart of node `j`.
    transitions: Vec<MobiusTransform>,
    base: Complex,
    normal: Complex,
}

/// Unknowns: `s, θ₀` for node 0, `(x, y, θ)` for nodes 1..k, then `T`.
struct Nodes {
    x: DVector<f64>,
}

impl Shooting<'_> {
    fn node(&self, x: &DVector<f64>, j: usize) -> (Complex, f64) {
        if j == 0 {
            (self.base + self.normal * x[0], x[1])
        } else {
            let o = 2 + 3 * (j - 1);
            (Complex::new(x[o], x[o + 1]), x[o + 2])
        }
    }

    fn period(&self, x: &DVector<f64>) -> f64 {
        x[x.len() - 1]
    }

    /// End of segment `j`, expressed in the chart of the next node.
    fn segment_end(&self, x: &DVector<f64>, j: usize, steps: usize) -> Result<(Complex, f64)> {
        let (z, theta) = self.node(x, j);
        let p = PhasePoint::from_angle(self.sys, z, theta)?;
        let dt = self.period(x) / self.k as f64;
        let r = flow(self.sys, &p, dt, FlowOptions::steps(steps))?;
        let m = self.transitions[j].inverse().compose(&r.deck);
        let e = r.end.transform(&m);
        Ok((e.z, e.angle()))
    }

    fn block(&self, x: &DVector<f64>, j: usize, end: (Complex, f64)) -> [f64; 3] {
        let (z, theta) = self.node(x, (j + 1) % self.k);
        [end.0.re - z.re, end.0.im - z.im, wrap_angle(end.1 - theta)]
    }

    fn residual(&self, x: &DVector<f64>, steps: usize) -> Result<(DVector<f64>, Vec<(Complex, f64)>)> {
        let ends: Vec<(Complex, f64)> = (0..self.k)
            .map(|j| self.segment_end(x, j, steps))
            .collect::<Result<_>>()?;
        let mut r = DVector::zeros(3 * self.k);
        for (j, e) in ends.iter().enumerate() {
            let b = self.block(x, j, *e);
            r[3 * j] = b[0];
            r[3 * j + 1] = b[1];
            r[3 * j + 2] = b[2];
        }
        Ok((r, ends))
    }

    /// Forward-difference Jacobian; only the segments touched by each unknown are re-integrated.
    fn jacobian(&self, x: &DVector<f64>, steps: usize) -> Result<DMatrix<f64>> {
        let n = x.len();
        let (r0, ends) = self.residual(x, steps)?;
        let mut jac = DMatrix::zeros(n, n);
        let delta = 1e-7;
        for col in 0..n {
            let mut xp = x.clone();
            xp[col] += delta;
            let mut rp = r0.clone();
            if col == n - 1 {
                rp = self.residual(&xp, steps)?.0;
            } else {
                let j = if col < 2 { 0 } else { 1 + (col - 2) / 3 };
                let e = self.segment_end(&xp, j, steps)?;
                let b = self.block(&xp, j, e);
                rp[3 * j] = b[0];
                rp[3 * j + 1] = b[1];
                rp[3 * j + 2] = b[2];
                let prev = (j + self.k - 1) % self.k;
                if prev != j {
                    let b = self.block(&xp, prev, ends[prev]);
                    rp[3 * prev] = b[0];
                    rp[3 * prev + 1] = b[1];
                    rp[3 * prev + 2] = b[2];
                } else {
                    // single segment: the node also enters its own block through the target
                    let b = self.block(&xp, j, e);
                    rp[3 * j] = b[0];
                    rp[3 * j + 1] = b[1];
                    rp[3 * j + 2] = b[2];
                }
            }
            jac.set_column(col, &((rp - &r0) / delta));
        }
        Ok(jac)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut r = a % tau;
    if r > std::f64::consts::PI {
        r -= tau;
    } else if r <= -std::f64::consts::PI {
        r += tau;
    }
    r
}

fn tangent_angle(a: Complex, b: Complex) -> f64 {
    (b - a).arg()
}

/// Refines a minimized loop into a periodic magnetic geodesic by Newton
/// multiple shooting, then records dense samples and diagnostics.
pub fn shoot_refine(sys: &MagneticSystem, lp: &DiscreteLoop, opts: &SolverOptions) -> Result<ClosedOrbit> {
    let surface = sys.surface();
    let m = lp.m();
    let period0 = lp.period;
    let k = ((period0 / opts.segment_length).ceil() as usize).clamp(1, m / 4);
    let total_steps = opts.shoot_steps.max((period0 / opts.max_step).ceil() as usize);
    let mut steps = total_steps.div_ceil(k);
    steps += steps % 2;

    // Node 0 sits at the loop point nearest the origin.
    let i0 = (0..m)
        .min_by(|&a, &b| lp.points[a].norm_sqr().total_cmp(&lp.points[b].norm_sqr()))
        .unwrap_or(0);
    let idx: Vec<isize> = (0..k).map(|j| (i0 + j * m / k) as isize).collect();
    let mut charts = Vec::with_capacity(k);
    let mut nodes = Vec::with_capacity(k);
    for &i in &idx {
        let z = lp.point(i);
        let th_pt = (lp.point(i - 1), lp.point(i + 1));
        let (w, h) = surface.group().normalize_matrix(z, 1e-12)?;
        let hinv = h.inverse();
        let a = hinv.apply_unchecked(th_pt.0);
        let b = hinv.apply_unchecked(th_pt.1);
        charts.push(h);
        nodes.push((w, tangent_angle(a, b)));
    }
    // Transitions between consecutive node charts, as short group elements.
    let mut transitions = Vec::with_capacity(k);
    for j in 0..k {
        let next_cover = if j + 1 < k {
            lp.point(idx[j + 1])
        } else {
            lp.closure.apply_unchecked(lp.point(idx[0]))
        };
        let y = charts[j].inverse().apply_unchecked(next_cover);
        let (g, d) = surface.nearest_translate(nodes[(j + 1) % k].0, y);
        // `y` carries roundoff of order eps·e^T from the closure matrix, but
        // distinct translates of a point are a systole apart, so the snap is safe
        if d > 0.25 * systole() {
            return Err(MaglabError::Refinement(format!(
                "word {}: could not match shooting charts ({d:.2e})",
                lp.word
            )));
        }
        transitions.push(g.matrix);
    }
    let base = nodes[0].0;
    let normal = Complex::from_polar(1.0, nodes[0].1) * Complex::new(0.0, 1.0);
    let shooting = Shooting {
        sys,
        k,
        steps_per_segment: steps,
        transitions: transitions.clone(),
        base,
        normal,
    };
    let n = 3 * k;
    let mut x = DVector::zeros(n);
    x[1] = nodes[0].1;
    for j in 1..k {
        let o = 2 + 3 * (j - 1);
        x[o] = nodes[j].0.re;
        x[o + 1] = nodes[j].0.im;
        x[o + 2] = nodes[j].1;
    }
    x[n - 1] = period0;
    let nodes = Nodes { x };
    let (x, iterations, residual) = newton(&shooting, nodes.x, opts, &lp.word)?;

    // Dense output, segment by segment.
    let mut samples = Vec::with_capacity(k * steps + 1);
    let period = shooting.period(&x);
    let dt = period / k as f64;
    let mut segment_charts = Vec::with_capacity(k);
    let mut chart = MobiusTransform::identity();
    let mut max_drift: f64 = 0.0;
    let mut closure_error: f64 = 0.0;
    let mut initial = None;
    for j in 0..k {
        segment_charts.push(chart);
        let (z, theta) = shooting.node(&x, j);
        let p = PhasePoint::from_angle(sys, z, theta)?;
        if j == 0 {
            initial = Some(p);
        }
        let r = flow(sys, &p, dt, FlowOptions::steps(steps).recorded())?;
        max_drift = max_drift.max(r.max_speed_drift);
        let skip = usize::from(j > 0);
        for s in r.samples.iter().skip(skip) {
            samples.push(OrbitSample {
                t: j as f64 * dt + s.t,
                point: s.point,
                segment: j,
                local_deck: s.deck,
            });
        }
        let e = shooting.segment_end(&x, j, steps)?;
        let b = shooting.block(&x, j, e);
        closure_error = closure_error.max(b[0].abs()).max(b[1].abs()).max(b[2].abs());
        chart = chart.compose(&transitions[j]);
    }
    let closure = chart;
    let initial = initial.expect("at least one segment");
    let mut orbit = ClosedOrbit {
        word: lp.word.clone(),
        system_id: sys.id.clone(),
        system_fingerprint: sys.fingerprint(),
        initial,
        period,
        closure,
        segment_charts,
        samples,
        action: 0.0,
        length: 0.0,
        alpha_integral: 0.0,
        el_residual: 0.0,
        closure_error,
        max_speed_error: 0.0,
        max_speed_drift: max_drift,
        crit_dp: 0.0,
        crit_dp_pass: true,
        refined: residual < opts.newton_tol,
        newton_iterations: iterations,
        shooting_residual: residual,
    };
    finish_diagnostics(sys, &mut orbit)?;
    Ok(orbit)
}

fn newton(sh: &Shooting, mut x: DVector<f64>, opts: &SolverOptions, word: &Word) -> Result<(DVector<f64>, usize, f64)> {
    let steps = sh.steps_per_segment;
    let coarse = (steps / 4).max(2);
    let (mut r, _) = sh.residual(&x, steps)?;
    let mut rn = r.amax();
    let mut jac: Option<DMatrix<f64>> = None;
    for iter in 0..opts.newton_max_iterations {
        if rn < opts.newton_tol {
            return Ok((x, iter, rn));
        }
        let j = match jac.take() {
            Some(j) => j,
            None => sh.jacobian(&x, coarse)?,
        };
        let dx = j.clone().lu().solve(&(-&r)).ok_or_else(|| {
            MaglabError::Refinement(format!("word {word}: singular shooting Jacobian"))
        })?;
        let xn = &x + &dx;
        let (rnew, _) = sh.residual(&xn, steps)?;
        let rnn = rnew.amax();
        if !rnn.is_finite() {
            return Err(MaglabError::Refinement(format!("word {word}: shooting diverged")));
        }
        // Broyden update keeps the Jacobian useful between recomputations.
        let dr = &rnew - &r;
        let denom = dx.dot(&dx);
        let mut jn = j;
        if denom > 0.0 {
            jn += (&dr - &jn * &dx) * dx.transpose() / denom;
        }
        if rnn < 0.5 * rn {
            jac = Some(jn);
        }
        x = xn;
        r = rnew;
        rn = rnn;
    }
    log::warn!(
        "word {word}: Newton shooting did not converge in {} steps (residual {rn:.3e})",
        opts.newton_max_iterations
    );
    Ok((x, opts.newton_max_iterations, rn))
}

/// Action, length, Euler–Lagrange residual and the dp criterion along the samples.
fn finish_diagnostics(sys: &MagneticSystem, orbit: &mut ClosedOrbit) -> Result<()> {
    let mut max_speed_error: f64 = 0.0;
    let mut kinetic = Vec::with_capacity(orbit.samples.len());
    let mut alpha = Vec::with_capacity(orbit.samples.len());
    let mut speed = Vec::with_capacity(orbit.samples.len());
    let mut kvals = Vec::new();
    let stride = (orbit.samples.len() / 1000).max(1);
    for (i, s) in orbit.samples.iter().enumerate() {
        let pd = sys.point(s.point.z)?;
        let sp = pd.norm(s.point.v);
        max_speed_error = max_speed_error.max((sp - 1.0).abs());
        speed.push(sp);
        kinetic.push(sp * sp);
        alpha.push(pd.alpha[0].value() * s.point.v[0] + pd.alpha[1].value() * s.point.v[1]);
        if i % stride == 0 {
            kvals.push(dp_k_at(&pd, s.point.v));
        }
    }
    let simpson = |vals: &[f64]| -> f64 {
        let n = vals.len() - 1;
        let h = orbit.period / n as f64;
        let mut acc = 0.0;
        for (i, v) in vals.iter().enumerate() {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * v;
        }
        acc * h / 3.0
    };
    let energy = 0.5 * simpson(&kinetic);
    orbit.alpha_integral = simpson(&alpha);
    orbit.length = simpson(&speed);
    orbit.action = energy + 0.5 * orbit.period - orbit.alpha_integral;
    orbit.max_speed_error = max_speed_error;
    orbit.el_residual = el_residual(sys, orbit, 1000)?;
    let (kperiod, last) = if (orbit.samples.len() - 1).is_multiple_of(stride) {
        (orbit.period, None)
    } else {
        (orbit.period * ((kvals.len() - 1) * stride) as f64 / (orbit.samples.len() - 1) as f64, Some(()))
    };
    let _ = last;
    let h = kperiod / (kvals.len() - 1) as f64;
    let pos: Vec<f64> = kvals.iter().map(|v| v.max(0.0)).collect();
    let integral = h * (pos.iter().sum::<f64>() - 0.5 * (pos[0] + pos[pos.len() - 1]))
        + (orbit.period - kperiod) * pos[pos.len() - 1];
    orbit.crit_dp = orbit.period * integral;
    orbit.crit_dp_pass = orbit.crit_dp <= 4.0;
    Ok(())
}

/// Largest `|∇_γ̇ γ̇ − Y γ̇|_g` over about `count` samples, with the covariant
/// acceleration from fourth-order central differences of the velocity.
pub fn el_residual(sys: &MagneticSystem, orbit: &ClosedOrbit, count: usize) -> Result<f64> {
    let n = orbit.samples.len();
    let h = orbit.step();
    let stride = (n / count.max(1)).max(1);
    let mut worst: f64 = 0.0;
    let mut i = 2;
    while i + 2 < n {
        let seg = orbit.samples[i].segment;
        if orbit.samples[i - 2].segment != seg || orbit.samples[i + 2].segment != seg {
            i += 1;
            continue;
        }
        let base = orbit.samples[i].local_deck.inverse();
        let vel = |j: usize| -> [f64; 2] {
            let s = &orbit.samples[j];
            let p = s.point.transform(&base.compose(&s.local_deck));
            p.v
        };
        let (vm2, vm1, vp1, vp2) = (vel(i - 2), vel(i - 1), vel(i + 1), vel(i + 2));
        let acc = [
            (-vp2[0] + 8.0 * vp1[0] - 8.0 * vm1[0] + vm2[0]) / (12.0 * h),
            (-vp2[1] + 8.0 * vp1[1] - 8.0 * vm1[1] + vm2[1]) / (12.0 * h),
        ];
        let s = &orbit.samples[i];
        let pd = sys.point(s.point.z)?;
        let rhs = pd.acceleration(s.point.v);
        worst = worst.max(pd.norm([acc[0] - rhs[0], acc[1] - rhs[1]]));
        i += stride;
    }
    Ok(worst)
}

/// Full pipeline for one class: seed, minimize, refine.
pub fn solve_class(sys: &MagneticSystem, word: &Word, opts: &SolverOptions) -> Result<ClosedOrbit> {
    if sys.is_cover_only() {
        return Err(MaglabError::Input("closed orbits need a system on the closed surface".into()));
    }
    let seed = initial_loop(sys.surface(), word, opts.m)?;
    let (lp, _) = minimize_action(sys, &seed, opts)?;
    shoot_refine(sys, &lp, opts)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumEntry {
    pub word: String,
    pub action: f64,
    pub length: f64,
    pub period: f64,
    pub el_residual: f64,
    pub crit_dp: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub system: String,
    pub entries: Vec<SpectrumEntry>,
}

impl Spectrum {
    pub fn entry(&self, word: &str) -> Option<&SpectrumEntry> {
        self.entries.iter().find(|e| e.word == word)
    }
}

/// Canonicalizes and deduplicates words, keeping the first occurrence.
pub fn canonical_classes(words: &[Word]) -> Result<Vec<Word>> {
    let mut out: Vec<Word> = Vec::new();
    for w in words {
        let c = w.cyclic_reduce();
        if c.is_empty() {
            return Err(MaglabError::Input(format!("word '{w}' is trivial")));
        }
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Solves every class (concurrently) and collects the spectrum in input order.
pub fn solve_classes(sys: &MagneticSystem, words: &[Word], opts: &SolverOptions) -> Vec<Result<ClosedOrbit>> {
    words.par_iter().map(|w| solve_class(sys, w, opts)).collect()
}

pub fn spectrum_from_orbits(sys: &MagneticSystem, words: &[Word], orbits: &[Result<ClosedOrbit>]) -> Spectrum {
    let entries = words
        .iter()
        .zip(orbits)
        .map(|(w, r)| match r {
            Ok(o) => SpectrumEntry {
                word: w.to_string(),
                action: o.action,
                length: o.length,
                period: o.period,
                el_residual: o.el_residual,
                crit_dp: o.crit_dp,
                error: (!o.refined).then(|| {
                    MaglabError::Refinement(format!(
                        "Newton shooting stopped at residual {:.3e}",
                        o.shooting_residual
                    ))
                    .to_string()
                }),
            },
            Err(e) => SpectrumEntry {
                word: w.to_string(),
                action: f64::NAN,
                length: f64::NAN,
                period: f64::NAN,
                el_residual: f64::NAN,
                crit_dp: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Spectrum {
        system: sys.id.clone(),
        entries,
    }
}

/// The marked action spectrum over the canonical classes of `words`.
pub fn marked_spectrum(sys: &MagneticSystem, words: &[Word], opts: &SolverOptions) -> Result<Spectrum> {
    let classes = canonical_classes(words)?;
    let orbits = solve_classes(sys, &classes, opts);
    Ok(spectrum_from_orbits(sys, &classes, &orbits))
}

impl ClosedOrbit {
    /// Resamples the orbit into a discrete loop of `m` points in the chart of
    /// the initial point, closed by [`ClosedOrbit::closure`].
    pub fn to_loop(&self, m: usize) -> Result<DiscreteLoop> {
        if m < 16 {
            return Err(MaglabError::Input(format!("discrete loops need M >= 16, got {m}")));
        }
        let n = self.samples.len() - 1;
        let points = (0..m)
            .map(|i| self.cover_sample(((i * n) as f64 / m as f64).round() as usize).z)
            .collect();
        Ok(DiscreteLoop {
            word: self.word.clone(),
            closure: self.closure,
            points,
            period: self.period,
        })
    }
}

/// Conjugacy test for hyperbolic elements with equal translation length.
struct ClassIndex {
    ball: Vec<MobiusTransform>,
}

impl ClassIndex {
    fn new(surface: &Surface, max_length: f64) -> Result<Self> {
        let radius = 2.0 * crate::geometry::circumradius() + 0.5 * max_length + 0.5;
        let ball = surface
            .group()
            .enumerate(radius, crate::geometry::DEFAULT_ENUMERATION_CAP)?
            .into_iter()
            .map(|g| g.matrix)
            .collect();
        Ok(Self { ball })
    }

    /// Conjugates `rho` so that its axis passes through the octagon.
    fn centered(surface: &Surface, rho: &MobiusTransform) -> Result<MobiusTransform> {
        let (p, _) = rho.axis()?;
        let (_, k) = surface.group().normalize_matrix(p, 1e-12)?;
        Ok(k.inverse().compose(rho).compose(&k))
    }

    fn conjugate(&self, r1: &MobiusTransform, r2: &MobiusTransform) -> bool {
        self.ball.iter().any(|g| {
            let c = g.compose(r1).compose(&g.inverse());
            c.relative_difference(r2) < 1e-8
        })
    }
}

/// Cyclically reduced canonical words of exactly `len` letters.
fn canonical_words(len: usize) -> Vec<Word> {
    use crate::geometry::Letter;
    let mut out = Vec::new();
    let mut stack: Vec<Vec<Letter>> = Letter::ALL.iter().map(|&l| vec![l]).collect();
    while let Some(w) = stack.pop() {
        if w.len() == len {
            let word = Word::from_letters(w.clone());
            if word.is_cyclically_reduced() && word.cyclic_reduce().letters() == word.letters() {
                out.push(word.cyclic_reduce());
            }
            continue;
        }
        let last = *w.last().expect("nonempty");
        for &l in Letter::ALL.iter() {
            if l != last.inverse() {
                let mut next = w.clone();
                next.push(l);
                stack.push(next);
            }
        }
    }
    out.sort_by(|a, b| a.letters().cmp(b.letters()));
    out
}

/// The `n` shortest free homotopy classes (oriented), found among words of
/// at most `max_word_length` letters and deduplicated up to conjugacy in the
/// surface group. Ties in length are broken by the canonical word.
pub fn shortest_classes(surface: &Surface, n: usize, max_word_length: usize) -> Result<Vec<Word>> {
    let group = surface.group();
    let mut candidates: Vec<(f64, Word, MobiusTransform)> = Vec::new();
    for len in 1..=max_word_length {
        for w in canonical_words(len) {
            let rho = group.word_to_matrix(&w);
            if rho.trace().abs() <= 2.0 + 1e-9 {
                continue;
            }
            candidates.push((rho.translation_length()?, w, rho));
        }
    }
    // lengths agreeing to 1e−9 count as ties, broken by the word
    candidates.sort_by(|a, b| {
        let ka = (a.0 * 1e9).round() as i64;
        let kb = (b.0 * 1e9).round() as i64;
        ka.cmp(&kb).then_with(|| a.1.letters().cmp(b.1.letters()))
    });
    let max_len = candidates.iter().take(8 * n.max(1)).map(|c| c.0).fold(0.0, f64::max);
    let index = ClassIndex::new(surface, max_len)?;
    let mut kept: Vec<(f64, Word, MobiusTransform)> = Vec::new();
    for (l, w, rho) in candidates {
        if kept.len() == n {
            break;
        }
        let c = ClassIndex::centered(surface, &rho)?;
        let dup = kept
            .iter()
            .any(|(lk, _, ck)| (lk - l).abs() < 1e-9 && index.conjugate(ck, &c));
        if !dup {
            kept.push((l, w, c));
        }
    }
    if kept.len() < n {
        return Err(MaglabError::Input(format!(
            "only {} classes among words of length <= {max_word_length}",
            kept.len()
        )));
    }
    Ok(kept.into_iter().map(|(_, w, _)| w).collect())
}

/// Deterministic pseudo-random cyclically reduced words of the given lengths.
pub fn random_words(seed: u64, lengths: &[usize]) -> Vec<Word> {
    use crate::geometry::Letter;
    use rand::{RngExt, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    lengths
        .iter()
        .map(|&len| loop {
            let mut letters: Vec<Letter> = Vec::with_capacity(len);
            while letters.len() < len {
                let l = Letter::ALL[rng.random_range(0..8)];
                if letters.last().is_none_or(|&p| p != l.inverse()) {
                    letters.push(l);
                }
            }
            let w = Word::from_letters(letters);
            if len > 0 && w.is_cyclically_reduced() {
                break w.cyclic_reduce();
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{OneFormField, ScalarField};

    fn surface() -> Surface {
        Surface::standard().unwrap()
    }

    fn free(s: &Surface) -> MagneticSystem {
        MagneticSystem::new(s.clone(), ScalarField::zero(), OneFormField::zero())
    }

    fn magnetic(s: &Surface) -> MagneticSystem {
        let f = ScalarField::averaged_bump(Complex::new(0.2, 0.1), 0.9, 0.05, s).unwrap();
        let u = ScalarField::averaged_bump(Complex::new(-0.3, 0.2), 1.0, 0.5, s).unwrap();
        let v = ScalarField::averaged_bump(Complex::new(0.1, -0.4), 0.8, 0.6, s).unwrap();
        MagneticSystem::new(s.clone(), f, OneFormField::product(u, v, 0.3))
    }

    #[test]
    fn class_enumeration() {
        let s = surface();
        let classes = shortest_classes(&s, 30, 4).unwrap();
        let lens: Vec<f64> = classes
            .iter()
            .map(|w| s.group().word_to_matrix(w).translation_length().unwrap())
            .collect();
        assert_eq!(lens.iter().filter(|l| (*l - lens[0]).abs() < 1e-9).count(), 24);
        assert!(lens.windows(2).all(|p| p[0] <= p[1] + 1e-12));
        assert!((lens[0] - crate::geometry::systole()).abs() < 1e-9);
        let r = random_words(7, &[3, 8, 12]);
        assert_eq!(r.iter().map(|w| w.len()).collect::<Vec<_>>(), vec![3, 8, 12]);
        assert_eq!(r, random_words(7, &[3, 8, 12]));
    }

    #[test]
    fn seed_loop_examples() {
        let s = surface();
        let w: Word = "a".parse().unwrap();
        let lp = initial_loop(&s, &w, 64).unwrap();
        let l = s.group().word_to_matrix(&w).translation_length().unwrap();
        let last = lp.points[63];
        let closing = lp.point(64);
        assert!((crate::geometry::distance_unchecked(last, closing) - l / 64.0).abs() < 1e-10);
        assert!(initial_loop(&s, &"aA".parse().unwrap(), 64).is_err());
        assert!(initial_loop(&s, &w, 8).is_err());
    }

    #[test]
    fn seed_action_converges_at_second_order() {
        let s = surface();
        let sys = free(&s);
        let w: Word = "ab".parse().unwrap();
        let l = s.group().word_to_matrix(&w).translation_length().unwrap();
        let e1 = (discrete_action(&sys, &initial_loop(&s, &w, 256).unwrap()).unwrap() - l).abs();
        let e2 = (discrete_action(&sys, &initial_loop(&s, &w, 512).unwrap()).unwrap() - l).abs();
        assert!(e2 < 1e-4);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let s = surface();
        let sys = magnetic(&s);
        let lp = initial_loop(&s, &"aB".parse().unwrap(), 32).unwrap();
        let d = action_derivatives(&sys, &lp, true).unwrap();
        let h = 1e-6;
        for i in [0usize, 5, 31] {
            for c in 0..2 {
                let mut p = lp.clone();
                let mut q = lp.clone();
                let e = if c == 0 { Complex::new(h, 0.0) } else { Complex::new(0.0, h) };
                p.points[i] += e;
                q.points[i] -= e;
                let fd = (discrete_action(&sys, &p).unwrap() - discrete_action(&sys, &q).unwrap()) / (2.0 * h);
                assert!((d.grad[i][c] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{} vs {}", d.grad[i][c], fd);
                // Hessian column through gradients
                let dp = action_derivatives(&sys, &p, false).unwrap();
                let dq = action_derivatives(&sys, &q, false).unwrap();
                let m = lp.m();
                for (r, blk) in [(i, d.diag[i]), ((i + 1) % m, d.off[i].transpose())] {
                    let col = (dp.grad[r] - dq.grad[r]) / (2.0 * h);
                    for rr in 0..2 {
                        assert!((blk[(rr, c)] - col[rr]).abs() < 1e-5 * (1.0 + col[rr].abs()), "block {r}: {} vs {}", blk[(rr, c)], col[rr]);
                    }
                }
            }
        }
        let mut lt = lp.clone();
        lt.period += h;
        let mut lq = lp.clone();
        lq.period -= h;
        let fd = (discrete_action(&sys, &lt).unwrap() - discrete_action(&sys, &lq).unwrap()) / (2.0 * h);
        assert!((d.grad_t - fd).abs() < 1e-7);
    }

    #[test]
    fn bordered_solver_matches_dense() {
        let s = surface();
        let sys = magnetic(&s);
        let lp = initial_loop(&s, &"ab".parse().unwrap(), 17).unwrap();
        let d = action_derivatives(&sys, &lp, true).unwrap();
        let m = lp.m();
        let t = lp.period;
        let col: Vec<Vector2<f64>> = d.grad_sum_q.iter().map(|g| g * (-(m as f64) / (2.0 * t * t))).collect();
        let corner = m as f64 * d.sum_q / (t * t * t);
        let n = 2 * m + 1;
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..m {
            dense.fixed_view_mut::<2, 2>(2 * i, 2 * i).copy_from(&d.diag[i]);
            let j = (i + 1) % m;
            let mut v = dense.fixed_view_mut::<2, 2>(2 * i, 2 * j);
            v += d.off[i];
            let mut v = dense.fixed_view_mut::<2, 2>(2 * j, 2 * i);
            v += d.off[i].transpose();
            dense.fixed_view_mut::<2, 1>(2 * i, n - 1).copy_from(&col[i]);
            dense.fixed_view_mut::<1, 2>(n - 1, 2 * i).copy_from(&col[i].transpose());
        }
        dense[(n - 1, n - 1)] = corner;
        let rhs: Vec<Vector2<f64>> = (0..m).map(|i| Vector2::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        let (x, xt) = solve_cyclic_bordered(&d.diag, &d.off, &col, corner, &rhs, 0.3).unwrap();
        let mut b = DVector::zeros(n);
        for i in 0..m {
            b[2 * i] = rhs[i][0];
            b[2 * i + 1] = rhs[i][1];
        }
        b[n - 1] = 0.3;
        let y = dense.lu().solve(&b).unwrap();
        for i in 0..m {
            assert!((x[i][0] - y[2 * i]).abs() < 1e-9 * (1.0 + y[2 * i].abs()));
            assert!((x[i][1] - y[2 * i + 1]).abs() < 1e-9 * (1.0 + y[2 * i + 1].abs()));
        }
        assert!((xt - y[n - 1]).abs() < 1e-9 * (1.0 + y[n - 1].abs()));
    }

    #[test]
    fn geodesic_orbit_matches_trace_formula() {
        let s = surface();
        let sys = free(&s);
        let w: Word = "ab".parse().unwrap();
        let l = s.group().word_to_matrix(&w).translation_length().unwrap();
        let opts = SolverOptions::default();
        let seed = initial_loop(&s, &w, opts.m).unwrap();
        let (lp, rep) = minimize_action(&sys, &seed, &opts).unwrap();
        assert!(rep.gradient_norm < 1e-8);
        assert!((rep.action - l).abs() < 1e-4, "{} vs {l}", rep.action);
        let o = shoot_refine(&sys, &lp, &opts).unwrap();
        assert!((o.period - l).abs() < 1e-9, "{} vs {l}", o.period);
        assert!((o.action - l).abs() < 1e-9);
        assert!(o.el_residual < 1e-6, "{}", o.el_residual);
        assert!(o.max_speed_error < 1e-8);
        assert!((o.crit_dp).abs() < 1e-12 && o.crit_dp_pass);
    }

    #[test]
    fn magnetic_orbit_identities() {
        let s = surface();
        let sys = magnetic(&s);
        let opts = SolverOptions::default();
        let o = solve_class(&sys, &"aB".parse().unwrap(), &opts).unwrap();
        assert!(o.refined);
        assert!(o.el_residual < 1e-6, "{}", o.el_residual);
        assert!((o.action - (o.length - o.alpha_integral)).abs() < 1e-8);
        // single long flow from the initial point closes through the deck element
        let r = flow(&sys, &o.initial, o.period, FlowOptions::steps(o.samples.len() - 1)).unwrap();
        let end = r.end.transform(&r.deck);
        let target = o.initial.transform(&o.closure);
        assert!((end.z - target.z).norm() < 1e-8, "{}", (end.z - target.z).norm());
        assert!((end.v[0] - target.v[0]).abs() < 1e-7 && (end.v[1] - target.v[1]).abs() < 1e-7);
    }
}
