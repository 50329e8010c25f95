//! The regular octagon as a fundamental domain, with hyperbolic-area quadrature.
//!
//! The octagon is split into eight curved sectors from the center, one per
//! side. Sector `k` is parametrized by `(s, φ) ↦ s·t(φ)·e^{iφ}` where `t(φ)`
//! is the radius at which the ray at angle `φ` meets the geodesic side, so the
//! curved sides are integrated exactly. Each sector gets a tensor
//! Gauss–Legendre rule on an `n × n` panel grid; the estimate compares `n`
//! with `2n` panels.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::Serialize;

use crate::error::{MaglabError, Result};
use crate::geometry::{circumradius, inradius, Complex};

/// Value of a domain integral with its refinement-based error estimate.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Set when the estimate exceeds the domain's tolerance.
    pub warning: bool,
}

#[derive(Clone, Debug)]
pub struct FundamentalDomain {
    vertices: [Complex; 8],
    /// Nodes with weights already multiplied by the hyperbolic area density.
    coarse: Vec<(Complex, f64)>,
    fine: Vec<(Complex, f64)>,
    tolerance: f64,
}

/// Euclidean data of the geodesic side facing angle `kπ/4`: the circle center
/// distance `C` and radius `ρ`, with `C² − ρ² = 1`.
fn side_circle() -> (f64, f64) {
    let m = (inradius() / 2.0).tanh();
    ((1.0 + m * m) / (2.0 * m), (1.0 - m * m) / (2.0 * m))
}

/// Distance along the ray at angle `psi` (relative to the side normal) to the side.
fn side_radius(psi: f64) -> f64 {
    let (c, _) = side_circle();
    let b = c * psi.cos();
    // smaller root of t² − 2bt + 1 = 0
    1.0 / (b + (b * b - 1.0).sqrt())
}

fn sector_nodes(panels: usize, order: usize) -> Vec<(Complex, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order > 0"));
    let pairs = rule.as_node_weight_pairs();
    let mut out = Vec::with_capacity(8 * panels * panels * order * order);
    let ds = 1.0 / panels as f64;
    let dphi = FRAC_PI_4 / panels as f64;
    for k in 0..8 {
        let axis = k as f64 * FRAC_PI_4;
        for pi in 0..panels {
            for pj in 0..panels {
                for &(xs, ws) in pairs {
                    let s = ds * (pi as f64 + 0.5 * (xs + 1.0));
                    for &(xp, wp) in pairs {
                        let psi = -FRAC_PI_8 + dphi * (pj as f64 + 0.5 * (xp + 1.0));
                        let t = side_radius(psi);
                        let r = s * t;
                        let z = Complex::from_polar(r, axis + psi);
                        let density = 4.0 / (1.0 - r * r).powi(2);
                        let jac = s * t * t;
                        out.push((z, 0.25 * ws * wp * ds * dphi * jac * density));
                    }
                }
            }
        }
    }
    out
}

impl FundamentalDomain {
    /// Octagon with `panels × panels` panels of `order`-point Gauss rules per sector.
    pub fn new(panels: usize, order: usize, tolerance: f64) -> Result<Self> {
        if panels == 0 || order == 0 {
            return Err(MaglabError::Input("quadrature needs at least one panel and node".into()));
        }
        let rv = (circumradius() / 2.0).tanh();
        let vertices = std::array::from_fn(|k| Complex::from_polar(rv, FRAC_PI_8 + k as f64 * FRAC_PI_4));
        Ok(Self {
            vertices,
            coarse: sector_nodes(panels, order),
            fine: sector_nodes(2 * panels, order),
            tolerance,
        })
    }

    pub fn vertices(&self) -> &[Complex; 8] {
        &self.vertices
    }

    /// Hyperbolic distance from the center to a vertex.
    pub fn circumradius(&self) -> f64 {
        circumradius()
    }

    /// Hyperbolic distance from the center to a side.
    pub fn inradius(&self) -> f64 {
        inradius()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn node_count(&self) -> usize {
        self.fine.len()
    }

    /// Interior angles at the eight vertices.
    pub fn interior_angles(&self) -> [f64; 8] {
        let (c, _) = side_circle();
        std::array::from_fn(|k| {
            let v = self.vertices[k];
            let sides = [k, (k + 1) % 8];
            let tangents: Vec<Complex> = sides
                .iter()
                .map(|&j| {
                    let center = Complex::from_polar(c, j as f64 * FRAC_PI_4);
                    let mid = Complex::from_polar(1.0 / (c + (c * c - 1.0).sqrt()), j as f64 * FRAC_PI_4);
                    let t = Complex::new(0.0, 1.0) * (v - center);
                    let t = t / t.norm();
                    if (t.conj() * (mid - v)).re >= 0.0 {
                        t
                    } else {
                        -t
                    }
                })
                .collect();
            (tangents[0].conj() * tangents[1]).re.clamp(-1.0, 1.0).acos()
        })
    }

    /// `∫_octagon F dvol_hyp`.
    pub fn integrate<F>(&self, mut integrand: F) -> Result<QuadratureResult>
    where
        F: FnMut(Complex) -> Result<f64>,
    {
        let mut coarse = 0.0;
        for &(z, w) in &self.coarse {
            coarse += w * integrand(z)?;
        }
        let mut fine = 0.0;
        for &(z, w) in &self.fine {
            fine += w * integrand(z)?;
        }
        let error_estimate = (fine - coarse).abs();
        Ok(QuadratureResult {
            value: fine,
            error_estimate,
            warning: error_estimate > self.tolerance * fine.abs().max(1.0),
        })
    }

    /// Vector-valued variant of [`FundamentalDomain::integrate`].
    pub fn integrate_many<F, const N: usize>(&self, mut integrand: F) -> Result<[QuadratureResult; N]>
    where
        F: FnMut(Complex) -> Result<[f64; N]>,
    {
        let mut coarse = [0.0; N];
        for &(z, w) in &self.coarse {
            let v = integrand(z)?;
            for i in 0..N {
                coarse[i] += w * v[i];
            }
        }
        let mut fine = [0.0; N];
        for &(z, w) in &self.fine {
            let v = integrand(z)?;
            for i in 0..N {
                fine[i] += w * v[i];
            }
        }
        Ok(std::array::from_fn(|i| {
            let e = (fine[i] - coarse[i]).abs();
            QuadratureResult {
                value: fine[i],
                error_estimate: e,
                warning: e > self.tolerance * fine[i].abs().max(1.0),
            }
        }))
    }

    /// Hyperbolic area of the octagon (4π).
    pub fn area() -> f64 {
        4.0 * PI
    }
}

impl Default for FundamentalDomain {
    fn default() -> Self {
        Self::new(4, 8, 1e-6).expect("valid default quadrature")
    }
}
