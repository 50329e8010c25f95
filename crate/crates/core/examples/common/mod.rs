#![allow(dead_code)]

use maglab::dynamics::MagneticSystem;
use maglab::fields::{OneFormField, ScalarField};
use maglab::geometry::{Complex, Surface};

/// Nine bumps spread over the octagon, rotated by `twist` eighth-turns.
pub fn spread(s: &Surface, twist: f64, amplitude: f64) -> maglab::Result<ScalarField> {
    let mut f = ScalarField::averaged_bump(Complex::new(0.0, 0.0), 1.0, amplitude, s)?;
    for k in 0..8 {
        let c = Complex::from_polar(0.55, std::f64::consts::FRAC_PI_4 * (k as f64 + twist));
        f = f.sum(&ScalarField::averaged_bump(c, 1.0, amplitude * (1.0 + 0.1 * k as f64), s)?);
    }
    Ok(f)
}

fn magnetic(s: &Surface, coeff: f64, amplitude: f64, id: &str) -> maglab::Result<MagneticSystem> {
    let alpha = OneFormField::product(spread(s, 0.5, amplitude)?, spread(s, 0.0, amplitude)?, coeff);
    Ok(MagneticSystem::new(s.clone(), ScalarField::zero(), alpha).with_id(id))
}

/// Hyperbolic metric with a field weak enough for crit_b.
pub fn weak(s: &Surface) -> maglab::Result<MagneticSystem> {
    magnetic(s, 0.1, 0.3, "weak")
}

/// A field strong enough to break both injectivity criteria.
pub fn strong(s: &Surface) -> maglab::Result<MagneticSystem> {
    magnetic(s, 0.2, 0.5, "strong")
}
