#![allow(dead_code)]

use maglab::dynamics::MagneticSystem;
use maglab::fields::{OneFormField, ScalarField};
use maglab::geometry::{Complex, Surface};

pub fn surface() -> Surface {
    Surface::standard().unwrap()
}

pub fn bump(s: &Surface, x: f64, y: f64, radius: f64, amplitude: f64) -> ScalarField {
    ScalarField::averaged_bump(Complex::new(x, y), radius, amplitude, s).unwrap()
}

pub fn free_system(s: &Surface) -> MagneticSystem {
    MagneticSystem::new(s.clone(), ScalarField::zero(), OneFormField::zero()).with_id("free")
}

/// Small conformal bump and a small non-exact 1-form.
pub fn bumpy_system(s: &Surface) -> MagneticSystem {
    let f = bump(s, 0.2, 0.1, 0.9, 0.03);
    let alpha = OneFormField::product(bump(s, -0.3, 0.2, 1.0, 0.5), bump(s, 0.1, -0.4, 0.8, 0.6), 0.1);
    MagneticSystem::new(s.clone(), f, alpha).with_id("bumpy")
}
