//! Constant field on the hyperbolic plane: for |b| > 1 every orbit is a
//! circle, closing after time 2π/√(b² − 1).

use maglab::dynamics::{flow, FlowOptions, MagneticSystem, PhasePoint};
use maglab::geometry::{distance_unchecked, Complex, Surface};

fn main() -> maglab::Result<()> {
    let s = Surface::standard()?;
    for b in [1.25, 2.0, 4.0] {
        let sys = MagneticSystem::constant_field_cover(s.clone(), b);
        let p = PhasePoint::from_angle(&sys, Complex::new(0.1, -0.2), 0.7)?;
        let period = std::f64::consts::TAU / (b * b - 1.0).sqrt();
        let r = flow(&sys, &p, period, FlowOptions::max_step(period, 1e-3).in_cover())?;
        let half = flow(&sys, &p, period / 2.0, FlowOptions::max_step(period, 1e-3).in_cover())?;
        // the diameter of a hyperbolic circle of geodesic curvature b is 2 artanh(1/b)
        println!(
            "b {b:>4}: period {period:.6}  return gap {:.2e}  diameter {:.9} (expected {:.9})",
            (r.end.z - p.z).norm(),
            distance_unchecked(half.end.z, p.z),
            2.0 * (1.0 / b).atanh()
        );
    }
    Ok(())
}
