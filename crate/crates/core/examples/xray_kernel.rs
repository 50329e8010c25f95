//! Potential pairs integrate to zero over closed orbits; generic pairs do not.

mod common;

use maglab::fields::{OneFormField, ScalarField, SymTensorField};
use maglab::geometry::{Complex, Surface};
use maglab::orbit::{shortest_classes, solve_class, SolverOptions};
use maglab::xray::{d_mu, xray_i2, PotentialPair, TensorPair};

fn main() -> maglab::Result<()> {
    let s = Surface::standard()?;
    let bump = |x, y, r, a| ScalarField::averaged_bump(Complex::new(x, y), r, a, &s);
    let sys = common::weak(&s)?;

    let potential = PotentialPair::new(
        OneFormField::product(common::spread(&s, 0.3, 1.0)?, common::spread(&s, 0.0, 1.0)?, 1.0),
        common::spread(&s, 0.6, 0.5)?,
    );
    let image = d_mu(&sys, &potential);
    let generic = TensorPair::new(
        SymTensorField::product(common::spread(&s, 0.2, 1.0)?, common::spread(&s, 0.7, 1.0)?, 1.0),
        OneFormField::product(bump(0.1, 0.1, 0.9, 1.0)?, bump(-0.2, 0.3, 0.9, 1.0)?, 0.5),
    );
    let bound = 1e-5 * potential.c1_norm(&sys)?;
    println!("kernel bound {bound:.3e}");
    for w in shortest_classes(&s, 6, 4)? {
        let o = solve_class(&sys, &w, &SolverOptions::default())?;
        println!(
            "{:>6}  I2[D_mu] {:>11.3e}  I2[generic] {:>11.3e}",
            w.to_string(),
            xray_i2(&sys, &image, &o)?,
            xray_i2(&sys, &generic, &o)?
        );
    }
    Ok(())
}
