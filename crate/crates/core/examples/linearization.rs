//! Taylor remainder of the marked action along a line of systems.

use maglab::config::Config;
use maglab::experiments::{linearization_experiment, Context, LinearDirection};
use maglab::fields::{OneFormField, ScalarField};
use maglab::orbit::shortest_classes;

fn main() -> maglab::Result<()> {
    let mut cfg = Config::default();
    cfg.solver.m = 512;
    let s = cfg.surface()?;
    let sys = cfg.system(&s)?;
    let ctx = Context::from_config(&cfg)?;
    let lin = &cfg.experiments.linearization;
    let dir = LinearDirection {
        conformal: ScalarField::from_spec(&lin.conformal, &s)?,
        beta: OneFormField::from_spec(&lin.one_form, &s)?,
    };
    let words = shortest_classes(&s, 4, 4)?;
    let r = linearization_experiment(&sys, &dir, &lin.epsilons, &words, &ctx)?;
    for row in &r.rows {
        println!("eps {:>8.1e}  remainder {:?}", row.epsilon, row.remainder);
    }
    println!("fitted order {:?}", r.slope);
    Ok(())
}
