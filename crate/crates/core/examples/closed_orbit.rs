//! Seed, minimize and refine the closed magnetic geodesic of one class.

mod common;

use maglab::geometry::{Surface, Word};
use maglab::orbit::{initial_loop, minimize_action, shoot_refine, SolverOptions};

fn main() -> maglab::Result<()> {
    let s = Surface::standard()?;
    let sys = common::weak(&s)?;

    let word: Word = std::env::args().nth(1).unwrap_or_else(|| "ad".into()).parse()?;
    let opts = SolverOptions::default();
    let seed = initial_loop(&s, &word, opts.m)?;
    let (lp, descent) = minimize_action(&sys, &seed, &opts)?;
    println!("descent: {} iterations, discrete action {:.12}", descent.iterations, descent.action);
    let o = shoot_refine(&sys, &lp, &opts)?;
    println!("refined {} after {} Newton steps (residual {:.2e})", o.refined, o.newton_iterations, o.shooting_residual);
    println!("action {:.12}  length {:.12}  flux {:.3e}", o.action, o.length, o.alpha_integral);
    println!("EL residual {:.2e}  closure {:.2e}  crit_dp {:.4}", o.el_residual, o.closure_error, o.crit_dp);
    Ok(())
}
