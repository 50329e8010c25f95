//! Orbit averages of the 1-form along increasingly long classes.

mod common;

use maglab::config::Config;
use maglab::experiments::{oneform_average_decay, Context};
use maglab::geometry::Surface;
use maglab::orbit::random_words;

fn main() -> maglab::Result<()> {
    let mut cfg = Config::default();
    cfg.solver.m = 512;
    let s = Surface::standard()?;
    let sys = common::weak(&s)?;
    let ctx = Context::from_config(&cfg)?;
    let r = oneform_average_decay(&sys, &random_words(cfg.seed, &[1, 2, 4, 6, 8, 10]), &ctx)?;
    for row in &r.rows {
        println!("{:>10}  T {:>8.4}  average {:>11.3e}", row.word, row.period, row.average.unwrap_or(f64::NAN));
    }
    println!("trend slope {:?}", r.trend_slope);
    Ok(())
}
