//! A conformal change of the metric with the same 1-form: volume chains,
//! orbit averages and the gap between the two marked action spectra.

use maglab::config::Config;
use maglab::experiments::{conformal_experiment, Context};
use maglab::fields::ScalarField;
use maglab::geometry::Complex;
use maglab::orbit::{random_words, shortest_classes};

fn main() -> maglab::Result<()> {
    let mut cfg = Config::default();
    cfg.solver.m = 512;
    let s = cfg.surface()?;
    let sys = cfg.system(&s)?;
    let ctx = Context::from_config(&cfg)?;
    let f = ScalarField::averaged_bump(Complex::new(0.2, 0.1), 0.9, 0.05, &s)?;
    let r = conformal_experiment(&sys, &f, &shortest_classes(&s, 8, 4)?, &random_words(cfg.seed, &[2, 4, 8]), &ctx)?;
    println!("volume ratio {:.8} (swapped: {})", r.volume_ratio, r.swapped);
    println!("energy chain {:?}", r.energy_chain.values);
    println!("length chain {:?}", r.length_chain.values);
    for a in &r.averages {
        println!("{:>10}  functional {:.6}", a.word, a.functional);
    }
    println!("gap {:.4e} at {:?}", r.gap, r.gap_word);
    Ok(())
}
