//! Both injectivity criteria for a weak field and for a strong one.

mod common;

use maglab::config::Config;
use maglab::experiments::{criteria_report, Context};
use maglab::geometry::Surface;
use maglab::orbit::shortest_classes;

fn main() -> maglab::Result<()> {
    let s = Surface::standard()?;
    let ctx = Context::from_config(&Config::default())?;
    let words = shortest_classes(&s, 6, 4)?;
    for sys in [common::weak(&s)?, common::strong(&s)?] {
        let r = criteria_report(&sys, &ctx.grid, &words, &ctx)?;
        println!("{}: crit_b margin {:.4}", sys.id, r.crit_b.worst);
        for row in &r.orbits {
            println!("  {:>6} T*int k+ = {:.4}", row.word, row.crit_dp.unwrap_or(f64::NAN));
        }
        println!("  {}", r.verdict);
    }
    Ok(())
}
