//! Marked action spectrum of a magnetic system next to the length spectrum.

mod common;

use maglab::geometry::Surface;
use maglab::orbit::{marked_spectrum, shortest_classes, SolverOptions};

fn main() -> maglab::Result<()> {
    let s = Surface::standard()?;
    let sys = common::weak(&s)?;
    let words = shortest_classes(&s, 10, 4)?;
    let opts = SolverOptions { m: 512, ..SolverOptions::default() };
    let spectrum = marked_spectrum(&sys, &words, &opts)?;
    println!("{:>6} {:>16} {:>16}", "class", "length(geodesic)", "magnetic action");
    for (w, e) in words.iter().zip(&spectrum.entries) {
        let l = s.group().word_to_matrix(w).translation_length()?;
        println!("{:>6} {l:>16.10} {:>16.10}", e.word, e.action);
    }
    Ok(())
}
