//! The Bolza group: relator, systole and the shortest closed geodesics.

use maglab::geometry::{systole, Surface};
use maglab::orbit::shortest_classes;

fn main() -> maglab::Result<()> {
    let s = Surface::standard()?;
    println!("relator      {}", s.group().relator());
    println!("systole      {:.12}", systole());
    println!("ring of neighbours of the octagon: {}", s.neighbors().len());
    for w in shortest_classes(&s, 12, 4)? {
        let g = s.group().word_to_matrix(&w);
        println!("{:>6}  |tr| {:>10.6}  length {:.9}", w.to_string(), g.trace().abs(), g.translation_length()?);
    }
    Ok(())
}
