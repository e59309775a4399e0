//! Prints the fifteen catalog transforms with their label index and
//! default magnitudes at a given resolution.
//!
//! cargo run --example list_transforms -- [size]

fn main() -> safeaug::Result<()> {
    let size = std::env::args().nth(1).map_or(32, |s| s.parse().expect("size"));
    print!("{}", safeaug::cli::list_transforms(size)?);
    Ok(())
}
