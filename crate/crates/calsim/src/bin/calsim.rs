//! Thin binary wrapper: all behavior lives in the library's CLI module.

fn main() {
    std::process::exit(calsim::cli::entry(std::env::args()));
}
