fn main() { std::process::exit(sdfields::run(std::env::args().collect())); }
