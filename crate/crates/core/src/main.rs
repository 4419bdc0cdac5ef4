fn main() { std::process::exit(anisodecay::cli::run(std::env::args_os())); }
