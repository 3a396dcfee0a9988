fn main() { std::process::exit(markmal_cli::run(&std::env::args().collect::<Vec<_>>())); }
