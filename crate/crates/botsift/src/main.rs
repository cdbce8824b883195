fn main() {
    std::process::exit(botsift::cli::run_cli(std::env::args()));
}
