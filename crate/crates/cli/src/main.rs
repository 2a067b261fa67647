fn main() {
    std::process::exit(qsr_core::harness::cli::run(std::env::args_os()));
}
