fn main() {
    std::process::exit(k3prf::cli::run_from_args(std::env::args_os()));
}
