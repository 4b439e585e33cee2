fn main() {
    std::process::exit(sbp_fdtd::cli::main_with_args(std::env::args_os()));
}
