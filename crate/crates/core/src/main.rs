fn main() {
    std::process::exit(rhvi_fdd::cli::cli_dispatch(std::env::args_os()));
}
