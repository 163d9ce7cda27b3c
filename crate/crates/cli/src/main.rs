fn main() {
    std::process::exit(outliers_cli::cli::main_with_args(std::env::args_os()));
}
