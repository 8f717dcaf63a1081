fn main() {
    std::process::exit(pdd_rdo::cli::main_with_args(std::env::args_os()));
}
