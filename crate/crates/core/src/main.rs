fn main() {
    std::process::exit(pme_concavity::cli::main_with_args(std::env::args_os()) as i32);
}
