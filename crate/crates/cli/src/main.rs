fn main() {
    std::process::exit(gpts_cli::main_with_args(std::env::args_os()));
}
