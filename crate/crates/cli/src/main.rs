fn main() {
    std::process::exit(crashaudit_cli::main_with_args(std::env::args_os()));
}
