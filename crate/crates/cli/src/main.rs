fn main() {
    std::process::exit(debye_cli::run_command(std::env::args_os()));
}
