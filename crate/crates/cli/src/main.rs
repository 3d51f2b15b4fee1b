fn main() {
    std::process::exit(hexatm_cli::main_with(std::env::args_os()));
}
