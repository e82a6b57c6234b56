fn main() {
    let code = abs_lab::cli::run_cli(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
