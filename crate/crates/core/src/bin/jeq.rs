fn main() {
    if let Err(e) = jeq::cli::configure_threads() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
    let code = jeq::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
