fn main() {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = flakelayer_cli::run(std::env::args_os(), &mut stdout) {
        eprintln!("flakelayer: {e}");
        std::process::exit(e.exit_code());
    }
}
