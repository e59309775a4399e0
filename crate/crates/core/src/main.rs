fn main() {
    if let Err(e) = safeaug::cli::run(std::env::args_os(), &mut std::io::stdout()) {
        match e {
            safeaug::Error::Usage(msg) => {
                eprint!("{msg}");
                std::process::exit(2);
            }
            e => {
                eprintln!("error: {e}");
                std::process::exit(1);
            }
        }
    }
}
