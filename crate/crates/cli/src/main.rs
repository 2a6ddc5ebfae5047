fn main() {
    if let Err(err) = sigtune_cli::run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
