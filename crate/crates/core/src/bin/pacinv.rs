fn main() {
    let seed = std::env::var("SEED").ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = pacinv::cli::dispatch(
        std::env::args_os(),
        seed.as_deref(),
        &mut stdout.lock(),
        &mut stderr.lock(),
    );
    std::process::exit(code);
}
