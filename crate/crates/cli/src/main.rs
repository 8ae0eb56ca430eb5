fn main() {
    let level = std::env::var("MACHNET_LOG").unwrap_or_else(|_| "warn".into());
    env_logger::Builder::new().parse_filters(&level).format_timestamp(None).init();
    let code = machnet_cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
