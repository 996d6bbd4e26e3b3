use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = covfloor_cli::Cli::parse();
    if let Err(e) = covfloor_cli::run(cli) {
        eprintln!("covfloor: {e}");
        std::process::exit(e.exit_code());
    }
}
