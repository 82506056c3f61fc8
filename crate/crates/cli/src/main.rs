use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = citegap_cli::Cli::parse();
    if let Err(error) = citegap_cli::run(cli) {
        eprintln!("{}", error.to_json());
        std::process::exit(1);
    }
}
