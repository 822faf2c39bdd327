use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("STRADIC_LOG")).init();
    let cli = stradic_cli::Cli::parse();
    std::process::exit(stradic_cli::run(cli));
}
