use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OR_IR_LOG", "warn")).init();
    let cli = optir_cli::Cli::parse();
    let code = optir_cli::run(cli, &mut std::io::stdout().lock());
    std::process::exit(code);
}
