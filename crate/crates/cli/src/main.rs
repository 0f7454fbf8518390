use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = cfx_cli::Cli::parse();
    let cmd = cli.command.name();
    if let Err(e) = cfx_cli::run(cli) {
        eprintln!("error: {e:#}");
        eprintln!("hint: `cfx {cmd} --help` lists the arguments; RUST_LOG=info shows progress");
        std::process::exit(1);
    }
}
