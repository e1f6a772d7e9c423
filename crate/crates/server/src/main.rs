use clap::Parser;

use facetlit_server::cli::{assess, serve, Cli, Command};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Assess(args) => {
            let report = assess(&args)?;
            if args.out.is_none() {
                print!("{report}");
            }
            Ok(())
        }
        Command::Serve(args) => {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(serve(&args))
        }
    }
}
