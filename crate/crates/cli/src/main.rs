use clap::Parser;
use lithoseg_cli::{execute, Cli, Outcome};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::AwaitingCuration(msg)) => println!("status: awaiting_curation ({msg})"),
        Ok(Outcome::AlreadyDone) => println!("status: done (already; pass --force to rerun)"),
        Ok(Outcome::Done) => println!("status: done"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
