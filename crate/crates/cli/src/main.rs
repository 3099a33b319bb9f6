use clap::Parser;

use micromotion_cli::{exit_code, run, Cli, JobSpec};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = JobSpec::from_cli(cli).and_then(|job| run(&job));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(e.class()));
        }
    }
}
