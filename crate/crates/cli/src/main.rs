use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    unimesh_cli::init_logging();
    let cli = unimesh_cli::Cli::parse();
    match unimesh_cli::run(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
