use std::process::ExitCode;

use clap::Parser;
use combmem_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => {
            for f in &manifest.files {
                println!("{}", cli.out.join(&f.name).display());
            }
            println!(
                "{}",
                cli.out.join(combmem_cli::output::MANIFEST_NAME).display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
