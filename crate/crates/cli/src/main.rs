use clap::Parser;

fn main() {
    let cli = eqspec_cli::Cli::parse();
    match eqspec_cli::run(&cli) {
        Ok(dir) => println!("{}", dir.display()),
        Err(e) => {
            if let eqspec_cli::CliError::Numerical { stage, .. } = &e {
                eprintln!("stage: {stage}");
            }
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
