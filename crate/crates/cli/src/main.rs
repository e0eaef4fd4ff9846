use clap::Parser;
use martree_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let invocation = std::env::args().collect::<Vec<_>>().join(" ");
    match run(&cli, &invocation) {
        Ok(r) => {
            for c in &r.outcome.checks {
                println!("{} {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            for f in &r.files {
                println!("wrote {}", f.display());
            }
            std::process::exit(r.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
