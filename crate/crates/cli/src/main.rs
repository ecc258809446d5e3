use clap::Parser;
use qwalk::args::Cli;

fn main() {
    let cli = Cli::parse();
    let code = match qwalk::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qwalk: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
