use clap::Parser;
use cohsim_cli::app::{run, Cli};

fn main() {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let code = match run(cli, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
