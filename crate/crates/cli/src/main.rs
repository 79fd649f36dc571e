use clap::Parser;

fn main() {
    let cli = blockpr_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = blockpr_cli::run(&cli, &mut stdout) {
        eprintln!("blockpr: {e}");
        std::process::exit(e.exit_code());
    }
}
