use clap::Parser;

fn main() {
    let cli = maglev_cli::Cli::parse();
    std::process::exit(maglev_cli::execute(&cli));
}
