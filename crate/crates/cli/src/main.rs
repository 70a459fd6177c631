use clap::Parser;

fn main() {
    let cli = ciest::cli::Cli::parse();
    let code = ciest::cli::execute(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
