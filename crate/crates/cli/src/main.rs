use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COASSEMBLY_LOG", "warn")).init();
    let stdin = io::stdin();
    let code = coassembly_cli::main_with(std::env::args_os(), &mut stdin.lock(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
