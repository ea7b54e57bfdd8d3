use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("LIFESPAN_LOG")).init();
    let code =
        wave_lifespan::harness::run_cli(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
