use foampilot_cli::commands::{run, Environment};
use foampilot_cli::console::Console;

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("FOAMPILOT_LOG"))
        .with_writer(std::io::stderr)
        .init();
    std::process::exit(run(std::env::args_os(), Console::stdio(), Environment::from_process()));
}
