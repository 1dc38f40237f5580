use clap::Parser;
use qubit_feedback::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let workers = cli.command.common().workers.max(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        eprintln!("error: worker pool: {e}");
        std::process::exit(2);
    }
    match run(&cli) {
        Ok(m) => log::info!(
            "{} finished in {:.1}s; manifest in {}",
            m.command,
            m.wall_clock_s,
            cli.command.common().out.display()
        ),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
