use clap::Parser;
use mapper_cli::{exit, resolve, run_analysis, run_sweep, Cli, Job};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::VALIDATION
            } else {
                exit::OK
            };
        }
    };
    let job = match resolve(cli) {
        Ok(job) => job,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::VALIDATION;
        }
    };
    let outcome = match &job {
        Job::Run(cfg) => run_analysis(cfg).map(|_| ()),
        Job::Sweep(cfg) => run_sweep(cfg).map(|_| ()),
    };
    match outcome {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::RUNTIME
        }
    }
}
