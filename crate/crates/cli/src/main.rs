mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use growthbound::Error;

use commands::{Ctx, Outcome};

/// Growth bounds for subharmonic functions near singular sets.
#[derive(Parser)]
#[command(name = "growthbound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Improved bounds h(d) for each requested method.
    Improve(Common),
    /// Boundary-distance bounds from the distribution function and from mu.
    DomarBound(Common),
    /// Largest discrete subharmonic minorant of g(dist(x, A)).
    Perron(Common),
    /// Verify scenarios (the shipped corpus without --config).
    Verify(Common),
    /// Admissibility constant and Assouad dimension estimate of a set.
    Admissibility(Common),
    /// Both boundary-distance bounds along a ray.
    Compare(Common),
    /// Exploratory margins for scenarios; asserts nothing.
    Probe(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; scenarios run in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Grid size override.
    #[arg(long)]
    grid: Option<usize>,
    /// Minorant tolerance override, relative to the cap.
    #[arg(long)]
    tol: Option<f64>,
}

fn error_json(e: &Error) -> String {
    let mut v = serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
    });
    let mut inner = e;
    while let Error::Scenario { source, scenario } = inner {
        v["scenario"] = scenario.clone().into();
        inner = source;
    }
    if let Error::Config { field, .. } = inner {
        v["field"] = field.clone().into();
    }
    v.to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GROWTHBOUND_LOG", "warn")).init();
    let cli = Cli::parse();
    let (run, common): (fn(&Ctx) -> growthbound::Result<Outcome>, Common) = match cli.command {
        Command::Improve(c) => (commands::improve, c),
        Command::DomarBound(c) => (commands::domar_bound, c),
        Command::Perron(c) => (commands::perron, c),
        Command::Verify(c) => (commands::verify, c),
        Command::Admissibility(c) => (commands::admissibility, c),
        Command::Compare(c) => (commands::compare, c),
        Command::Probe(c) => (commands::probe, c),
    };
    if let Some(n) = common.jobs {
        if n == 0 {
            eprintln!("{}", error_json(&Error::config("--jobs", "must be at least 1")));
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already set: {e}");
        }
    }
    let ctx = Ctx {
        config: common.config,
        out: common.out,
        seed: common.seed,
        grid: common.grid,
        tol: common.tol,
    };
    match run(&ctx) {
        Ok(o) => {
            print!("{}", o.summary);
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            let config = matches!(&e, Error::Config { .. });
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
