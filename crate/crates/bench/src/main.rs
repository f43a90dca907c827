use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uplift_bench::config::DataSource;
use uplift_bench::{run, BenchError, ExperimentConfig, Protocol};

#[derive(Parser)]
#[command(name = "uplift-bench", version, about = "Uplift-modeling and ITE benchmark protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a semi-synthetic corpus, its ground truth and a manifest.
    Generate(Common),
    /// Constraint counts, two-sample test and dummy-classifier comparison.
    Validate(Common),
    /// AUUC intervals of tuned uplift models on nested test subsamples.
    Separability(Common),
    /// sqrt(PEHE) of ITE learners over generator realizations.
    IteBench(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML); protocol defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV (optionally gzipped) to use instead of the generator.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for reports and generated files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

fn resolve(protocol: Protocol, args: &Common) -> Result<ExperimentConfig, BenchError> {
    let mut config = match &args.config {
        Some(path) => {
            let c = ExperimentConfig::from_file(path)?;
            if c.protocol != protocol {
                log::warn!(
                    "config protocol `{}` overridden by subcommand `{}`",
                    c.protocol.name(),
                    protocol.name()
                );
            }
            ExperimentConfig { protocol, ..c }
        }
        None => ExperimentConfig::for_protocol(protocol),
    };
    if let Some(path) = &args.data {
        let schema = config.data.as_ref().and_then(|d| d.schema.clone());
        config.data = Some(DataSource {
            path: path.clone(),
            gzip: None,
            schema,
        });
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output = Some(out.clone());
    }
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (protocol, args) = match &cli.command {
        Command::Generate(a) => (Protocol::Generate, a),
        Command::Validate(a) => (Protocol::Validate, a),
        Command::Separability(a) => (Protocol::Separability, a),
        Command::IteBench(a) => (Protocol::IteBenchmark, a),
    };
    let outcome = resolve(protocol, args).and_then(|c| run(&c)).and_then(|report| {
        if args.json {
            println!("{}", report.to_json()?);
        } else {
            print!("{}", report.render());
        }
        Ok(())
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
