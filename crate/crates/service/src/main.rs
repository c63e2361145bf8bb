use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use crowdsim_core::engine::threads_from_env;
use crowdsim_core::scenario::{parse_scenario, ScenarioSpec};
use crowdsim_core::trajectory::{replay, CommandTrace};
use crowdsim_service::bench::run_bench;
use crowdsim_service::protocol::DEFAULT_PORT;
use crowdsim_service::server::{Mode, Server};

#[derive(Parser)]
#[command(name = "crowdsim", version, about = "Crowd and robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and report the first bad field.
    Validate { file: PathBuf },
    /// Serve a scenario to controllers over TCP.
    Run(RunArgs),
    /// Time decision cycles for several robot counts.
    Bench {
        file: PathBuf,
        /// Comma-separated robot counts, e.g. 0,2,4
        #[arg(long, value_delimiter = ',', required = true)]
        robots: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        cycles: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Realtime,
    Lockstep,
}

#[derive(clap::Args)]
struct RunArgs {
    file: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Lockstep)]
    mode: ModeArg,
    /// Steps per second in realtime mode; defaults to 1/dt.
    #[arg(long)]
    rate: Option<f64>,
    /// Trajectory log, one JSON line per tick.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Stop after this many steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Run without a network, replaying commands from a trace file.
    #[arg(long, requires = "steps")]
    headless: bool,
    #[arg(long, requires = "headless")]
    commands: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Run(args) => run(args),
        Command::Bench {
            file,
            robots,
            cycles,
            csv,
        } => bench(&file, &robots, cycles, csv.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path) -> Result<ScenarioSpec, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn validate(path: &Path) -> Result<(), String> {
    let spec = load(path)?;
    println!(
        "{}: ok ({} pedestrians, {} robots, {} wall segments)",
        spec.name,
        spec.pedestrian_count(),
        spec.robot_ids().len(),
        spec.obstacles.len()
    );
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn run(args: RunArgs) -> Result<(), String> {
    let spec = load(&args.file)?;
    if args.headless {
        let trace = match &args.commands {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                CommandTrace::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => CommandTrace::new(),
        };
        let steps = args.steps.unwrap_or(0);
        let out: Box<dyn Write> = match &args.record {
            Some(p) => Box::new(create(p)?),
            None => Box::new(io::stdout().lock()),
        };
        replay(&spec, &trace, steps, threads_from_env(), out).map_err(|e| e.to_string())?;
        return Ok(());
    }

    let mode = match args.mode {
        ModeArg::Lockstep => Mode::Lockstep,
        ModeArg::Realtime => Mode::Realtime {
            rate_hz: args.rate.unwrap_or(1.0 / spec.config.dt),
        },
    };
    let mut server = Server::bind(&spec, (args.host.as_str(), args.port), mode).map_err(|e| e.to_string())?;
    if let Some(n) = args.steps {
        server = server.with_max_steps(n);
    }
    if let Some(p) = &args.record {
        server = server.record_to(Box::new(create(p)?));
    }
    let tick = server.run().map_err(|e| e.to_string())?;
    info!("stopped at tick {tick}");
    Ok(())
}

fn bench(path: &Path, robots: &[usize], cycles: usize, csv: Option<&Path>) -> Result<(), String> {
    let spec = load(path)?;
    let report = run_bench(&spec, robots, cycles).map_err(|e| e.to_string())?;
    let text = report.to_csv();
    print!("{text}");
    eprintln!("{}", report.environment_note());
    if let Some(p) = csv {
        fs::write(p, &text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(())
}
