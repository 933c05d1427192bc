mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netident::identify::Criterion;

#[derive(Parser, Debug)]
#[command(name = "netident", version, about = "Local module identification in dynamic networks with correlated noise")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Master seed for simulation and optimizer starts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print machine-readable JSON instead of the text report.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Number of log-spaced frequencies in (0, pi].
    #[arg(long, global = true)]
    pub grid_size: Option<usize>,
}

impl Global {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("netident-out"))
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size.unwrap_or(netident::grid::DEFAULT_GRID_POINTS)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select predicted outputs, predictor inputs and blocking nodes.
    Analyze(TargetArgs),
    /// Verify the zero blocks of the immersed disturbance spectrum.
    CheckSpectra(TargetArgs),
    /// Simulate the network and write a signal record.
    Simulate(SimulateArgs),
    /// Estimate the selected MIMO model from a signal record.
    Identify(IdentifyArgs),
    /// Repeated simulation and estimation for MIMO and single-output setups.
    Montecarlo(MontecarloArgs),
}

#[derive(Args, Debug)]
pub struct TargetArgs {
    /// Network config file.
    pub config: PathBuf,
    /// Target module as `j,i` (1-based).
    #[arg(long, value_parser = parse_target)]
    pub target: (usize, usize),
    /// Use this blocking set instead of searching, e.g. `6` or `6,7`.
    #[arg(long, value_delimiter = ',', value_parser = parse_node)]
    pub blocking: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// Number of retained samples.
    #[arg(short = 'N', long)]
    pub samples: usize,
    #[arg(long, default_value_t = netident::simulate::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    /// Drop all external excitation.
    #[arg(long)]
    pub no_excitation: bool,
    /// Report the excitation diagnostic of this target's selection.
    #[arg(long, value_parser = parse_target)]
    pub target: Option<(usize, usize)>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "data.txt")]
    pub output: String,
}

#[derive(Args, Debug)]
pub struct IdentifyArgs {
    pub config: PathBuf,
    /// Signal record as written by `simulate`.
    pub data: PathBuf,
    #[arg(long, value_parser = parse_target)]
    pub target: (usize, usize),
    #[arg(long, default_value = "mldet", value_parser = parse_criterion)]
    pub criterion: Criterion,
    /// Model orders, e.g. `g=1,1,1 h=1,1 g2:1=2,1,1`; `true` takes the orders of the config.
    #[arg(long, default_value = "true")]
    pub orders: String,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    /// Fit the single-output baseline with a scalar noise model instead.
    #[arg(long)]
    pub miso: bool,
}

#[derive(Args, Debug)]
pub struct MontecarloArgs {
    /// Network config file; taken from the manifest when one is given.
    pub config: Option<PathBuf>,
    /// Rerun an emitted manifest.
    #[arg(long, conflicts_with_all = ["config", "target"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_parser = parse_target)]
    pub target: Option<(usize, usize)>,
    /// Realizations per sample size.
    #[arg(short = 'R', long, default_value_t = 20)]
    pub realizations: usize,
    /// Comma-separated sample sizes.
    #[arg(short = 'N', long, value_delimiter = ',', value_parser = parse_node, default_value = "500,2000,8000")]
    pub samples: Vec<usize>,
    #[arg(long, default_value = "mldet", value_parser = parse_criterion)]
    pub criterion: Criterion,
    /// MIMO model orders; the true orders when absent.
    #[arg(long)]
    pub orders: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
}

fn parse_target(s: &str) -> Result<(usize, usize), String> {
    let (j, i) = s.split_once(',').ok_or_else(|| format!("expected j,i but got '{s}'"))?;
    Ok((parse_node(j)?, parse_node(i)?))
}

fn parse_node(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(format!("'{s}' is not a positive integer")),
    }
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: netident::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(g, &a),
        Command::CheckSpectra(a) => commands::check_spectra(g, &a),
        Command::Simulate(a) => commands::simulate(g, &a),
        Command::Identify(a) => commands::identify(g, &a),
        Command::Montecarlo(a) => commands::montecarlo(g, &a),
    };
    match result {
        Ok(report) => {
            if g.json {
                println!("{}", serde_json::to_string_pretty(&report.json).expect("json value"));
            } else {
                print!("{}", report.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
