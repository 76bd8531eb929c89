//! `nwbeam`: simulate data, run and score the enhancer, inspect and create models.

mod commands;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nwbeam_core::{PipelineMode, Wiener};

#[derive(Parser)]
#[command(name = "nwbeam", version, about = "Low-latency multichannel speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate simulated noisy/target pairs and a manifest.
    Simulate {
        /// TOML scene configuration; omitted keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Enhance a multichannel recording.
    Enhance {
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the mode stored in the model.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<PipelineMode>,
        #[arg(long, value_enum, default_value_t = WienerArg::Online)]
        wiener: WienerArg,
        /// Refinement passes, full mode only.
        #[arg(long, default_value_t = 1)]
        iterations: usize,
        #[arg(long)]
        input: PathBuf,
        /// Clean reference, required by oracle-nwf.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score an estimate against a reference.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        est: PathBuf,
        /// Comma separated: si_sdr, stoi, pcm.
        #[arg(long, value_delimiter = ',', default_value = "si_sdr,stoi,pcm")]
        metrics: Vec<String>,
        /// Record id; defaults to the estimate's file stem.
        #[arg(long)]
        id: Option<String>,
        /// Also write the record as JSON lines here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print parameter, compute and latency budgets and the tensor list.
    Inspect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = WienerArg::Online)]
        wiener: WienerArg,
        /// Microphone count for models without a recurrent stage.
        #[arg(long, default_value_t = 8)]
        channels: usize,
        #[arg(long)]
        json: bool,
    },
    /// Write a randomly initialized model.
    Init {
        /// TOML architecture: mode, M, H, blocks, iW, J, oW, fs.
        #[arg(long)]
        arch: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = NwfInitArg::Random)]
        init_nwf: NwfInitArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WienerArg {
    Batch,
    Online,
}

impl WienerArg {
    fn mode(self) -> Wiener {
        match self {
            WienerArg::Batch => Wiener::batch(),
            WienerArg::Online => Wiener::online(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NwfInitArg {
    Dft,
    Random,
}

fn parse_mode(s: &str) -> Result<PipelineMode, String> {
    PipelineMode::parse(s).ok_or_else(|| {
        let names: Vec<_> = PipelineMode::ALL.iter().map(|m| m.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, count, seed, out_dir } => commands::simulate(config.as_deref(), count, seed, &out_dir),
        Command::Enhance { model, mode, wiener, iterations, input, target, output } => commands::enhance(&commands::EnhanceArgs {
            model: &model,
            mode,
            wiener: wiener.mode(),
            iterations,
            input: &input,
            target: target.as_deref(),
            output: &output,
        }),
        Command::Eval { reference, est, metrics, id, report } => {
            commands::eval(&reference, &est, &metrics, id, report.as_deref())
        }
        Command::Inspect { model, wiener, channels, json } => commands::inspect(&model, wiener.mode(), channels, json),
        Command::Init { arch, seed, out, init_nwf } => {
            let nwf = match init_nwf {
                NwfInitArg::Dft => nwbeam_core::pipeline::NwfInit::Dft,
                NwfInitArg::Random => nwbeam_core::pipeline::NwfInit::Random,
            };
            commands::init(&arch, seed, &out, nwf)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
