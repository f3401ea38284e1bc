use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skinny_gemm::experiment::{
    cmd_model, cmd_run, cmd_sweep_tcf, cmd_tune, zip_shapes, ExperimentConfig, ModelConfig, ParamOverride,
    SweepConfig, TuneConfig,
};
use skinny_gemm::{Catalog, KernelVariant, Precision};

#[derive(Parser)]
#[command(version, about = "Tall-and-skinny GEMM simulator, performance model and tuner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate kernels against the oracle and tabulate counters and model estimates.
    Run(RunArgs),
    /// Tune (t2, t3) by gradient descent and pick t1.
    Tune(ShapeArgs),
    /// Threshold and bound classification per GPU.
    Model(ModelArgs),
    /// Predicted time and B/C traffic of the tall-A kernels across tcf.
    SweepTcf(SweepArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "double")]
    precision: Precision,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG next to --out.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct Shape {
    #[arg(long, required = true)]
    m: Vec<usize>,
    #[arg(long, required = true)]
    k: Vec<usize>,
    #[arg(long, required = true)]
    n: Vec<usize>,
}

#[derive(Args)]
struct Tiles {
    #[arg(long)]
    t1: Option<usize>,
    #[arg(long)]
    t2: Option<usize>,
    #[arg(long)]
    t3: Option<usize>,
    #[arg(long)]
    tcf: Option<usize>,
}

impl Tiles {
    fn over(&self) -> ParamOverride {
        ParamOverride { t1: self.t1, t2: self.t2, t3: self.t3, tcf: self.tcf }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    gpu: String,
    #[command(flatten)]
    shape: Shape,
    /// Kernel to run (repeatable); all six when omitted.
    #[arg(long)]
    variant: Vec<KernelVariant>,
    #[command(flatten)]
    tiles: Tiles,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(long)]
    gpu: String,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ModelArgs {
    /// One GPU; every catalog entry when omitted.
    #[arg(long)]
    gpu: Option<String>,
    /// Column counts to classify (repeatable); 2, 4, 8, 16 when omitted.
    #[arg(long)]
    n: Vec<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    gpu: String,
    /// Row counts (repeatable); 1e4 through 1e7 when omitted.
    #[arg(long)]
    m: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[command(flatten)]
    tiles: Tiles,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> skinny_gemm::Result<()> {
    let catalog = Catalog::from_env()?;
    match command {
        Command::Run(a) => {
            let mut cfg = ExperimentConfig::new(a.gpu, a.common.precision);
            cfg.shapes = zip_shapes(&a.shape.m, &a.shape.k, &a.shape.n)?;
            if !a.variant.is_empty() {
                cfg.variants = a.variant;
            }
            cfg.params = a.tiles.over();
            cfg.seed = a.seed;
            cfg.out = a.common.out;
            cfg.plot = a.common.plot;
            cfg.workers = a.workers;
            cmd_run(&cfg, &catalog).map(drop)
        }
        Command::Tune(a) => {
            let cfg = TuneConfig {
                gpu_name: a.gpu,
                precision: a.common.precision,
                shapes: zip_shapes(&a.shape.m, &a.shape.k, &a.shape.n)?,
                out: a.common.out,
                plot: a.common.plot,
            };
            cmd_tune(&cfg, &catalog).map(drop)
        }
        Command::Model(a) => {
            let cfg = ModelConfig {
                gpu_name: a.gpu,
                precision: a.common.precision,
                ns: a.n,
                out: a.common.out,
                plot: a.common.plot,
            };
            cmd_model(&cfg, &catalog).map(drop)
        }
        Command::SweepTcf(a) => {
            let cfg = SweepConfig {
                gpu_name: a.gpu,
                precision: a.common.precision,
                k: a.k,
                n: a.n,
                ms: a.m,
                params: a.tiles.over(),
                out: a.common.out,
                plot: a.common.plot,
            };
            cmd_sweep_tcf(&cfg, &catalog).map(drop)
        }
    }
}
