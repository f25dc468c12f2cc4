use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polarq_core::construct::{evolve, select_by_error_budget, Degrader};
use polarq_core::tables::{self, Scale, Table, DEFAULT_BUDGET};
use polarq_core::{
    ChannelSpec, ConstructionConfig, IndexOrder, Kernel, LeafReport, Mode, Reliability,
};
use serde::Serialize;

mod diagnose;
mod failure;
mod manifest;

use diagnose::DiagnoseArgs;
use failure::Failure;
use manifest::RunManifest;

/// Polar code construction by greedy channel quantization.
#[derive(Debug, Parser)]
#[command(name = "polarq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build one code and print its rate.
    Construct(ConstructArgs),
    /// Reproduce one of the achievable-rate sweeps as CSV.
    Table(TableArgs),
    /// Run an invariant suite; exits 1 on the first violation.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
struct ConstructArgs {
    /// Root channel: bsc:<p>, bec:<e> or file:<path> (CSV with columns p,x).
    #[arg(long)]
    channel: ChannelSpec,
    /// Depth of the tree; the block length is 2^n.
    #[arg(long)]
    n: u32,
    /// Largest number of masses kept per node.
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = Mode::Degrade)]
    mode: Mode,
    /// Degrading quantizer; upgrade mode always splits.
    #[arg(long, default_value_t = Degrader::Merge)]
    quantizer: Degrader,
    #[arg(long, default_value_t = Kernel::Bhattacharyya)]
    kernel: Kernel,
    /// Largest total leaf error allowed on the information set.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: f64,
    /// Replace a node by an erasure channel once its Z drops below this.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = IndexOrder::Natural)]
    order: IndexOrder,
    /// Leaf quantity summed against the budget.
    #[arg(long, default_value_t = Reliability::ErrorProbability)]
    metric: Reliability,
    /// Directory for design.json, manifest.json and, with --leaves, leaves.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-leaf dump.
    #[arg(long, requires = "out")]
    leaves: bool,
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Which sweep: 1 (k at n = 15), 2 (n at k = 16), 3 (n = 21..25).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    which: u32,
    #[arg(long, value_enum, default_value_t = ScaleArg::Full)]
    scale: ScaleArg,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: f64,
    /// Directory for table<which>.csv and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Full,
    Ci,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Full => Scale::Full,
            ScaleArg::Ci => Scale::Ci,
        }
    }
}

#[derive(Debug, Serialize)]
struct DesignOutput<'a> {
    n: u32,
    k: usize,
    mode: Mode,
    quantizer: Degrader,
    kernel: Kernel,
    budget: f64,
    metric: Reliability,
    delta: Option<f64>,
    order: IndexOrder,
    rate: f64,
    z_sum: f64,
    pe_sum: f64,
    info_set: &'a [usize],
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Construct(args) => construct(args),
        Command::Table(args) => table(args),
        Command::Diagnose(args) => diagnose::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.report(),
    }
}

fn construct(args: ConstructArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let w0 = args.channel.load()?;
    let cfg = ConstructionConfig {
        n: args.n,
        k: args.k,
        mode: args.mode,
        degrader: args.quantizer,
        kernel: args.kernel,
        delta: args.delta,
        index_order: args.order,
    };
    let leaves = evolve(&w0, &cfg)?;
    let design = select_by_error_budget(&leaves, args.budget, args.metric)?;
    println!("{:.4}", design.rate);

    let Some(dir) = args.out else {
        return Ok(());
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut outputs = vec![dir.join("design.json")];
    let body = DesignOutput {
        n: cfg.n,
        k: cfg.k,
        mode: cfg.mode,
        quantizer: cfg.degrader,
        kernel: cfg.kernel,
        budget: args.budget,
        metric: args.metric,
        delta: cfg.delta,
        order: cfg.index_order,
        rate: design.rate,
        z_sum: design.z_sum,
        pe_sum: design.pe_sum,
        info_set: &design.info_set,
    };
    write_json(&outputs[0], &body)?;
    if args.leaves {
        let path = dir.join("leaves.csv");
        write_leaves(&path, &leaves)?;
        outputs.push(path);
    }
    let config = serde_json::json!({
        "construction": cfg,
        "budget": args.budget,
        "metric": args.metric,
    });
    let manifest = RunManifest::new(
        "construct",
        &config,
        args.channel.to_string(),
        started,
        outputs,
    );
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn table(args: TableArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let which = Table::from_number(args.which)?;
    let scale = Scale::from(args.scale);
    which
        .check_scale(scale)
        .map_err(|e| Failure::refused(anyhow!(e)))?;
    let rows = tables::run_table(which, scale, args.budget)?;
    let csv = tables::format_csv(which, &rows);
    print!("{csv}");

    if let Some(dir) = args.out {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("table{}.csv", args.which));
        fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
        let config = serde_json::json!({
            "which": args.which,
            "scale": scale,
            "budget": args.budget,
            "points": which.points(),
        });
        let manifest = RunManifest::new(
            "table",
            &config,
            tables::reference_channel().to_string(),
            started,
            vec![path],
        );
        write_json(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut file =
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

fn write_leaves(path: &Path, leaves: &[LeafReport]) -> anyhow::Result<()> {
    let mut out =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    out.write_record(["index", "Z", "I"])?;
    for leaf in leaves {
        out.write_record([
            leaf.index.to_string(),
            leaf.z.to_string(),
            leaf.i.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
