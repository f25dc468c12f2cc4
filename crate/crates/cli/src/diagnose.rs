use clap::{Args, ValueEnum};
use polarq_core::construct::{conservation_audit, evolve_audited};
use polarq_core::oracle::{self, monte_carlo_z, random_family, raw_agreement, sandwich_check};
use polarq_core::quantize::{decay_diagnostic, step_cost_bound_check, Algorithm};
use polarq_core::{ChannelSpec, ConstructionConfig, Kernel, MassDistribution, Mode};
use serde_json::json;

use crate::failure::Failure;

const DECAY_KS: [usize; 5] = [8, 16, 32, 64, 128];
const RAW_DEPTH: u32 = 2;
const EXACT_TOL: f64 = 1e-10;
const CONSERVATION_TOL: f64 = 1e-9;
const MONTE_CARLO_SIGMAS: f64 = 4.0;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Suite {
    /// First-step transport cost against 1/m^2, and merge <= transport.
    StepBounds,
    /// Merge loss against k on wide random inputs.
    Decay,
    /// Information deficit per level against the quantization losses.
    Conservation,
    /// Degraded <= exact <= upgraded on every leaf.
    Sandwich,
    /// Mixture transforms against raw enumeration, and Monte-Carlo Z.
    Oracle,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Root channel for conservation and sandwich [default: bec:0.4 / bsc:0.3].
    #[arg(long)]
    channel: Option<ChannelSpec>,
    /// Tree depth [default: 8 for conservation, 4 for sandwich].
    #[arg(long)]
    n: Option<u32>,
    /// Masses kept per node [default: 16 for conservation, 4 for sandwich].
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = Mode::Degrade)]
    mode: Mode,
    #[arg(long, default_value_t = Kernel::Bhattacharyya)]
    kernel: Kernel,
    /// Random instances [default: 100, or 8 for decay].
    #[arg(long)]
    instances: Option<usize>,
    /// Components per random instance, an upper bound for the oracle suite
    /// [default: 32 step-bounds, 1024 decay, 4 oracle].
    #[arg(long)]
    masses: Option<usize>,
    #[arg(long, default_value_t = oracle::DEFAULT_SEED)]
    seed: u64,
    /// Monte-Carlo samples per channel.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

pub fn run(args: DiagnoseArgs) -> Result<(), Failure> {
    let report = match args.suite {
        Suite::StepBounds => step_bounds(&args)?,
        Suite::Decay => decay(&args)?,
        Suite::Conservation => conservation(&args)?,
        Suite::Sandwich => sandwich(&args)?,
        Suite::Oracle => oracle_suite(&args)?,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?
    );
    Ok(())
}

fn root(args: &DiagnoseArgs, default: &str) -> Result<MassDistribution, Failure> {
    let spec = match &args.channel {
        Some(spec) => spec.clone(),
        None => default.parse()?,
    };
    Ok(spec.load()?)
}

fn step_bounds(args: &DiagnoseArgs) -> Result<serde_json::Value, Failure> {
    let m = args.masses.unwrap_or(32);
    let count = args.instances.unwrap_or(100);
    let mut largest_ratio: f64 = 0.0;
    for (index, w) in random_family(count, m..=m, args.seed).iter().enumerate() {
        let check = step_cost_bound_check(w, args.kernel)?;
        if !check.within_stated_bound() || !check.merge_dominated() {
            return Err(Failure::violation(
                format!("step bound fails on instance {index}"),
                json!({ "instance": index, "masses": w.entries(), "check": check }),
            ));
        }
        largest_ratio = largest_ratio.max(check.min_transport_cost / check.stated_bound);
    }
    Ok(json!({
        "suite": "step-bounds",
        "instances": count,
        "masses": m,
        "largest_cost_over_bound": largest_ratio,
    }))
}

fn decay(args: &DiagnoseArgs) -> Result<serde_json::Value, Failure> {
    let m = args.masses.unwrap_or(1024);
    let family = random_family(args.instances.unwrap_or(8), m..=m, args.seed);
    let report = decay_diagnostic(&family, &DECAY_KS, Algorithm::Merge, args.kernel)?;
    // The slope bound is only claimed for the Bhattacharyya kernel.
    let slope_ok = args.kernel != Kernel::Bhattacharyya || report.slope.is_some_and(|s| s <= -1.0);
    if !report.is_monotone() || !slope_ok {
        return Err(Failure::violation(
            "merge loss does not decay as expected",
            json!({ "seed": args.seed, "masses": m, "report": report }),
        ));
    }
    Ok(json!({ "suite": "decay", "report": report }))
}

fn conservation(args: &DiagnoseArgs) -> Result<serde_json::Value, Failure> {
    let w0 = root(args, "bec:0.4")?;
    let mut cfg = ConstructionConfig::new(args.n.unwrap_or(8), args.k.unwrap_or(16), args.mode);
    cfg.kernel = args.kernel;
    let run = evolve_audited(&w0, &cfg)?;
    let audit = conservation_audit(&run);
    if !audit.is_consistent(CONSERVATION_TOL) || !audit.is_monotone(CONSERVATION_TOL) {
        return Err(Failure::violation(
            "information deficit does not match the quantization losses",
            json!({ "channel": w0.entries(), "config": cfg, "audit": audit }),
        ));
    }
    Ok(json!({
        "suite": "conservation",
        "final_deficit": audit.final_deficit(),
        "audit": audit,
    }))
}

fn sandwich(args: &DiagnoseArgs) -> Result<serde_json::Value, Failure> {
    let w0 = root(args, "bsc:0.3")?;
    let n = args.n.unwrap_or(4);
    let k = args.k.unwrap_or(4);
    let check = sandwich_check(&w0, n, k, args.kernel, EXACT_TOL)?;
    if !check.holds() {
        return Err(Failure::violation(
            "a quantized leaf lies on the wrong side of the exact one",
            json!({ "channel": w0.entries(), "check": check }),
        ));
    }
    Ok(json!({ "suite": "sandwich", "n": n, "k": k, "leaves": check.leaves }))
}

fn oracle_suite(args: &DiagnoseArgs) -> Result<serde_json::Value, Failure> {
    let m = args.masses.unwrap_or(4).max(1);
    let family = random_family(args.instances.unwrap_or(100), 1..=m, args.seed);
    let mut worst_gap: f64 = 0.0;
    let mut worst_sigmas: f64 = 0.0;
    for (index, w) in family.iter().enumerate() {
        let gap = raw_agreement(w, RAW_DEPTH)?;
        let estimate = monte_carlo_z(w, args.samples, args.seed.wrapping_add(index as u64))?;
        let sigmas = estimate.z_score(w.bhattacharyya());
        if !gap.within(EXACT_TOL) || sigmas > MONTE_CARLO_SIGMAS {
            return Err(Failure::violation(
                format!("oracle disagreement on instance {index}"),
                json!({ "instance": index, "masses": w.entries(), "gap": gap, "monte_carlo": estimate }),
            ));
        }
        worst_gap = worst_gap.max(gap.max_z_gap).max(gap.max_i_gap);
        worst_sigmas = worst_sigmas.max(sigmas);
    }
    Ok(json!({
        "suite": "oracle",
        "instances": family.len(),
        "largest_raw_gap": worst_gap,
        "largest_monte_carlo_sigmas": worst_sigmas,
    }))
}
