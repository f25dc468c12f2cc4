//! Polarization-tree evolution with per-node quantization, and selection of
//! the information set from the leaf statistics.
//!
//! Every node is first reduced to at most `k` masses (degrading or
//! upgrading, depending on [`Mode`]), optionally replaced by an erasure
//! channel once it is good enough, and then split into its minus (left) and
//! plus (right) children. The traversal is depth-first, so only one
//! quantized distribution per level is alive at any time.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::channel::{Kernel, MassDistribution};
use crate::error::{Error, Result};
use crate::polar::{minus, plus};
use crate::quantize::Algorithm;
use crate::sum::NeumaierSum;

/// Leaf Bhattacharyya values below this are reported as zero.
pub const Z_FLOOR: f64 = 1e-300;

/// Depth above which sibling subtrees keep separate level accumulators;
/// it also bounds where subtrees may be handed to other threads.
const SPLIT_DEPTH: u32 = 6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Pessimistic construction: every node is degraded.
    #[default]
    Degrade,
    /// Optimistic construction: every node is upgraded.
    Upgrade,
}

/// Quantizer used in degrade mode. Upgrade mode always splits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Degrader {
    Transport,
    #[default]
    Merge,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexOrder {
    /// Tree order: minus child first.
    #[default]
    Natural,
    BitReversed,
}

macro_rules! impl_keyword {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        "unknown {} `{other}`", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

impl_keyword!(Mode { Degrade => "degrade", Upgrade => "upgrade" });
impl_keyword!(Degrader { Transport => "transport", Merge => "merge" });
impl_keyword!(IndexOrder { Natural => "natural", BitReversed => "bit-reversed" });
impl_keyword!(Reliability { Bhattacharyya => "bhattacharyya", ErrorProbability => "error-probability" });

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstructionConfig {
    /// Tree depth; the block length is `2^n`.
    pub n: u32,
    /// Maximum number of masses kept per node.
    pub k: usize,
    pub mode: Mode,
    pub degrader: Degrader,
    pub kernel: Kernel,
    /// Replace a node by `BEC(Z)` once `Z < delta`.
    pub delta: Option<f64>,
    pub index_order: IndexOrder,
}

impl ConstructionConfig {
    pub fn new(n: u32, k: usize, mode: Mode) -> Self {
        Self {
            n,
            k,
            mode,
            degrader: Degrader::default(),
            kernel: Kernel::default(),
            delta: None,
            index_order: IndexOrder::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n > 40 {
            return Err(Error::InvalidConfig(format!("n = {} is too large", self.n)));
        }
        let min_k = match self.mode {
            Mode::Degrade => 1,
            Mode::Upgrade => 2,
        };
        if self.k < min_k {
            return Err(Error::InvalidConfig(format!(
                "{} mode needs k >= {min_k}, got {}",
                self.mode, self.k
            )));
        }
        if let Some(delta) = self.delta {
            if !(0.0..=1.0).contains(&delta) {
                return Err(Error::InvalidConfig(format!(
                    "delta = {delta} is outside [0, 1]"
                )));
            }
            if self.mode == Mode::Upgrade {
                // BEC(Z) is degraded with respect to the node, not upgraded.
                return Err(Error::InvalidConfig(
                    "erasure relaxation only applies in degrade mode".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Algorithm {
        match (self.mode, self.degrader) {
            (Mode::Upgrade, _) => Algorithm::Split,
            (Mode::Degrade, Degrader::Merge) => Algorithm::Merge,
            (Mode::Degrade, Degrader::Transport) => Algorithm::Transport,
        }
    }

    pub fn block_length(&self) -> usize {
        1usize << self.n
    }
}

/// Statistics of one synthetic channel at the bottom of the tree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LeafReport {
    pub index: usize,
    pub z: f64,
    pub i: f64,
    /// Bit-error probability of the ML decision, `E[x]`.
    pub pe: f64,
}

impl LeafReport {
    pub fn reliability(&self, metric: Reliability) -> f64 {
        match metric {
            Reliability::Bhattacharyya => self.z,
            Reliability::ErrorProbability => self.pe,
        }
    }
}

/// Per-leaf quantity the selection rules rank by and sum against a budget.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reliability {
    Bhattacharyya,
    /// The achievable-rate tables are computed with this metric.
    #[default]
    ErrorProbability,
}

/// A chosen information set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodeDesign {
    /// Sorted, unique leaf indices.
    pub info_set: Vec<usize>,
    pub rate: f64,
    pub metric: Reliability,
    /// Sum of the Bhattacharyya parameters over `info_set`; upper-bounds the
    /// block error probability under successive cancellation decoding.
    pub z_sum: f64,
    /// Sum of the leaf bit-error probabilities over `info_set`.
    pub pe_sum: f64,
    pub budget: Option<f64>,
}

impl CodeDesign {
    /// The sum that was held against the budget.
    pub fn metric_sum(&self) -> f64 {
        match self.metric {
            Reliability::Bhattacharyya => self.z_sum,
            Reliability::ErrorProbability => self.pe_sum,
        }
    }
}

/// Per-level sums recorded while evolving, used by [`conservation_audit`].
#[derive(Clone, Copy, Debug, Default)]
struct LevelAccum {
    nodes: usize,
    info_before: NeumaierSum,
    info_after: NeumaierSum,
    kernel_loss: NeumaierSum,
    info_loss: NeumaierSum,
}

impl LevelAccum {
    fn merge(&mut self, other: &LevelAccum) {
        self.nodes += other.nodes;
        self.info_before.merge(&other.info_before);
        self.info_after.merge(&other.info_after);
        self.kernel_loss.merge(&other.kernel_loss);
        self.info_loss.merge(&other.info_loss);
    }
}

/// Totals for all nodes at one depth.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LevelStats {
    pub depth: u32,
    pub nodes: usize,
    /// `sum I` over the nodes as produced by the parent transforms.
    pub info_before: f64,
    /// `sum I` after quantization (and erasure relaxation).
    pub info_after: f64,
    /// `sum (I_before - I_after)`, accumulated node by node.
    pub info_loss: f64,
    /// Sum of the quantizers' reported kernel losses.
    pub kernel_loss: f64,
}

/// Result of [`evolve_audited`].
#[derive(Clone, Debug)]
pub struct AuditedRun {
    pub config: ConstructionConfig,
    pub root_info: f64,
    pub leaves: Vec<LeafReport>,
    pub levels: Vec<LevelStats>,
}

struct Evolver {
    cfg: ConstructionConfig,
    algorithm: Algorithm,
    track: bool,
    parallel: bool,
}

impl Evolver {
    fn new(cfg: &ConstructionConfig, track: bool) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            algorithm: cfg.algorithm(),
            track,
            parallel: rayon::current_num_threads() > 1,
        })
    }

    fn run(&self, w0: &MassDistribution) -> Result<(Vec<LeafReport>, Vec<LevelAccum>)> {
        let mut leaves = vec![
            LeafReport {
                index: 0,
                z: 0.0,
                i: 0.0,
                pe: 0.0,
            };
            self.cfg.block_length()
        ];
        let mut levels = vec![LevelAccum::default(); self.depth_slots()];
        self.node(w0.clone(), 0, 0, &mut leaves, &mut levels)?;
        if self.cfg.index_order == IndexOrder::BitReversed {
            leaves = remap_bit_reversed(leaves, self.cfg.n);
        }
        Ok((leaves, levels))
    }

    fn depth_slots(&self) -> usize {
        if self.track {
            self.cfg.n as usize + 1
        } else {
            0
        }
    }

    fn node(
        &self,
        w: MassDistribution,
        depth: u32,
        offset: usize,
        out: &mut [LeafReport],
        levels: &mut [LevelAccum],
    ) -> Result<()> {
        let (q, report) = self.algorithm.run(&w, self.cfg.k, self.cfg.kernel)?;
        let q = match self.cfg.delta {
            Some(delta) => bec_relax(q, delta),
            None => q,
        };
        if self.track {
            let before = w.mutual_info();
            let after = q.mutual_info();
            let acc = &mut levels[depth as usize];
            acc.nodes += 1;
            acc.info_before.add(before);
            acc.info_after.add(after);
            acc.info_loss.add(before - after);
            acc.kernel_loss.add(report.cumulative_loss);
        }
        drop(w);

        if depth == self.cfg.n {
            let z = q.bhattacharyya();
            out[0] = LeafReport {
                index: offset,
                z: if z < Z_FLOOR { 0.0 } else { z },
                i: q.mutual_info(),
                pe: q.mean_crossover(),
            };
            return Ok(());
        }

        let half = out.len() / 2;
        let (left_out, right_out) = out.split_at_mut(half);
        if depth < SPLIT_DEPTH {
            let mut right_levels = vec![LevelAccum::default(); levels.len()];
            let (left, right) = (minus(&q), plus(&q));
            drop(q);
            let go_left = || self.node(left, depth + 1, offset, left_out, levels);
            let go_right = || {
                self.node(
                    right,
                    depth + 1,
                    offset + half,
                    right_out,
                    &mut right_levels,
                )
            };
            let (a, b) = if self.parallel {
                rayon::join(go_left, go_right)
            } else {
                (go_left(), go_right())
            };
            a?;
            b?;
            for (acc, other) in levels.iter_mut().zip(&right_levels) {
                acc.merge(other);
            }
        } else {
            self.node(minus(&q), depth + 1, offset, left_out, levels)?;
            let right = plus(&q);
            drop(q);
            self.node(right, depth + 1, offset + half, right_out, levels)?;
        }
        Ok(())
    }
}

/// Evolves `w0` down `cfg.n` levels and reports the `2^n` leaves, ordered by
/// their index under `cfg.index_order`.
pub fn evolve(w0: &MassDistribution, cfg: &ConstructionConfig) -> Result<Vec<LeafReport>> {
    Ok(Evolver::new(cfg, false)?.run(w0)?.0)
}

/// Like [`evolve`], additionally recording per-level information totals.
pub fn evolve_audited(w0: &MassDistribution, cfg: &ConstructionConfig) -> Result<AuditedRun> {
    let (leaves, levels) = Evolver::new(cfg, true)?.run(w0)?;
    let levels = levels
        .iter()
        .enumerate()
        .map(|(depth, acc)| LevelStats {
            depth: depth as u32,
            nodes: acc.nodes,
            info_before: acc.info_before.value(),
            info_after: acc.info_after.value(),
            info_loss: acc.info_loss.value(),
            kernel_loss: acc.kernel_loss.value(),
        })
        .collect();
    Ok(AuditedRun {
        config: *cfg,
        root_info: w0.mutual_info(),
        leaves,
        levels,
    })
}

/// Replaces `w` by the erasure channel with the same Bhattacharyya parameter
/// once that parameter drops below `delta`.
pub fn bec_relax(w: MassDistribution, delta: f64) -> MassDistribution {
    let z = w.bhattacharyya();
    if z < delta {
        MassDistribution::from_bec(z).expect("Z lies in [0, 1]")
    } else {
        w
    }
}

/// Longest prefix of the leaves sorted by `metric` (ties by index) whose
/// metric sum stays within `budget`.
pub fn select_by_error_budget(
    leaves: &[LeafReport],
    budget: f64,
    metric: Reliability,
) -> Result<CodeDesign> {
    if budget.is_nan() || budget <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "error budget must be positive, got {budget}"
        )));
    }
    // A leaf whose own value exceeds the budget can never be in the prefix.
    let mut candidates: Vec<&LeafReport> = leaves
        .iter()
        .filter(|l| l.reliability(metric) <= budget)
        .collect();
    sort_by_reliability(&mut candidates, metric);
    let mut total = 0.0;
    let mut chosen = Vec::new();
    for leaf in candidates {
        let next = total + leaf.reliability(metric);
        if next > budget {
            break;
        }
        total = next;
        chosen.push(leaf);
    }
    Ok(design(&chosen, leaves.len(), metric, Some(budget)))
}

/// The `floor(N * rate)` leaves with the smallest `metric`.
pub fn select_by_rate(leaves: &[LeafReport], rate: f64, metric: Reliability) -> Result<CodeDesign> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "rate {rate} is outside [0, 1]"
        )));
    }
    let count = ((leaves.len() as f64) * rate).floor() as usize;
    let mut sorted: Vec<&LeafReport> = leaves.iter().collect();
    sort_by_reliability(&mut sorted, metric);
    sorted.truncate(count);
    Ok(design(&sorted, leaves.len(), metric, None))
}

fn sort_by_reliability(leaves: &mut [&LeafReport], metric: Reliability) {
    leaves.sort_unstable_by(|a, b| {
        a.reliability(metric)
            .total_cmp(&b.reliability(metric))
            .then(a.index.cmp(&b.index))
    });
}

fn design(
    chosen: &[&LeafReport],
    block_length: usize,
    metric: Reliability,
    budget: Option<f64>,
) -> CodeDesign {
    let z_sum = chosen.iter().map(|l| l.z).sum();
    let pe_sum = chosen.iter().map(|l| l.pe).sum();
    let mut info_set: Vec<usize> = chosen.iter().map(|l| l.index).collect();
    info_set.sort_unstable();
    let rate = if block_length == 0 {
        0.0
    } else {
        info_set.len() as f64 / block_length as f64
    };
    CodeDesign {
        info_set,
        rate,
        metric,
        z_sum,
        pe_sum,
        budget,
    }
}

/// Fraction of leaves whose mutual information exceeds `threshold`.
pub fn good_fraction(leaves: &[LeafReport], threshold: f64) -> f64 {
    if leaves.is_empty() {
        return 0.0;
    }
    leaves.iter().filter(|l| l.i > threshold).count() as f64 / leaves.len() as f64
}

/// Reverses the low `n` bits of `i`.
#[inline]
pub fn bit_reverse(i: usize, n: u32) -> usize {
    if n == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - n)
    }
}

/// The bit-reversal permutation of `0..2^n`.
pub fn bit_reverse_indices(n: u32) -> Vec<usize> {
    (0..1usize << n).map(|i| bit_reverse(i, n)).collect()
}

fn remap_bit_reversed(leaves: Vec<LeafReport>, n: u32) -> Vec<LeafReport> {
    let mut out = leaves.clone();
    for leaf in leaves {
        let j = bit_reverse(leaf.index, n);
        out[j] = LeafReport { index: j, ..leaf };
    }
    out
}

/// Number of threads sibling subtrees may be spread over.
pub fn worker_threads() -> usize {
    rayon::current_num_threads()
}

/// Information bookkeeping at one depth of an audited run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LevelDeficit {
    pub depth: u32,
    /// `2^d I(W) - sum I` over the quantized nodes at depth `d`.
    pub measured: f64,
    /// `sum_{j <= d} 2^(d - j) L_j` from the per-node information losses.
    pub accounted: f64,
    /// `measured / 2^d`: the average deficit per synthetic channel.
    pub per_channel: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConservationAudit {
    pub mode: Mode,
    pub rows: Vec<LevelDeficit>,
}

impl ConservationAudit {
    /// Measured and accounted deficits agree to `tol` per channel.
    pub fn is_consistent(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| (r.measured - r.accounted).abs() <= tol * (1u64 << r.depth) as f64)
    }

    /// Per-channel deficit never shrinks with depth (grows in magnitude for
    /// upgrade runs, where it is negative).
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.rows.windows(2).all(|w| match self.mode {
            Mode::Degrade => w[1].per_channel >= w[0].per_channel - tol,
            Mode::Upgrade => w[1].per_channel <= w[0].per_channel + tol,
        })
    }

    pub fn final_deficit(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.per_channel)
    }
}

/// Checks the chain rule `I(W-) + I(W+) = 2 I(W)` through an audited run:
/// whatever information is missing at depth `d` must be exactly the
/// quantization losses of the ancestors, each doubled once per level.
pub fn conservation_audit(run: &AuditedRun) -> ConservationAudit {
    let mut rows = Vec::with_capacity(run.levels.len());
    let mut accounted = 0.0;
    for level in &run.levels {
        let scale = (1u64 << level.depth) as f64;
        accounted = if level.depth == 0 {
            level.info_loss
        } else {
            2.0 * accounted + level.info_loss
        };
        let measured = scale * run.root_info - level.info_after;
        rows.push(LevelDeficit {
            depth: level.depth,
            measured,
            accounted,
            per_channel: measured / scale,
        });
    }
    ConservationAudit {
        mode: run.config.mode,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::bsc_crossover_for_capacity;

    fn bsc(p: f64) -> MassDistribution {
        MassDistribution::from_bsc(p).unwrap()
    }

    fn bec(e: f64) -> MassDistribution {
        MassDistribution::from_bec(e).unwrap()
    }

    fn leaves_from_z(zs: &[f64]) -> Vec<LeafReport> {
        zs.iter()
            .enumerate()
            .map(|(index, &z)| LeafReport {
                index,
                z,
                i: 1.0 - z,
                pe: z * z,
            })
            .collect()
    }

    /// Erasure recursion `e- = 2e - e^2`, `e+ = e^2` in tree order.
    fn erasure_leaves(e: f64, n: u32) -> Vec<f64> {
        let mut level = vec![e];
        for _ in 0..n {
            level = level
                .iter()
                .flat_map(|&e| [2.0 * e - e * e, e * e])
                .collect();
        }
        level
    }

    #[test]
    fn config_validation() {
        assert!(ConstructionConfig::new(3, 1, Mode::Degrade)
            .validate()
            .is_ok());
        assert!(ConstructionConfig::new(3, 0, Mode::Degrade)
            .validate()
            .is_err());
        assert!(ConstructionConfig::new(3, 1, Mode::Upgrade)
            .validate()
            .is_err());
        let mut cfg = ConstructionConfig::new(3, 4, Mode::Degrade);
        cfg.delta = Some(1.5);
        assert!(cfg.validate().is_err());
        cfg.delta = Some(0.05);
        assert!(cfg.validate().is_ok());
        cfg.mode = Mode::Upgrade;
        assert!(cfg.validate().is_err());
        assert!(evolve(&bsc(0.1), &ConstructionConfig::new(2, 0, Mode::Degrade)).is_err());
    }

    #[test]
    fn keyword_parsing() {
        assert_eq!("upgrade".parse::<Mode>().unwrap(), Mode::Upgrade);
        assert_eq!(
            "Transport".parse::<Degrader>().unwrap(),
            Degrader::Transport
        );
        assert_eq!(
            "bit-reversed".parse::<IndexOrder>().unwrap(),
            IndexOrder::BitReversed
        );
        assert!("sideways".parse::<Mode>().is_err());
        assert_eq!(IndexOrder::BitReversed.to_string(), "bit-reversed");
    }

    #[test]
    fn depth_zero_is_the_quantized_root() {
        let w = MassDistribution::canonicalize([(0.2, 0.01), (0.3, 0.1), (0.5, 0.3)]).unwrap();
        let leaves = evolve(&w, &ConstructionConfig::new(0, 2, Mode::Degrade)).unwrap();
        let (q, _) = crate::quantize::merge_degrade(&w, 2, Kernel::Bhattacharyya).unwrap();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].z, q.bhattacharyya());
        assert_eq!(leaves[0].i, q.mutual_info());
    }

    #[test]
    fn erasure_root_is_exact_at_any_k() {
        for mode in [Mode::Degrade, Mode::Upgrade] {
            for k in [2, 3, 16] {
                let leaves = evolve(&bec(0.3), &ConstructionConfig::new(1, k, mode)).unwrap();
                assert!((leaves[0].z - 0.51).abs() < 1e-15);
                assert!((leaves[1].z - 0.09).abs() < 1e-15);

                let leaves = evolve(&bec(0.3), &ConstructionConfig::new(6, k, mode)).unwrap();
                for (leaf, e) in leaves.iter().zip(erasure_leaves(0.3, 6)) {
                    assert!((leaf.z - e).abs() < 1e-14);
                    assert!((leaf.i - (1.0 - e)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn leaves_are_in_tree_order() {
        let w = bsc(0.11);
        let leaves = evolve(&w, &ConstructionConfig::new(1, 16, Mode::Degrade)).unwrap();
        assert_eq!(leaves[0].index, 0);
        assert!((leaves[0].z - minus(&w).bhattacharyya()).abs() < 1e-15);
        assert!((leaves[1].z - plus(&w).bhattacharyya()).abs() < 1e-15);
    }

    #[test]
    fn bit_reversed_order_permutes_leaves() {
        let w = bsc(0.2);
        let mut cfg = ConstructionConfig::new(4, 8, Mode::Degrade);
        let natural = evolve(&w, &cfg).unwrap();
        cfg.index_order = IndexOrder::BitReversed;
        let reversed = evolve(&w, &cfg).unwrap();
        for (j, leaf) in reversed.iter().enumerate() {
            assert_eq!(leaf.index, j);
            let source = natural[bit_reverse(j, 4)];
            assert_eq!((leaf.z, leaf.i), (source.z, source.i));
        }
    }

    #[test]
    fn bec_relax_examples() {
        let w = MassDistribution::canonicalize([(0.9999, 0.0), (0.0001, 0.25)]).unwrap();
        let z = w.bhattacharyya();
        let relaxed = bec_relax(w.clone(), 0.05);
        assert!(relaxed.is_bec());
        assert!((relaxed.bhattacharyya() - z).abs() < 1e-15);
        assert!(relaxed.mutual_info() <= w.mutual_info());

        let w = bsc(0.01);
        let z = w.bhattacharyya();
        assert!((z - 0.198997).abs() < 1e-6);
        assert_eq!(bec_relax(w.clone(), 0.05), w);
        let relaxed = bec_relax(w, 0.5);
        assert_eq!(relaxed.entries().len(), 2);
        assert!((relaxed.entries()[1].p - z).abs() < 1e-15);
    }

    #[test]
    fn bec_relax_children_dominate() {
        for &(p, x1, x2) in &[(0.3, 0.001, 0.02), (0.6, 0.0005, 0.004), (0.9, 0.0, 0.01)] {
            let w = MassDistribution::canonicalize([(p, x1), (1.0 - p, x2)]).unwrap();
            let z = w.bhattacharyya();
            let b = bec_relax(w.clone(), 1.0);
            assert!(minus(&b).bhattacharyya() >= minus(&w).bhattacharyya() - 1e-15);
            assert!((minus(&b).bhattacharyya() - (2.0 * z - z * z)).abs() < 1e-14);
            assert!((plus(&b).bhattacharyya() - plus(&w).bhattacharyya()).abs() < 1e-14);
        }
    }

    #[test]
    fn full_relaxation_follows_the_erasure_recursion() {
        let w = bsc(0.11);
        let z = w.bhattacharyya();
        let mut cfg = ConstructionConfig::new(5, 16, Mode::Degrade);
        cfg.delta = Some(1.0);
        let leaves = evolve(&w, &cfg).unwrap();
        for (leaf, e) in leaves.iter().zip(erasure_leaves(z, 5)) {
            assert!((leaf.z - e).abs() < 1e-14, "{leaf:?} vs {e}");
        }
    }

    #[test]
    fn budget_selection_examples() {
        let leaves = leaves_from_z(&[0.1, 2e-4, 3e-4, 6e-4]);
        let d = select_by_error_budget(&leaves, 1e-3, Reliability::Bhattacharyya).unwrap();
        assert_eq!(d.info_set, vec![1, 2]);
        assert_eq!(d.rate, 0.5);
        assert!((d.z_sum - 5e-4).abs() < 1e-18);
        assert_eq!(d.budget, Some(1e-3));

        let leaves = leaves_from_z(&[0.1, 0.2, 0.5]);
        let d = select_by_error_budget(&leaves, 1e-3, Reliability::Bhattacharyya).unwrap();
        assert!(d.info_set.is_empty());
        assert_eq!(d.rate, 0.0);
        assert!(select_by_error_budget(&leaves, 0.0, Reliability::Bhattacharyya).is_err());
    }

    #[test]
    fn budget_ties_prefer_lower_index() {
        let leaves = leaves_from_z(&[4e-4, 4e-4, 4e-4, 1.0]);
        let d = select_by_error_budget(&leaves, 1e-3, Reliability::Bhattacharyya).unwrap();
        assert_eq!(d.info_set, vec![0, 1]);
    }

    #[test]
    fn error_probability_metric() {
        // pe = z^2 here, so the budget admits more leaves.
        let leaves = leaves_from_z(&[0.1, 2e-2, 3e-2, 6e-4]);
        let d = select_by_error_budget(&leaves, 1e-3, Reliability::ErrorProbability).unwrap();
        assert_eq!(d.info_set, vec![1, 3]);
        assert_eq!(d.metric, Reliability::ErrorProbability);
        assert!((d.pe_sum - (4e-4 + 3.6e-7)).abs() < 1e-18);
        assert!((d.z_sum - 0.0206).abs() < 1e-15);
        assert_eq!(d.metric_sum(), d.pe_sum);
        assert_eq!(
            "error-probability".parse::<Reliability>().unwrap(),
            Reliability::ErrorProbability
        );
    }

    #[test]
    fn rate_selection_examples() {
        let leaves = leaves_from_z(&[0.9, 0.1, 0.5, 0.2]);
        assert!(select_by_rate(&leaves, 0.0, Reliability::Bhattacharyya)
            .unwrap()
            .info_set
            .is_empty());
        assert_eq!(
            select_by_rate(&leaves, 1.0, Reliability::Bhattacharyya)
                .unwrap()
                .info_set,
            vec![0, 1, 2, 3]
        );
        let d = select_by_rate(&leaves, 0.5, Reliability::Bhattacharyya).unwrap();
        assert_eq!(d.info_set, vec![1, 3]);
        assert!((d.z_sum - 0.3).abs() < 1e-15);
        assert!(select_by_rate(&leaves, 1.5, Reliability::Bhattacharyya).is_err());
    }

    #[test]
    fn good_fraction_examples() {
        let all_good: Vec<LeafReport> = (0..8)
            .map(|index| LeafReport {
                index,
                z: 0.0,
                i: 1.0,
                pe: 0.0,
            })
            .collect();
        assert_eq!(good_fraction(&all_good, 0.5), 1.0);

        let w = bsc(0.11);
        let leaves = evolve(&w, &ConstructionConfig::new(1, 16, Mode::Degrade)).unwrap();
        let (im, ip) = (minus(&w).mutual_info(), plus(&w).mutual_info());
        assert!(im < 0.5 && ip > 0.5, "{im} {ip}");
        assert_eq!(good_fraction(&leaves, 0.5), 0.5);

        let leaves = evolve(&bec(0.5), &ConstructionConfig::new(10, 2, Mode::Degrade)).unwrap();
        assert!((good_fraction(&leaves, 0.5) - 0.5).abs() <= 0.05);
    }

    #[test]
    fn bit_reversal() {
        assert_eq!(bit_reverse(3, 3), 6);
        assert_eq!(bit_reverse(0, 3), 0);
        assert_eq!(bit_reverse_indices(0), vec![0]);
        assert_eq!(bit_reverse_indices(2), vec![0, 2, 1, 3]);
        for n in 0..=10 {
            let perm = bit_reverse_indices(n);
            for (i, &j) in perm.iter().enumerate() {
                assert_eq!(perm[j], i);
            }
        }
    }

    #[test]
    fn audit_on_erasure_root_has_no_deficit() {
        let cfg = ConstructionConfig::new(8, 16, Mode::Degrade);
        let run = evolve_audited(&bec(0.4), &cfg).unwrap();
        let audit = conservation_audit(&run);
        assert_eq!(audit.rows.len(), 9);
        for row in &audit.rows {
            assert!(row.accounted == 0.0, "{row:?}");
            assert!(row.per_channel.abs() < 1e-12, "{row:?}");
        }
        assert!(audit.is_consistent(1e-12));
    }

    #[test]
    fn audit_without_reduction_has_no_deficit() {
        // n = 2 from a BSC never exceeds 64 masses.
        let run =
            evolve_audited(&bsc(0.2), &ConstructionConfig::new(2, 64, Mode::Degrade)).unwrap();
        let audit = conservation_audit(&run);
        assert!(audit
            .rows
            .iter()
            .all(|r| r.accounted == 0.0 && r.per_channel.abs() < 1e-12));
    }

    #[test]
    fn audit_tracks_quantization_losses() {
        let w = bsc(bsc_crossover_for_capacity(0.5).unwrap());
        let coarse = conservation_audit(
            &evolve_audited(&w, &ConstructionConfig::new(10, 8, Mode::Degrade)).unwrap(),
        );
        let fine = conservation_audit(
            &evolve_audited(&w, &ConstructionConfig::new(10, 32, Mode::Degrade)).unwrap(),
        );
        for audit in [&coarse, &fine] {
            assert!(audit.is_consistent(1e-9), "{audit:?}");
            assert!(audit.is_monotone(1e-12), "{audit:?}");
        }
        for (a, b) in fine.rows.iter().zip(&coarse.rows) {
            assert!(a.per_channel <= b.per_channel + 1e-12, "{a:?} {b:?}");
        }
        assert!(coarse.final_deficit() > 0.0);

        let up = conservation_audit(
            &evolve_audited(&w, &ConstructionConfig::new(10, 8, Mode::Upgrade)).unwrap(),
        );
        assert!(up.is_consistent(1e-9) && up.is_monotone(1e-12));
        assert!(up.final_deficit() < 0.0);
    }

    #[test]
    fn audited_and_plain_runs_agree() {
        let w = bsc(0.15);
        let cfg = ConstructionConfig::new(7, 8, Mode::Upgrade);
        assert_eq!(
            evolve(&w, &cfg).unwrap(),
            evolve_audited(&w, &cfg).unwrap().leaves
        );
    }

    #[test]
    fn degrade_rate_never_exceeds_upgrade_rate() {
        let w = bsc(bsc_crossover_for_capacity(0.5).unwrap());
        for k in [2, 4, 8] {
            let d = evolve(&w, &ConstructionConfig::new(10, k, Mode::Degrade)).unwrap();
            let u = evolve(&w, &ConstructionConfig::new(10, k, Mode::Upgrade)).unwrap();
            for (a, b) in d.iter().zip(&u) {
                assert!(a.z >= b.z - 1e-12 && a.i <= b.i + 1e-12 && a.pe >= b.pe - 1e-15);
            }
            for metric in [Reliability::Bhattacharyya, Reliability::ErrorProbability] {
                let rd = select_by_error_budget(&d, 1e-3, metric).unwrap().rate;
                let ru = select_by_error_budget(&u, 1e-3, metric).unwrap().rate;
                assert!(rd <= ru, "k = {k}: {rd} > {ru}");
            }
        }
    }
}
