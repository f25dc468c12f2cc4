//! Ground truth that does not go through the mixture machinery.
//!
//! * [`ExplicitChannel`] keeps a literal transition matrix and applies the
//!   minus/plus combining rules over product alphabets without merging any
//!   output symbols.
//! * [`exact_evolve`] runs the mixture transforms without quantization, for
//!   the shallow trees where that is still affordable.
//! * [`monte_carlo_z`] estimates `Z` by simulating the channel.

use std::ops::RangeInclusive;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{Kernel, MassDistribution};
use crate::construct::{evolve, ConstructionConfig, Mode};
use crate::error::{Error, Result};
use crate::polar::transform_pair;
use crate::sum::NeumaierSum;

/// Largest output alphabet a raw transform may produce.
pub const MAX_OUTPUTS: usize = 1 << 16;

/// Largest depth [`exact_evolve`] accepts.
pub const MAX_EXACT_DEPTH: u32 = 5;

/// Largest projected mass count [`exact_evolve`] will build at one node.
pub const MAX_EXACT_MASSES: usize = 1_000_000;

pub const DEFAULT_SEED: u64 = 0x005e_ed0f_c0de;

const ROW_TOL: f64 = 1e-9;

/// Binary-input channel over a finite alphabet.
///
/// `outputs[y] = (P(y|0), P(y|1))` and `pairing[y]` is the symmetric
/// partner `ȳ` with `P(y|0) = P(ȳ|1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplicitChannel {
    outputs: Vec<(f64, f64)>,
    pairing: Vec<usize>,
}

impl ExplicitChannel {
    pub fn new(outputs: Vec<(f64, f64)>, pairing: Vec<usize>) -> Result<Self> {
        let bad = |reason: String| Err(Error::InvalidDistribution(reason));
        if outputs.is_empty() || outputs.len() != pairing.len() {
            return bad(format!(
                "{} outputs with {} pairing entries",
                outputs.len(),
                pairing.len()
            ));
        }
        if outputs.len() > MAX_OUTPUTS {
            return Err(Error::AlphabetOverflow {
                size: outputs.len(),
                cap: MAX_OUTPUTS,
            });
        }
        if outputs
            .iter()
            .any(|&(a, b)| !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0))
        {
            return bad("transition probabilities must be finite and non-negative".into());
        }
        let row0: f64 = outputs.iter().map(|o| o.0).sum();
        let row1: f64 = outputs.iter().map(|o| o.1).sum();
        if (row0 - 1.0).abs() > ROW_TOL || (row1 - 1.0).abs() > ROW_TOL {
            return bad(format!("rows sum to {row0} and {row1}"));
        }
        for (y, &partner) in pairing.iter().enumerate() {
            if partner >= outputs.len() || pairing[partner] != y {
                return bad(format!("pairing is not an involution at output {y}"));
            }
            let (a, b) = (outputs[y], outputs[partner]);
            if (a.0 - b.1).abs() > ROW_TOL || (a.1 - b.0).abs() > ROW_TOL {
                return bad(format!("outputs {y} and {partner} are not symmetric"));
            }
        }
        Ok(Self { outputs, pairing })
    }

    /// The mixture written out with two outputs per component.
    pub fn from_mixture(w: &MassDistribution) -> Self {
        let mut outputs = Vec::with_capacity(2 * w.len());
        let mut pairing = Vec::with_capacity(2 * w.len());
        for m in w.entries() {
            let y = outputs.len();
            outputs.push((m.p * (1.0 - m.x), m.p * m.x));
            outputs.push((m.p * m.x, m.p * (1.0 - m.x)));
            pairing.extend([y + 1, y]);
        }
        Self { outputs, pairing }
    }

    pub fn bsc(x: f64) -> Result<Self> {
        Ok(Self::from_mixture(&MassDistribution::from_bsc(x)?))
    }

    /// Three outputs: `0`, erasure, `1`.
    pub fn bec(erasure: f64) -> Result<Self> {
        Self::new(
            vec![
                (1.0 - erasure, 0.0),
                (erasure, erasure),
                (0.0, 1.0 - erasure),
            ],
            vec![2, 1, 0],
        )
    }

    pub fn outputs(&self) -> &[(f64, f64)] {
        &self.outputs
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// `Z = sum_y sqrt(P(y|0) P(y|1))`.
    pub fn bhattacharyya(&self) -> f64 {
        self.outputs
            .iter()
            .map(|&(a, b)| (a * b).sqrt())
            .collect::<NeumaierSum>()
            .value()
    }

    /// Mutual information under uniform inputs, in bits.
    pub fn mutual_info(&self) -> f64 {
        let term = |p: f64, mean: f64| {
            if p > 0.0 {
                0.5 * p * (p / mean).log2()
            } else {
                0.0
            }
        };
        self.outputs
            .iter()
            .flat_map(|&(a, b)| {
                let mean = 0.5 * (a + b);
                [term(a, mean), term(b, mean)]
            })
            .collect::<NeumaierSum>()
            .value()
    }

    fn check_size(size: usize) -> Result<()> {
        if size > MAX_OUTPUTS {
            return Err(Error::AlphabetOverflow {
                size,
                cap: MAX_OUTPUTS,
            });
        }
        Ok(())
    }
}

/// `P⁻(y1, y2 | u1) = ½ Σ_{u2} P(y1 | u1 ⊕ u2) P(y2 | u2)`, with output
/// `(y1, y2)` at index `y1 * |Y| + y2`.
pub fn raw_minus(ch: &ExplicitChannel) -> Result<ExplicitChannel> {
    let n = ch.len();
    ExplicitChannel::check_size(n * n)?;
    let mut outputs = Vec::with_capacity(n * n);
    let mut pairing = Vec::with_capacity(n * n);
    for (y1, &(a0, a1)) in ch.outputs.iter().enumerate() {
        for (y2, &(b0, b1)) in ch.outputs.iter().enumerate() {
            outputs.push((0.5 * (a0 * b0 + a1 * b1), 0.5 * (a1 * b0 + a0 * b1)));
            pairing.push(ch.pairing[y1] * n + y2);
        }
    }
    Ok(ExplicitChannel { outputs, pairing })
}

/// `P⁺(y1, y2, u1 | u2) = ½ P(y1 | u1 ⊕ u2) P(y2 | u2)`, with output
/// `(y1, y2, u1)` at index `(u1 * |Y| + y1) * |Y| + y2`.
pub fn raw_plus(ch: &ExplicitChannel) -> Result<ExplicitChannel> {
    let n = ch.len();
    ExplicitChannel::check_size(2 * n * n)?;
    let mut outputs = Vec::with_capacity(2 * n * n);
    let mut pairing = Vec::with_capacity(2 * n * n);
    for u1 in 0..2 {
        for (y1, &(a0, a1)) in ch.outputs.iter().enumerate() {
            // P(y1 | u1 ⊕ u2) for u2 = 0 and u2 = 1.
            let (first0, first1) = if u1 == 0 { (a0, a1) } else { (a1, a0) };
            for (y2, &(b0, b1)) in ch.outputs.iter().enumerate() {
                outputs.push((0.5 * first0 * b0, 0.5 * first1 * b1));
                pairing.push((u1 * n + ch.pairing[y1]) * n + ch.pairing[y2]);
            }
        }
    }
    Ok(ExplicitChannel { outputs, pairing })
}

/// Leaf statistics of an unquantized evolution, in tree order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactLeaves {
    pub z: Vec<f64>,
    pub i: Vec<f64>,
}

/// Evolves `w0` to depth `n` with no alphabet reduction.
///
/// Refuses with [`Error::BlowupRefused`] as soon as a node would produce a
/// child with more than [`MAX_EXACT_MASSES`] masses.
pub fn exact_evolve(w0: &MassDistribution, n: u32) -> Result<ExactLeaves> {
    if n > MAX_EXACT_DEPTH {
        return Err(Error::DepthRefused {
            depth: n,
            max: MAX_EXACT_DEPTH,
        });
    }
    let mut out = ExactLeaves {
        z: Vec::with_capacity(1 << n),
        i: Vec::with_capacity(1 << n),
    };
    exact_node(w0, 0, n, &mut out)?;
    Ok(out)
}

fn exact_node(w: &MassDistribution, level: u32, n: u32, out: &mut ExactLeaves) -> Result<()> {
    if level == n {
        out.z
            .push(compensated(w, Kernel::Bhattacharyya).clamp(0.0, 1.0));
        out.i
            .push((1.0 - compensated(w, Kernel::Entropy)).clamp(0.0, 1.0));
        return Ok(());
    }
    let m = w.len();
    let projected = m * (m + 1);
    if projected > MAX_EXACT_MASSES {
        return Err(Error::BlowupRefused {
            level,
            projected,
            cap: MAX_EXACT_MASSES,
        });
    }
    let (minus, plus) = transform_pair(w);
    exact_node(&minus, level + 1, n, out)?;
    exact_node(&plus, level + 1, n, out)
}

fn compensated(w: &MassDistribution, kernel: Kernel) -> f64 {
    w.entries()
        .iter()
        .map(|m| m.p * kernel.eval(m.x))
        .collect::<NeumaierSum>()
        .value()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    /// Distance to `value` in standard errors. A zero-variance estimate is
    /// infinitely far from anything but itself.
    pub fn z_score(&self, value: f64) -> f64 {
        let gap = (self.mean - value).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.stderr
        }
    }
}

/// Simulates the channel under input `0`: picks a component, flips the bit
/// with its crossover, and averages the likelihood ratio root
/// `sqrt(P(y|1) / P(y|0))`, whose mean is `Z`.
pub fn monte_carlo_z(
    w: &MassDistribution,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one sample is needed".into(),
        ));
    }
    let e = w.entries();
    let pick = WeightedIndex::new(e.iter().map(|m| m.p))
        .map_err(|err| Error::InvalidDistribution(err.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = NeumaierSum::new();
    let mut sum_sq = NeumaierSum::new();
    for _ in 0..samples {
        let x = e[pick.sample(&mut rng)].x;
        let flipped = rng.gen::<f64>() < x;
        // Under input 0 an unflipped output has P(y|0) = 1 - x, P(y|1) = x.
        let ratio = if flipped {
            (1.0 - x) / x
        } else {
            x / (1.0 - x)
        };
        let v = ratio.sqrt();
        sum.add(v);
        sum_sq.add(v * v);
    }
    let count = samples as f64;
    let mean = sum.value() / count;
    let var = if samples > 1 {
        ((sum_sq.value() - count * mean * mean) / (count - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        stderr: (var / count).sqrt(),
        samples,
    })
}

/// Random mixture with `m` components: weights uniform in `(0, 1]` before
/// normalization, crossovers uniform in `[0, 1/2]`.
pub fn random_mixture(m: usize, rng: &mut impl Rng) -> MassDistribution {
    let raw: Vec<(f64, f64)> = (0..m.max(1))
        .map(|_| (1.0 - rng.gen::<f64>(), 0.5 * rng.gen::<f64>()))
        .collect();
    MassDistribution::canonicalize(raw).expect("sampled weights are positive")
}

/// `count` seeded random mixtures with component counts drawn uniformly
/// from `masses`.
pub fn random_family(
    count: usize,
    masses: RangeInclusive<usize>,
    seed: u64,
) -> Vec<MassDistribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.gen_range(masses.clone());
            random_mixture(m, &mut rng)
        })
        .collect()
}

/// Largest gap between mixture transforms and raw enumeration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RawAgreement {
    pub max_z_gap: f64,
    pub max_i_gap: f64,
}

impl RawAgreement {
    pub fn within(&self, tol: f64) -> bool {
        self.max_z_gap <= tol && self.max_i_gap <= tol
    }
}

/// Compares every node of depth `1..=depth` of the mixture tree against the
/// literal transforms of the explicit channel.
pub fn raw_agreement(w: &MassDistribution, depth: u32) -> Result<RawAgreement> {
    let mut gap = RawAgreement::default();
    let mut level = vec![(w.clone(), ExplicitChannel::from_mixture(w))];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(2 * level.len());
        for (d, ch) in &level {
            let (dm, dp) = transform_pair(d);
            next.push((dm, raw_minus(ch)?));
            next.push((dp, raw_plus(ch)?));
        }
        for (d, ch) in &next {
            gap.max_z_gap = gap
                .max_z_gap
                .max((d.bhattacharyya() - ch.bhattacharyya()).abs());
            gap.max_i_gap = gap
                .max_i_gap
                .max((d.mutual_info() - ch.mutual_info()).abs());
        }
        level = next;
    }
    Ok(gap)
}

/// A leaf where a quantized value lands on the wrong side of the exact one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichViolation {
    pub index: usize,
    pub z: [f64; 3],
    pub i: [f64; 3],
}

/// Leafwise comparison of degraded, exact and upgraded evolutions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichCheck {
    pub n: u32,
    pub k: usize,
    pub leaves: usize,
    /// Each entry holds `[degraded, exact, upgraded]`.
    pub violations: Vec<SandwichViolation>,
}

impl SandwichCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `Z_degrade >= Z_exact >= Z_upgrade` and
/// `I_degrade <= I_exact <= I_upgrade` on every leaf, up to `slack`.
pub fn sandwich_check(
    w0: &MassDistribution,
    n: u32,
    k: usize,
    kernel: Kernel,
    slack: f64,
) -> Result<SandwichCheck> {
    let exact = exact_evolve(w0, n)?;
    let run = |mode| {
        let mut cfg = ConstructionConfig::new(n, k, mode);
        cfg.kernel = kernel;
        evolve(w0, &cfg)
    };
    let degraded = run(Mode::Degrade)?;
    let upgraded = run(Mode::Upgrade)?;
    let mut violations = Vec::new();
    for (index, (d, u)) in degraded.iter().zip(&upgraded).enumerate() {
        let z = [d.z, exact.z[index], u.z];
        let i = [d.i, exact.i[index], u.i];
        let ordered = z[0] + slack >= z[1]
            && z[1] + slack >= z[2]
            && i[0] <= i[1] + slack
            && i[1] <= i[2] + slack;
        if !ordered {
            violations.push(SandwichViolation { index, z, i });
        }
    }
    Ok(SandwichCheck {
        n,
        k,
        leaves: degraded.len(),
        violations,
    })
}
