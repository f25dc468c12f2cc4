//! Binary memoryless symmetric channels as finite mixtures of BSCs.
//!
//! A discrete BMS channel is fully described by the law of the crossover
//! probability of the BSC it selects at random. [`MassDistribution`] keeps
//! that law as a sorted list of `(p, x)` masses with `x` folded into
//! `[0, 1/2]`; every other module in the crate works on this type.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two crossover positions are treated as one.
///
/// Positions `a <= b` are merged when `b - a <= DEDUP_TOL * b`.
pub const DEDUP_TOL: f64 = 1e-12;

/// A single BSC component: selected with probability `p`, crossover `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mass {
    pub p: f64,
    pub x: f64,
}

impl Mass {
    pub const fn new(p: f64, x: f64) -> Self {
        Self { p, x }
    }
}

/// Canonical BSC-mixture representation of a BMS channel.
///
/// Invariants: masses sum to one, every `p > 0`, crossovers lie in
/// `[0, 1/2]` and are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct MassDistribution {
    entries: Vec<Mass>,
}

impl MassDistribution {
    /// Builds a canonical distribution from arbitrary `(p, x)` pairs with
    /// `x` anywhere in `[0, 1]`.
    pub fn canonicalize<I>(raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut entries = Vec::new();
        let mut total = 0.0;
        for (p, x) in raw {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "mass {p} is not a non-negative number"
                )));
            }
            if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidDistribution(format!(
                    "crossover {x} is outside [0, 1]"
                )));
            }
            total += p;
            entries.push(Mass::new(p, x));
        }
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("no masses".into()));
        }
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("total mass is zero".into()));
        }
        Ok(Self::from_masses(entries))
    }

    /// Canonicalizes masses already known to be finite with `p >= 0`,
    /// `x` in `[0, 1]` and positive total.
    pub(crate) fn from_masses(mut entries: Vec<Mass>) -> Self {
        for m in entries.iter_mut() {
            m.x = fold(m.x);
        }
        entries.retain(|m| m.p > 0.0);
        // Folded crossovers are non-negative, so their bit patterns sort like the
        // values. The transforms emit long sorted runs, which a stable sort merges.
        entries.sort_by_key(|m| m.x.to_bits());

        let mut out: Vec<Mass> = Vec::with_capacity(entries.len());
        for m in entries {
            match out.last_mut() {
                Some(last) if m.x - last.x <= DEDUP_TOL * m.x => {
                    let p = last.p + m.p;
                    last.x = (last.x + m.p / p * (m.x - last.x)).clamp(last.x, m.x);
                    last.p = p;
                }
                _ => out.push(m),
            }
        }

        let total: f64 = out.iter().map(|m| m.p).sum();
        for m in out.iter_mut() {
            m.p /= total;
        }
        Self { entries: out }
    }

    /// Wraps entries that already satisfy every invariant.
    pub(crate) fn from_sorted_unchecked(entries: Vec<Mass>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].x < w[1].x));
        Self { entries }
    }

    /// Single BSC with crossover `p`, folded to `min(p, 1 - p)`.
    pub fn from_bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "BSC crossover {p} is outside [0, 1]"
            )));
        }
        Ok(Self {
            entries: vec![Mass::new(1.0, fold(p))],
        })
    }

    /// BEC(erasure) as the two-mass mixture `{(1 - e, 0), (e, 1/2)}`.
    pub fn from_bec(erasure: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&erasure) {
            return Err(Error::InvalidArgument(format!(
                "erasure probability {erasure} is outside [0, 1]"
            )));
        }
        let entries = [Mass::new(1.0 - erasure, 0.0), Mass::new(erasure, 0.5)]
            .into_iter()
            .filter(|m| m.p > 0.0)
            .collect();
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Mass] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Z(W) = E[2 sqrt(x(1-x))]`.
    pub fn bhattacharyya(&self) -> f64 {
        self.expectation(Kernel::Bhattacharyya).clamp(0.0, 1.0)
    }

    /// `I(W) = 1 - E[h(x)]`, in bits.
    pub fn mutual_info(&self) -> f64 {
        (1.0 - self.expectation(Kernel::Entropy)).clamp(0.0, 1.0)
    }

    pub fn mean_crossover(&self) -> f64 {
        self.entries.iter().map(|m| m.p * m.x).sum()
    }

    /// `E[f(x)]` under the mixture.
    pub fn expectation(&self, kernel: Kernel) -> f64 {
        self.entries.iter().map(|m| m.p * kernel.eval(m.x)).sum()
    }

    pub fn expectation_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.entries.iter().map(|m| m.p * f(m.x)).sum()
    }

    /// True when every mass sits at `x = 0` or `x = 1/2`.
    pub fn is_bec(&self) -> bool {
        self.entries.iter().all(|m| m.x == 0.0 || m.x == 0.5)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|m| m.p).sum()
    }
}

impl fmt::Display for MassDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, m) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({}, {})", m.p, m.x)?;
        }
        f.write_str("]")
    }
}

/// Folds a crossover into `[0, 1/2]` using channel symmetry.
#[inline]
pub fn fold(x: f64) -> f64 {
    clamp_crossover(if x > 0.5 { 1.0 - x } else { x })
}

#[inline]
pub(crate) fn clamp_crossover(x: f64) -> f64 {
    x.clamp(0.0, 0.5)
}

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
#[inline]
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Crossover `p` in `[0, 1/2]` of the BSC whose capacity `1 - h(p)` equals
/// `capacity`, found by bisection.
pub fn bsc_crossover_for_capacity(capacity: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&capacity) {
        return Err(Error::InvalidArgument(format!(
            "capacity {capacity} is outside [0, 1]"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    // 1 - h(p) is decreasing on [0, 1/2].
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if 1.0 - binary_entropy(mid) > capacity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The concave increasing function whose expectation the quantizers track.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `f(x) = 2 sqrt(x(1-x))`; expectation is the Bhattacharyya parameter.
    #[default]
    Bhattacharyya,
    /// `f(x) = h(x)`; expectation is `1 - I(W)`.
    Entropy,
}

impl Kernel {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::Bhattacharyya => 2.0 * (x * (1.0 - x)).max(0.0).sqrt(),
            Kernel::Entropy => binary_entropy(x),
        }
    }

    /// `f'(x)`; infinite at `x = 0`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Kernel::Bhattacharyya => (1.0 - 2.0 * x) / (x * (1.0 - x)).sqrt(),
            Kernel::Entropy => ((1.0 - x) / x).log2(),
        }
    }

    /// `f''(x)`; negative on `(0, 1/2]`.
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Kernel::Bhattacharyya => -0.5 / (x * (1.0 - x)).powf(1.5),
            Kernel::Entropy => -1.0 / (x * (1.0 - x) * std::f64::consts::LN_2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Bhattacharyya => "bhattacharyya",
            Kernel::Entropy => "entropy",
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bhattacharyya" | "z" => Ok(Kernel::Bhattacharyya),
            "entropy" | "h" => Ok(Kernel::Entropy),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Root channel description: `bsc:<p>`, `bec:<e>` or `file:<path>`.
///
/// Files are CSV with a `p,x` header and one mass per row.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSpec {
    Bsc(f64),
    Bec(f64),
    File(PathBuf),
}

impl ChannelSpec {
    pub fn load(&self) -> Result<MassDistribution> {
        match self {
            ChannelSpec::Bsc(p) => MassDistribution::from_bsc(*p),
            ChannelSpec::Bec(e) => MassDistribution::from_bec(*e),
            ChannelSpec::File(path) => read_mass_csv(path),
        }
    }
}

impl FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidChannelSpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| invalid("expected <kind>:<argument>"))?;
        let prob = |arg: &str| -> Result<f64> {
            let v: f64 = arg
                .trim()
                .parse()
                .map_err(|_| invalid("argument is not a number"))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid("probability must lie in [0, 1]"));
            }
            Ok(v)
        };
        match kind.trim().to_ascii_lowercase().as_str() {
            "bsc" => Ok(ChannelSpec::Bsc(prob(arg)?)),
            "bec" => Ok(ChannelSpec::Bec(prob(arg)?)),
            "file" if !arg.is_empty() => Ok(ChannelSpec::File(PathBuf::from(arg))),
            "file" => Err(invalid("missing path")),
            _ => Err(invalid("kind must be bsc, bec or file")),
        }
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Bsc(p) => write!(f, "bsc:{p}"),
            ChannelSpec::Bec(e) => write!(f, "bec:{e}"),
            ChannelSpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

fn read_mass_csv(path: &Path) -> Result<MassDistribution> {
    let wrap = |source| Error::ChannelFile {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(wrap)?;
    let mut raw = Vec::new();
    for record in reader.deserialize::<Mass>() {
        let m = record.map_err(wrap)?;
        raw.push((m.p, m.x));
    }
    MassDistribution::canonicalize(raw)
}
