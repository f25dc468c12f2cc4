//! Achievable-rate sweeps at a fixed error budget.
//!
//! Each table evolves the capacity-1/2 BSC in both degrade and upgrade mode
//! with the Bhattacharyya kernel and reports the rate picked by
//! [`select_by_error_budget`] on the leaf bit-error probabilities.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::channel::{bsc_crossover_for_capacity, Kernel, MassDistribution};
use crate::construct::{evolve, select_by_error_budget, ConstructionConfig, Mode, Reliability};
use crate::error::{Error, Result};

pub const DEFAULT_BUDGET: f64 = 1e-3;

/// Largest depth run at CI scale.
pub const CI_MAX_DEPTH: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Table {
    /// `n = 15`, `k` in `{2, 4, ..., 64}`.
    KSweep,
    /// `k = 16`, `n` in `{5, 8, ..., 20}`.
    DepthSweep,
    /// `k = 16`, `n` in `21..=25`.
    DeepSweep,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Full,
    Ci,
}

impl Table {
    pub fn from_number(which: u32) -> Result<Self> {
        match which {
            1 => Ok(Table::KSweep),
            2 => Ok(Table::DepthSweep),
            3 => Ok(Table::DeepSweep),
            _ => Err(Error::InvalidArgument(format!("no table {which}"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Table::KSweep => 1,
            Table::DepthSweep => 2,
            Table::DeepSweep => 3,
        }
    }

    /// Name of the swept parameter, used as the leading CSV column.
    pub fn axis(self) -> &'static str {
        match self {
            Table::KSweep => "k",
            Table::DepthSweep | Table::DeepSweep => "n",
        }
    }

    /// `(n, k)` points of the sweep.
    pub fn points(self) -> Vec<(u32, usize)> {
        match self {
            Table::KSweep => [2, 4, 8, 16, 32, 64].iter().map(|&k| (15, k)).collect(),
            Table::DepthSweep => [5, 8, 11, 14, 17, 20].iter().map(|&n| (n, 16)).collect(),
            Table::DeepSweep => (21..=25).map(|n| (n, 16)).collect(),
        }
    }

    pub fn check_scale(self, scale: Scale) -> Result<()> {
        let deepest = self.points().iter().map(|p| p.0).max().unwrap_or(0);
        if scale == Scale::Ci && deepest > CI_MAX_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "table {} reaches n = {deepest}, beyond the CI cap of {CI_MAX_DEPTH}",
                self.number()
            )));
        }
        Ok(())
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Scale::Full),
            "ci" => Ok(Scale::Ci),
            other => Err(Error::InvalidArgument(format!("unknown scale `{other}`"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Full => "full",
            Scale::Ci => "ci",
        })
    }
}

/// The BSC whose capacity is exactly one half.
pub fn reference_channel() -> MassDistribution {
    let p = bsc_crossover_for_capacity(0.5).expect("0.5 is a valid capacity");
    MassDistribution::from_bsc(p).expect("bisection stays in [0, 1/2]")
}

/// Rate reached by one construction at the given budget.
pub fn achievable_rate(
    w0: &MassDistribution,
    cfg: &ConstructionConfig,
    budget: f64,
) -> Result<f64> {
    let leaves = evolve(w0, cfg)?;
    Ok(select_by_error_budget(&leaves, budget, Reliability::ErrorProbability)?.rate)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub n: u32,
    pub k: usize,
    pub degrade: f64,
    pub upgrade: f64,
}

impl TableRow {
    pub fn axis_value(&self, table: Table) -> usize {
        match table {
            Table::KSweep => self.k,
            Table::DepthSweep | Table::DeepSweep => self.n as usize,
        }
    }
}

/// Degrade and upgrade rates at one `(n, k)` point.
pub fn table_row(w0: &MassDistribution, n: u32, k: usize, budget: f64) -> Result<TableRow> {
    let mut cfg = ConstructionConfig::new(n, k, Mode::Degrade);
    cfg.kernel = Kernel::Bhattacharyya;
    let degrade = achievable_rate(w0, &cfg, budget)?;
    cfg.mode = Mode::Upgrade;
    let upgrade = achievable_rate(w0, &cfg, budget)?;
    Ok(TableRow {
        n,
        k,
        degrade,
        upgrade,
    })
}

/// Runs a whole sweep on [`reference_channel`].
pub fn run_table(table: Table, scale: Scale, budget: f64) -> Result<Vec<TableRow>> {
    table.check_scale(scale)?;
    let w0 = reference_channel();
    table
        .points()
        .into_iter()
        .map(|(n, k)| table_row(&w0, n, k, budget))
        .collect()
}

/// CSV with the swept parameter first and rates to four decimals.
pub fn format_csv(table: Table, rows: &[TableRow]) -> String {
    let mut out = format!("{},degrade,upgrade\n", table.axis());
    for row in rows {
        out.push_str(&format!(
            "{},{:.4},{:.4}\n",
            row.axis_value(table),
            row.degrade,
            row.upgrade
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps() {
        assert_eq!(Table::from_number(1).unwrap().points().len(), 6);
        assert_eq!(Table::DepthSweep.points()[0], (5, 16));
        assert_eq!(Table::DeepSweep.points().last(), Some(&(25, 16)));
        assert!(Table::from_number(4).is_err());
        assert!(Table::DeepSweep.check_scale(Scale::Ci).is_err());
        assert!(Table::DeepSweep.check_scale(Scale::Full).is_ok());
        assert!(Table::DepthSweep.check_scale(Scale::Ci).is_ok());
    }

    #[test]
    fn reference_channel_has_capacity_half() {
        assert!((reference_channel().mutual_info() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let rows = [TableRow {
            n: 15,
            k: 2,
            degrade: 0.289_459,
            upgrade: 0.459_01,
        }];
        assert_eq!(
            format_csv(Table::KSweep, &rows),
            "k,degrade,upgrade\n2,0.2895,0.4590\n"
        );
    }

    #[test]
    fn shallow_row() {
        let row = table_row(&reference_channel(), 5, 16, DEFAULT_BUDGET).unwrap();
        assert!(row.degrade <= row.upgrade);
    }
}
