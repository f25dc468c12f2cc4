//! Shared fixtures for the criterion benchmarks.

use polarq_core::MassDistribution;

/// Deterministic `m`-mass mixture with positions spread over `[0, 1/2]`.
pub fn spread_mixture(m: usize) -> MassDistribution {
    let raw = (0..m).map(|i| {
        let u = ((i * 7919) % 1009) as f64 / 1009.0;
        (0.25 + u, 0.5 * (i as f64 + 0.5) / m as f64)
    });
    MassDistribution::canonicalize(raw).expect("valid fixture")
}
