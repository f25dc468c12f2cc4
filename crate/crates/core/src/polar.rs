//! Minus/plus polarization on BSC mixtures.
//!
//! Two independent uses of the mixture pick components `BSC(a)` and
//! `BSC(b)`. Under the minus transform the pair acts as
//! `BSC(a(1-b) + b(1-a))`. Under the plus transform the decoder also sees
//! whether the two observations agree, which splits the pair into a "good"
//! branch of weight `ab + (1-a)(1-b)` at crossover `ab / q_g` and a "bad"
//! branch of weight `a(1-b) + (1-a)b` at crossover `a(1-b) / q_b`.
//!
//! Both rules are symmetric in `(a, b)` after folding, so only unordered
//! pairs are visited, with doubled weight off the diagonal.

use crate::channel::{fold, Mass, MassDistribution};

pub fn minus(w: &MassDistribution) -> MassDistribution {
    let e = w.entries();
    let m = e.len();
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for (i, a) in e.iter().enumerate() {
        out.push(Mass::new(a.p * a.p, minus_crossover(a.x, a.x)));
        for b in &e[i + 1..] {
            out.push(Mass::new(2.0 * a.p * b.p, minus_crossover(a.x, b.x)));
        }
    }
    MassDistribution::from_masses(out)
}

pub fn plus(w: &MassDistribution) -> MassDistribution {
    let e = w.entries();
    let m = e.len();
    let mut out = Vec::with_capacity(m * (m + 1));
    // For fixed `a`, good-branch crossovers rise with `b` and bad-branch ones
    // fall, so each row is emitted as two ascending runs.
    for (i, a) in e.iter().enumerate() {
        for (j, b) in e.iter().enumerate().skip(i) {
            if let Some(mass) = plus_good(pair_weight(i, j, a.p, b.p), a.x, b.x) {
                out.push(mass);
            }
        }
        for (j, b) in e.iter().enumerate().skip(i).rev() {
            if let Some(mass) = plus_bad(pair_weight(i, j, a.p, b.p), a.x, b.x) {
                out.push(mass);
            }
        }
    }
    MassDistribution::from_masses(out)
}

/// `(minus(w), plus(w))`: the left and right children of a tree node.
pub fn transform_pair(w: &MassDistribution) -> (MassDistribution, MassDistribution) {
    (minus(w), plus(w))
}

#[inline]
fn minus_crossover(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + b * (1.0 - a)
}

#[inline]
fn pair_weight(i: usize, j: usize, pa: f64, pb: f64) -> f64 {
    if i == j {
        pa * pb
    } else {
        2.0 * pa * pb
    }
}

#[inline]
fn plus_good(weight: f64, a: f64, b: f64) -> Option<Mass> {
    let agree = a * b;
    let q_good = agree + (1.0 - a) * (1.0 - b);
    (q_good > 0.0).then(|| Mass::new(weight * q_good, fold(agree / q_good)))
}

#[inline]
fn plus_bad(weight: f64, a: f64, b: f64) -> Option<Mass> {
    let split = a * (1.0 - b);
    let q_bad = split + (1.0 - a) * b;
    (q_bad > 0.0).then(|| Mass::new(weight * q_bad, fold(split / q_bad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bsc(p: f64) -> MassDistribution {
        MassDistribution::from_bsc(p).unwrap()
    }

    fn bec(e: f64) -> MassDistribution {
        MassDistribution::from_bec(e).unwrap()
    }

    fn assert_masses(d: &MassDistribution, expected: &[(f64, f64)], tol: f64) {
        assert_eq!(d.len(), expected.len(), "{d}");
        for (m, &(p, x)) in d.entries().iter().zip(expected) {
            assert!(
                (m.p - p).abs() <= tol && (m.x - x).abs() <= tol,
                "{d} vs {expected:?}"
            );
        }
    }

    #[test]
    fn minus_examples() {
        assert_masses(&minus(&bsc(0.0)), &[(1.0, 0.0)], 0.0);
        assert_masses(&minus(&bsc(0.11)), &[(1.0, 2.0 * 0.11 * 0.89)], 1e-15);
        assert_masses(&minus(&bec(0.3)), &[(0.49, 0.0), (0.51, 0.5)], 1e-15);
    }

    #[test]
    fn plus_examples() {
        assert_masses(&plus(&bsc(0.0)), &[(1.0, 0.0)], 0.0);
        let qg = 0.11 * 0.11 + 0.89 * 0.89;
        assert_masses(
            &plus(&bsc(0.11)),
            &[(qg, 0.0121 / qg), (1.0 - qg, 0.5)],
            1e-12,
        );
        assert!((qg - 0.80420).abs() < 1e-12);
        assert!((0.0121 / qg - 0.015_045_9).abs() < 1e-6);
        assert_masses(&plus(&bec(0.3)), &[(0.91, 0.0), (0.09, 0.5)], 1e-15);
    }

    #[test]
    fn pair_matches_single_calls() {
        let w = MassDistribution::canonicalize([(0.2, 0.05), (0.5, 0.2), (0.3, 0.4)]).unwrap();
        let (l, r) = transform_pair(&w);
        assert_eq!(l, minus(&w));
        assert_eq!(r, plus(&w));

        let (l, r) = transform_pair(&bsc(0.5));
        assert_masses(&l, &[(1.0, 0.5)], 0.0);
        assert_masses(&r, &[(1.0, 0.5)], 0.0);

        let (l, r) = transform_pair(&bec(0.3));
        assert!((l.bhattacharyya() - 0.51).abs() < 1e-15);
        assert!((r.bhattacharyya() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn plus_of_zero_bad_branch_is_skipped() {
        // a = 0, b = 0 leaves q_bad = 0.
        let d = plus(&bsc(0.0));
        assert_eq!(d.len(), 1);
    }

    fn random_mixture() -> impl Strategy<Value = MassDistribution> {
        prop::collection::vec((0.01f64..1.0, 0.0f64..=0.5), 1..=64)
            .prop_map(|raw| MassDistribution::canonicalize(raw).unwrap())
    }

    fn bec_mixture() -> impl Strategy<Value = MassDistribution> {
        (0.0f64..=1.0).prop_map(|e| MassDistribution::from_bec(e).unwrap())
    }

    proptest! {
        #[test]
        fn chain_rule_conserves_information(w in random_mixture()) {
            let (l, r) = transform_pair(&w);
            let lhs = l.mutual_info() + r.mutual_info();
            prop_assert!((lhs - 2.0 * w.mutual_info()).abs() <= 1e-9);
        }

        #[test]
        fn plus_squares_bhattacharyya(w in random_mixture()) {
            let z = w.bhattacharyya();
            prop_assert!((plus(&w).bhattacharyya() - z * z).abs() <= 1e-9);
        }

        #[test]
        fn bhattacharyya_ordering(w in random_mixture()) {
            let z = w.bhattacharyya();
            let zm = minus(&w).bhattacharyya();
            let zp = plus(&w).bhattacharyya();
            prop_assert!(zp <= z + 1e-12);
            prop_assert!(z <= zm + 1e-12);
            prop_assert!(zm <= 2.0 * z - z * z + 1e-12);
        }

        #[test]
        fn entry_count_bounds(w in random_mixture()) {
            let m = w.len();
            prop_assert!(minus(&w).len() <= m * (m + 1) / 2);
            prop_assert!(plus(&w).len() <= m * (m + 1));
        }

        #[test]
        fn bec_closure(w in bec_mixture()) {
            let z = w.bhattacharyya();
            let (l, r) = transform_pair(&w);
            prop_assert!(l.is_bec() && r.is_bec());
            prop_assert!((l.bhattacharyya() - (2.0 * z - z * z)).abs() <= 1e-15);
            prop_assert!((r.bhattacharyya() - z * z).abs() <= 1e-15);
            // The minus upper bound is attained by erasure channels.
            prop_assert!((minus(&w).bhattacharyya() - (2.0 * z - z * z)).abs() <= 1e-12);
        }
    }
}
