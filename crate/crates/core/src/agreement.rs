//! Inter-annotator agreement: Fleiss κ, Krippendorff α and percent
//! agreement over an [`AnnotationTable`].
//!
//! Items with fewer than two present ratings are dropped before any
//! metric is computed; the count is reported as `n_missing`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationTable, Dimension};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMetric {
    FleissKappa,
    KrippendorffAlpha,
    PercentAgreement,
}

impl AgreementMetric {
    pub const fn name(self) -> &'static str {
        match self {
            AgreementMetric::FleissKappa => "fleiss_kappa",
            AgreementMetric::KrippendorffAlpha => "krippendorff_alpha",
            AgreementMetric::PercentAgreement => "percent_agreement",
        }
    }

    /// The metric reported for `dim`: κ for emotional appeal, percent
    /// agreement for audience adaptation, α for the ordinal dimensions.
    pub fn designated(dim: Dimension) -> Self {
        match dim {
            Dimension::EmotionalAppeal => AgreementMetric::FleissKappa,
            Dimension::AudienceAdaptation => AgreementMetric::PercentAgreement,
            _ => AgreementMetric::KrippendorffAlpha,
        }
    }
}

impl fmt::Display for AgreementMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaLevel {
    #[default]
    Nominal,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub dimension: Dimension,
    pub metric: AgreementMetric,
    /// Distance level; α only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<AlphaLevel>,
    pub value: f64,
    /// Items that entered the computation.
    pub n_items: usize,
    pub n_annotators: usize,
    /// Items dropped for having fewer than two ratings.
    pub n_missing: usize,
    /// No variation at all; the value is 1.0 by convention.
    pub degenerate: bool,
    pub annotators: Vec<String>,
}

/// Value plus bookkeeping shared by all metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub value: f64,
    pub n_items: usize,
    pub n_missing: usize,
    pub degenerate: bool,
}

/// Per retained item, the category indices (0-based) of present ratings.
fn retained(table: &AnnotationTable) -> Result<(Vec<Vec<usize>>, usize)> {
    let base = table.dimension().kind().min_value();
    let mut rows = Vec::new();
    let mut dropped = 0;
    for row in table.rows() {
        let present: Vec<usize> = row.iter().flatten().map(|&v| (v - base) as usize).collect();
        if present.len() < 2 {
            dropped += 1;
        } else {
            rows.push(present);
        }
    }
    if rows.is_empty() {
        return Err(Error::Degenerate(format!(
            "{}: no item has two or more ratings",
            table.dimension()
        )));
    }
    Ok((rows, dropped))
}

fn num_categories(table: &AnnotationTable) -> usize {
    table.dimension().kind().num_classes()
}

/// κ = (P̄ − P̄e) / (1 − P̄e) with per-item pair counting, so items may
/// have different numbers of raters.
pub fn fleiss_kappa(table: &AnnotationTable) -> Result<Agreement> {
    let (rows, dropped) = retained(table)?;
    let k = num_categories(table);
    let mut totals = vec![0.0; k];
    let mut p_bar = 0.0;
    let mut n_ratings = 0.0;
    for row in &rows {
        let mut counts = vec![0.0; k];
        for &c in row {
            counts[c] += 1.0;
        }
        let n = row.len() as f64;
        p_bar += counts.iter().map(|c| c * (c - 1.0)).sum::<f64>() / (n * (n - 1.0));
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
        n_ratings += n;
    }
    p_bar /= rows.len() as f64;
    let p_e: f64 = totals.iter().map(|t| (t / n_ratings).powi(2)).sum();
    let base = Agreement {
        value: 0.0,
        n_items: rows.len(),
        n_missing: dropped,
        degenerate: false,
    };
    if (1.0 - p_e).abs() < 1e-15 {
        // one category only
        return if (p_bar - 1.0).abs() < 1e-15 {
            Ok(Agreement {
                value: 1.0,
                degenerate: true,
                ..base
            })
        } else {
            Err(Error::Degenerate("Fleiss κ undefined: expected agreement is 1".into()))
        };
    }
    Ok(Agreement {
        value: (p_bar - p_e) / (1.0 - p_e),
        ..base
    })
}

/// Coincidence matrix `o[c][k]` over retained items.
pub fn coincidence_matrix(table: &AnnotationTable) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    let (rows, dropped) = retained(table)?;
    let k = num_categories(table);
    let mut o = vec![vec![0.0; k]; k];
    for row in &rows {
        let m = row.len() as f64;
        for (i, &a) in row.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                if i != j {
                    o[a][b] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    Ok((o, rows.len(), dropped))
}

/// δ²(c, k) for every category pair.
fn distances(level: AlphaLevel, marginals: &[f64]) -> Vec<Vec<f64>> {
    let k = marginals.len();
    let mut d = vec![vec![0.0; k]; k];
    for c in 0..k {
        for e in 0..k {
            d[c][e] = match level {
                AlphaLevel::Nominal => f64::from(u8::from(c != e)),
                AlphaLevel::Ordinal => {
                    let (lo, hi) = (c.min(e), c.max(e));
                    let span: f64 = marginals[lo..=hi].iter().sum();
                    (span - (marginals[lo] + marginals[hi]) / 2.0).powi(2)
                }
            };
        }
    }
    d
}

/// α = 1 − D_o / D_e from the coincidence matrix.
pub fn krippendorff_alpha(table: &AnnotationTable, level: AlphaLevel) -> Result<Agreement> {
    let (o, n_items, dropped) = coincidence_matrix(table)?;
    let marginals: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    let delta = distances(level, &marginals);
    let k = marginals.len();
    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for e in 0..k {
            d_o += o[c][e] * delta[c][e];
            d_e += marginals[c] * marginals[e] * delta[c][e];
        }
    }
    d_o /= n;
    d_e /= n * (n - 1.0);
    let base = Agreement {
        value: 0.0,
        n_items,
        n_missing: dropped,
        degenerate: false,
    };
    if d_e == 0.0 {
        return if d_o == 0.0 {
            Ok(Agreement {
                value: 1.0,
                degenerate: true,
                ..base
            })
        } else {
            Err(Error::Degenerate("Krippendorff α undefined: no expected disagreement".into()))
        };
    }
    Ok(Agreement {
        value: 1.0 - d_o / d_e,
        ..base
    })
}

/// Share of retained items on which every present rating is equal.
pub fn percent_agreement(table: &AnnotationTable) -> Result<Agreement> {
    let (rows, dropped) = retained(table)?;
    let agree = rows.iter().filter(|r| r.iter().all(|&v| v == r[0])).count();
    let all_same = {
        let first = rows[0][0];
        rows.iter().flatten().all(|&v| v == first)
    };
    Ok(Agreement {
        value: agree as f64 / rows.len() as f64,
        n_items: rows.len(),
        n_missing: dropped,
        degenerate: all_same,
    })
}

pub fn compute(table: &AnnotationTable, metric: AgreementMetric, level: AlphaLevel) -> Result<AgreementReport> {
    let (a, level) = match metric {
        AgreementMetric::FleissKappa => (fleiss_kappa(table)?, None),
        AgreementMetric::KrippendorffAlpha => (krippendorff_alpha(table, level)?, Some(level)),
        AgreementMetric::PercentAgreement => (percent_agreement(table)?, None),
    };
    Ok(AgreementReport {
        dimension: table.dimension(),
        metric,
        level,
        value: a.value,
        n_items: a.n_items,
        n_annotators: table.annotators().len(),
        n_missing: a.n_missing,
        degenerate: a.degenerate,
        annotators: table.annotators().to_vec(),
    })
}

/// The dimension's designated metric over the whole panel.
pub fn panel_report(table: &AnnotationTable, level: AlphaLevel) -> Result<AgreementReport> {
    compute(table, AgreementMetric::designated(table.dimension()), level)
}

/// Designated metric for every unordered annotator pair, in
/// lexicographic pair order.
pub fn pairwise_reports(table: &AnnotationTable, level: AlphaLevel) -> Result<Vec<AgreementReport>> {
    let n = table.annotators().len();
    if n < 2 {
        return Err(Error::invalid("annotators", "need at least 2"));
    }
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            out.push(panel_report(&table.select_annotators(&[a, b])?, level)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Q = Ratio<i64>;

    fn table(dim: Dimension, rows: &[&[Option<u8>]]) -> AnnotationTable {
        let n_ann = rows[0].len();
        AnnotationTable::new(
            (0..rows.len()).map(|i| format!("item_{i}")).collect(),
            (0..n_ann).map(|a| format!("ann{}", a + 1)).collect(),
            dim,
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn full(dim: Dimension, rows: &[Vec<u8>]) -> AnnotationTable {
        let rows: Vec<Vec<Option<u8>>> = rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        let refs: Vec<&[Option<u8>]> = rows.iter().map(|r| r.as_slice()).collect();
        table(dim, &refs)
    }

    /// Fleiss κ in exact rationals.
    fn kappa_exact(rows: &[Vec<u8>], k: usize, base: u8) -> Q {
        let mut totals = vec![0i64; k];
        let mut p_bar = Q::from_integer(0);
        let mut n_all = 0i64;
        for r in rows {
            let mut counts = vec![0i64; k];
            for &v in r {
                counts[(v - base) as usize] += 1;
            }
            let n = r.len() as i64;
            let agree: i64 = counts.iter().map(|c| c * (c - 1)).sum();
            p_bar += Q::new(agree, n * (n - 1));
            for (t, c) in totals.iter_mut().zip(&counts) {
                *t += c;
            }
            n_all += n;
        }
        p_bar /= Q::from_integer(rows.len() as i64);
        let p_e: Q = totals.iter().map(|&t| Q::new(t, n_all) * Q::new(t, n_all)).sum();
        (p_bar - p_e) / (Q::from_integer(1) - p_e)
    }

    /// Nominal α in exact rationals via pairable-value counting.
    fn alpha_nominal_exact(rows: &[Vec<u8>]) -> Q {
        let mut o = std::collections::BTreeMap::<(u8, u8), Q>::new();
        for r in rows {
            let m = r.len() as i64;
            for (i, &a) in r.iter().enumerate() {
                for (j, &b) in r.iter().enumerate() {
                    if i != j {
                        *o.entry((a, b)).or_insert(Q::from_integer(0)) += Q::new(1, m - 1);
                    }
                }
            }
        }
        let mut marg = std::collections::BTreeMap::<u8, Q>::new();
        for (&(a, _), v) in &o {
            *marg.entry(a).or_insert(Q::from_integer(0)) += *v;
        }
        let n: Q = marg.values().copied().sum();
        let d_o: Q = o.iter().filter(|((a, b), _)| a != b).map(|(_, v)| *v).sum::<Q>() / n;
        let mut d_e = Q::from_integer(0);
        for (a, na) in &marg {
            for (b, nb) in &marg {
                if a != b {
                    d_e += *na * *nb;
                }
            }
        }
        d_e /= n * (n - Q::from_integer(1));
        Q::from_integer(1) - d_o / d_e
    }

    fn to_f64(q: Q) -> f64 {
        *q.numer() as f64 / *q.denom() as f64
    }

    #[test]
    fn kappa_fixture() {
        let rows = vec![vec![1, 1], vec![1, 0]];
        assert_eq!(kappa_exact(&rows, 2, 0), Q::new(-1, 3));
        let k = fleiss_kappa(&full(Dimension::EmotionalAppeal, &rows)).unwrap();
        assert!((k.value + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_perfect_and_degenerate() {
        let rows = vec![vec![1, 1, 1], vec![0, 0, 0], vec![1, 1, 1]];
        let k = fleiss_kappa(&full(Dimension::EmotionalAppeal, &rows)).unwrap();
        assert_eq!(k.value, 1.0);
        assert!(!k.degenerate);
        let rows = vec![vec![1, 1, 1], vec![1, 1, 1]];
        let k = fleiss_kappa(&full(Dimension::EmotionalAppeal, &rows)).unwrap();
        assert_eq!(k.value, 1.0);
        assert!(k.degenerate);
    }

    #[test]
    fn alpha_fixture() {
        let rows = vec![vec![1, 1], vec![2, 2], vec![1, 2]];
        assert_eq!(alpha_nominal_exact(&rows), Q::new(4, 9));
        let a = krippendorff_alpha(&full(Dimension::Clarity, &rows), AlphaLevel::Nominal).unwrap();
        assert!((a.value - 4.0 / 9.0).abs() < 1e-12);
        let (o, _, _) = coincidence_matrix(&full(Dimension::Clarity, &rows)).unwrap();
        assert_eq!(o, vec![vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0; 3]]);
    }

    #[test]
    fn alpha_perfect_and_degenerate() {
        let rows = vec![vec![1, 1, 1], vec![3, 3, 3], vec![2, 2, 2]];
        for level in [AlphaLevel::Nominal, AlphaLevel::Ordinal] {
            assert_eq!(krippendorff_alpha(&full(Dimension::Evidence, &rows), level).unwrap().value, 1.0);
        }
        let same = vec![vec![2, 2], vec![2, 2]];
        let a = krippendorff_alpha(&full(Dimension::Evidence, &same), AlphaLevel::Ordinal).unwrap();
        assert!(a.degenerate && a.value == 1.0);
    }

    #[test]
    fn percent_agreement_fixtures() {
        let rows = vec![vec![1, 1, 1], vec![2, 2, 2], vec![3, 3, 3], vec![1, 2, 1]];
        assert_eq!(percent_agreement(&full(Dimension::Fairness, &rows)).unwrap().value, 0.75);
        let rows = vec![vec![1, 0], vec![0, 1], vec![1, 0]];
        assert_eq!(percent_agreement(&full(Dimension::AudienceAdaptation, &rows)).unwrap().value, 0.0);
        let rows = vec![vec![1, 1], vec![0, 0]];
        assert_eq!(percent_agreement(&full(Dimension::AudienceAdaptation, &rows)).unwrap().value, 1.0);
    }

    #[test]
    fn sparse_items_are_dropped_and_counted() {
        let t = table(
            Dimension::Rebuttal,
            &[&[Some(1), Some(1), None], &[Some(2), None, None], &[None, Some(3), Some(3)]],
        );
        let r = compute(&t, AgreementMetric::KrippendorffAlpha, AlphaLevel::Nominal).unwrap();
        assert_eq!((r.n_items, r.n_missing), (2, 1));
        let lonely = table(Dimension::Rebuttal, &[&[Some(1), None], &[None, Some(2)]]);
        assert!(matches!(percent_agreement(&lonely), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pairwise_matches_direct_two_rater_computation() {
        let rows = vec![vec![1, 2, 1], vec![2, 2, 3], vec![3, 3, 3], vec![1, 1, 2], vec![2, 3, 2]];
        let t = full(Dimension::Clarity, &rows);
        let pairs = pairwise_reports(&t, AlphaLevel::Nominal).unwrap();
        assert_eq!(pairs.len(), 3);
        let names: Vec<Vec<String>> = pairs.iter().map(|p| p.annotators.clone()).collect();
        assert_eq!(names[0], ["ann1", "ann2"]);
        assert_eq!(names[2], ["ann2", "ann3"]);
        for (p, (a, b)) in pairs.iter().zip([(0, 1), (0, 2), (1, 2)]) {
            let sub: Vec<Vec<u8>> = rows.iter().map(|r| vec![r[a], r[b]]).collect();
            assert!((p.value - to_f64(alpha_nominal_exact(&sub))).abs() < 1e-12);
            assert_eq!(p.metric, AgreementMetric::KrippendorffAlpha);
        }
        let bin = full(Dimension::EmotionalAppeal, &[vec![1, 1, 0], vec![0, 0, 0], vec![1, 0, 1]]);
        for p in pairwise_reports(&bin, AlphaLevel::Nominal).unwrap() {
            assert_eq!(p.metric, AgreementMetric::FleissKappa);
        }
    }

    #[test]
    fn ordinal_alpha_depends_on_category_order() {
        let rows = vec![vec![1, 2], vec![1, 1], vec![1, 1], vec![2, 3], vec![3, 3], vec![3, 3]];
        let swap = |f: fn(u8) -> u8| -> Vec<Vec<u8>> { rows.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect() };
        let rev = swap(|v| 4 - v);
        let s12 = swap(|v| match v {
            1 => 2,
            2 => 1,
            x => x,
        });
        let a = |r: &[Vec<u8>], l| krippendorff_alpha(&full(Dimension::Rebuttal, r), l).unwrap().value;
        for l in [AlphaLevel::Nominal] {
            assert!((a(&rows, l) - a(&rev, l)).abs() < 1e-12);
            assert!((a(&rows, l) - a(&s12, l)).abs() < 1e-12);
        }
        assert!((a(&rows, AlphaLevel::Ordinal) - a(&rev, AlphaLevel::Ordinal)).abs() < 1e-12);
        assert!((a(&rows, AlphaLevel::Ordinal) - a(&s12, AlphaLevel::Ordinal)).abs() > 1e-3);
    }

    fn arb_rows() -> impl Strategy<Value = Vec<Vec<u8>>> {
        (2usize..5).prop_flat_map(|m| prop::collection::vec(prop::collection::vec(1u8..=3, m), 2..12))
    }

    proptest! {
        #[test]
        fn kappa_matches_exact_oracle(rows in prop::collection::vec(prop::collection::vec(0u8..=1, 3), 2..15)) {
            prop_assume!(rows.iter().flatten().any(|&v| v != rows[0][0]));
            let t = full(Dimension::EmotionalAppeal, &rows);
            let exact = kappa_exact(&rows, 2, 0);
            prop_assert!((fleiss_kappa(&t).unwrap().value - to_f64(exact)).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_item_and_annotator_permutation(rows in arb_rows(), rot in 0usize..4) {
            let t = full(Dimension::Clarity, &rows);
            let mut shuffled: Vec<Vec<u8>> = rows.iter().rev().cloned().collect();
            for r in &mut shuffled {
                let k = rot % r.len();
                r.rotate_left(k);
            }
            let u = full(Dimension::Clarity, &shuffled);
            for metric in [AgreementMetric::FleissKappa, AgreementMetric::KrippendorffAlpha, AgreementMetric::PercentAgreement] {
                for level in [AlphaLevel::Nominal, AlphaLevel::Ordinal] {
                    match (compute(&t, metric, level), compute(&u, metric, level)) {
                        (Ok(a), Ok(b)) => prop_assert!((a.value - b.value).abs() < 1e-12),
                        (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                    }
                }
            }
        }

        #[test]
        fn nominal_metrics_invariant_under_category_renaming(rows in arb_rows()) {
            let renamed: Vec<Vec<u8>> = rows.iter().map(|r| r.iter().map(|&v| [0, 3, 1, 2][v as usize]).collect()).collect();
            let (t, u) = (full(Dimension::Clarity, &rows), full(Dimension::Clarity, &renamed));
            if let (Ok(a), Ok(b)) = (fleiss_kappa(&t), fleiss_kappa(&u)) {
                prop_assert!((a.value - b.value).abs() < 1e-12);
            }
            if let (Ok(a), Ok(b)) = (krippendorff_alpha(&t, AlphaLevel::Nominal), krippendorff_alpha(&u, AlphaLevel::Nominal)) {
                prop_assert!((a.value - b.value).abs() < 1e-12);
            }
        }

        #[test]
        fn perfect_agreement_gives_one(vals in prop::collection::vec(1u8..=3, 2..10), m in 2usize..5) {
            let rows: Vec<Vec<u8>> = vals.iter().map(|&v| vec![v; m]).collect();
            let t = full(Dimension::Evidence, &rows);
            prop_assert_eq!(fleiss_kappa(&t).unwrap().value, 1.0);
            prop_assert_eq!(krippendorff_alpha(&t, AlphaLevel::Nominal).unwrap().value, 1.0);
            prop_assert_eq!(krippendorff_alpha(&t, AlphaLevel::Ordinal).unwrap().value, 1.0);
            prop_assert_eq!(percent_agreement(&t).unwrap().value, 1.0);
        }

        #[test]
        fn percent_agreement_bounds_and_monotone(rows in arb_rows()) {
            let t = full(Dimension::Fairness, &rows);
            let p = percent_agreement(&t).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&p));
            if let Some(i) = rows.iter().position(|r| r.iter().any(|&v| v != r[0])) {
                if rows.len() > 1 {
                    let mut fewer = rows.clone();
                    fewer.remove(i);
                    let q = percent_agreement(&full(Dimension::Fairness, &fewer)).unwrap().value;
                    prop_assert!(q >= p);
                }
            }
        }
    }
}
