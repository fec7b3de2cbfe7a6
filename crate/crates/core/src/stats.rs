//! Significance tests over per-seed scores: one-way ANOVA and two-sample
//! t-tests, with p-values from the regularized incomplete beta function.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Averaging, RunReport};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const CF_MAX_ITER: usize = 300;
const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// I_x(a, b). Uses the symmetry I_x(a,b) = 1 − I_{1−x}(b,a) when
/// x > (a+1)/(a+b+2) so the fraction converges quickly.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid("incomplete beta", format!("a = {a}, b = {b} must be positive")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid("incomplete beta", format!("x = {x} not in [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    let v = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Two-sided p-value of a t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).expect("valid t distribution arguments")
}

/// Upper-tail p-value of an F statistic.
pub fn f_upper_p(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).expect("valid F distribution arguments")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestName {
    AnovaOneway,
    TTestStudent,
    TTestWelch,
    TTestPaired,
}

impl TestName {
    pub const fn name(self) -> &'static str {
        match self {
            TestName::AnovaOneway => "anova_oneway",
            TestName::TTestStudent => "t_test_student",
            TestName::TTestWelch => "t_test_welch",
            TestName::TTestPaired => "t_test_paired",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    #[default]
    Student,
    Welch,
    Paired,
}

impl TTestVariant {
    fn test_name(self) -> TestName {
        match self {
            TTestVariant::Student => TestName::TTestStudent,
            TTestVariant::Welch => TestName::TTestWelch,
            TTestVariant::Paired => TestName::TTestPaired,
        }
    }
}

impl FromStr for TTestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "student" => Ok(TTestVariant::Student),
            "welch" => Ok(TTestVariant::Welch),
            "paired" => Ok(TTestVariant::Paired),
            other => Err(Error::invalid("t_test", format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DegreesOfFreedom {
    One(f64),
    Two(f64, f64),
}

impl fmt::Display for DegreesOfFreedom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreesOfFreedom::One(d) => write!(f, "{}", fmt_df(*d)),
            DegreesOfFreedom::Two(a, b) => write!(f, "({}, {})", fmt_df(*a), fmt_df(*b)),
        }
    }
}

fn fmt_df(d: f64) -> String {
    if d.fract() == 0.0 {
        format!("{d:.0}")
    } else {
        format!("{d:.2}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub test: TestName,
    pub statistic: f64,
    pub degrees_of_freedom: DegreesOfFreedom,
    pub p_value: f64,
    /// What was compared, e.g. "dep_m_6e vs bert_cs".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl StatTestResult {
    /// "F = 12.92, p < 0.001" or "t = -1.00, df = 8, p = 0.346594".
    pub fn summary(&self) -> String {
        match self.test {
            TestName::AnovaOneway => format!("F = {:.2}, {}", self.statistic, format_p_threshold(self.p_value)),
            _ => format!(
                "t = {:.2}, df = {}, {}",
                self.statistic,
                self.degrees_of_freedom,
                format_p_exact(self.p_value)
            ),
        }
    }
}

/// "p < 0.001" below the threshold, else three decimals.
pub fn format_p_threshold(p: f64) -> String {
    if p < 0.001 {
        "p < 0.001".into()
    } else {
        format!("p = {p:.3}")
    }
}

/// Six decimals, e.g. "p = 0.000114".
pub fn format_p_exact(p: f64) -> String {
    format!("p = {p:.6}")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from the mean.
fn ss(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum()
}

fn check_sample(name: &str, xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::invalid(name, format!("needs at least 2 values, found {}", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(name, "contains a non-finite value"));
    }
    Ok(())
}

/// Two-sample t-test, two-sided.
///
/// When both samples have zero variance the statistic is only defined if
/// the means coincide, in which case t = 0 and p = 1.
pub fn t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<StatTestResult> {
    check_sample("sample a", a)?;
    check_sample("sample b", b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (diff, se2, df) = match variant {
        TTestVariant::Student => {
            let df = na + nb - 2.0;
            let pooled = (ss(a) + ss(b)) / df;
            (mean(a) - mean(b), pooled * (1.0 / na + 1.0 / nb), df)
        }
        TTestVariant::Welch => {
            let (va, vb) = (ss(a) / (na - 1.0), ss(b) / (nb - 1.0));
            let (qa, qb) = (va / na, vb / nb);
            let denom = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
            let df = if denom > 0.0 { (qa + qb).powi(2) / denom } else { na + nb - 2.0 };
            (mean(a) - mean(b), qa + qb, df)
        }
        TTestVariant::Paired => {
            if a.len() != b.len() {
                return Err(Error::invalid(
                    "t_test",
                    format!("paired test needs equal sizes, got {} and {}", a.len(), b.len()),
                ));
            }
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            (mean(&d), ss(&d) / (na - 1.0) / na, na - 1.0)
        }
    };
    let statistic = if se2 > 0.0 {
        diff / se2.sqrt()
    } else if diff == 0.0 {
        0.0
    } else {
        return Err(Error::Degenerate(format!(
            "{}: zero variance with different means",
            variant.test_name().name()
        )));
    };
    Ok(StatTestResult {
        test: variant.test_name(),
        statistic,
        degrees_of_freedom: DegreesOfFreedom::One(df),
        p_value: t_two_sided_p(statistic, df),
        label: None,
    })
}

/// One-way ANOVA across `groups`.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<StatTestResult> {
    if groups.len() < 2 {
        return Err(Error::invalid("anova", format!("needs at least 2 groups, found {}", groups.len())));
    }
    for (i, g) in groups.iter().enumerate() {
        check_sample(&format!("group {i}"), g)?;
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ss_between: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ss_within: f64 = groups.iter().map(|g| ss(g)).sum();
    let (d1, d2) = ((k - 1) as f64, (n - k) as f64);
    if ss_within == 0.0 {
        return Err(Error::Degenerate(format!(
            "anova: every group has zero variance (groups 0..{k})"
        )));
    }
    let f = (ss_between / d1) / (ss_within / d2);
    Ok(StatTestResult {
        test: TestName::AnovaOneway,
        statistic: f,
        degrees_of_freedom: DegreesOfFreedom::Two(d1, d2),
        p_value: f_upper_p(f, d1, d2),
        label: None,
    })
}

/// ANOVA over every report plus `baseline` against each other report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceSummary {
    pub baseline: String,
    pub anova: StatTestResult,
    pub pairwise: Vec<StatTestResult>,
}

impl SignificanceSummary {
    pub fn render(&self) -> String {
        let mut out = format!("one-way ANOVA over {} models: {}\n", self.pairwise.len() + 1, self.anova.summary());
        for r in &self.pairwise {
            out.push_str(&format!("{}: {}\n", r.label.as_deref().unwrap_or("?"), r.summary()));
        }
        out.push_str("(no multiple-comparison correction applied)\n");
        out
    }
}

fn check_seed_sets(reports: &[RunReport]) -> Result<()> {
    let first = &reports[0];
    for r in &reports[1..] {
        if r.seeds != first.seeds {
            return Err(Error::invalid(
                "seeds",
                format!(
                    "{} has seeds {:?} but {} has {:?}",
                    r.variant_id, r.seeds, first.variant_id, first.seeds
                ),
            ));
        }
    }
    Ok(())
}

/// `baseline` against every other report, on per-seed macro averages.
pub fn pairwise_significance(
    reports: &[RunReport],
    baseline: &str,
    variant: TTestVariant,
    averaging: Averaging,
) -> Result<Vec<StatTestResult>> {
    if reports.is_empty() {
        return Err(Error::invalid("reports", "none given"));
    }
    check_seed_sets(reports)?;
    let base = reports
        .iter()
        .find(|r| r.variant_id == baseline)
        .ok_or_else(|| Error::invalid("baseline", format!("no report for {baseline:?}")))?;
    let base_scores = base.macro_avgs(averaging);
    reports
        .iter()
        .filter(|r| r.variant_id != baseline)
        .map(|r| {
            let mut res = t_test(&base_scores, &r.macro_avgs(averaging), variant)?;
            res.label = Some(format!("{baseline} vs {}", r.variant_id));
            Ok(res)
        })
        .collect()
}

pub fn significance_summary(
    reports: &[RunReport],
    baseline: &str,
    variant: TTestVariant,
    averaging: Averaging,
) -> Result<SignificanceSummary> {
    if reports.len() < 2 {
        return Err(Error::invalid("reports", format!("ANOVA needs at least 2, found {}", reports.len())));
    }
    check_seed_sets(reports)?;
    let groups: Vec<Vec<f64>> = reports.iter().map(|r| r.macro_avgs(averaging)).collect();
    let mut anova = one_way_anova(&groups)?;
    anova.label = Some("all models".into());
    Ok(SignificanceSummary {
        baseline: baseline.to_string(),
        anova,
        pairwise: pairwise_significance(reports, baseline, variant, averaging)?,
    })
}
