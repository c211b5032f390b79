//! Descriptive statistics and hypothesis tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Variance with `ddof` degrees of freedom removed from the denominator.
pub fn variance(xs: &[f64], ddof: usize) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - ddof) as f64
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn population(xs: &[f64]) -> Option<Self> {
        (!xs.is_empty()).then(|| Self {
            mean: mean(xs),
            std: variance(xs, 0).sqrt(),
            n: xs.len(),
        })
    }

    /// Mean and sample (n - 1) standard deviation; zero for a single value.
    pub fn sample(xs: &[f64]) -> Option<Self> {
        (!xs.is_empty()).then(|| Self {
            mean: mean(xs),
            std: if xs.len() > 1 { variance(xs, 1).sqrt() } else { 0.0 },
            n: xs.len(),
        })
    }
}

/// Two-sided p-value of a t statistic.
fn t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("positive df").inverse_cdf(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub test: String,
    /// Which difference the statistic and interval describe.
    pub orientation: String,
    pub mean_diff: f64,
    pub t_statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub ci_level: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

fn check_two(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("t-test needs at least two values per sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("t-test input contains non-finite values".into()));
    }
    Ok(())
}

fn finish(test: &str, diff: f64, se: f64, df: f64, alpha: f64) -> TTestResult {
    let t = if diff == 0.0 { 0.0 } else { diff / se };
    let q = t_quantile(1.0 - alpha / 2.0, df);
    TTestResult {
        test: test.into(),
        orientation: "mean(a) - mean(b)".into(),
        mean_diff: diff,
        t_statistic: t,
        df,
        p_value: t_two_sided(t, df),
        ci_level: 1.0 - alpha,
        ci95_low: diff - q * se,
        ci95_high: diff + q * se,
    }
}

/// Welch's unequal-variance t-test with Satterthwaite degrees of freedom.
pub fn welch_ttest(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    check_two(a, b)?;
    let (va, vb) = (variance(a, 1) / a.len() as f64, variance(b, 1) / b.len() as f64);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let se = (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(finish("welch", mean(a) - mean(b), se, df, alpha))
}

/// Student's t-test with pooled variance.
pub fn student_ttest(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    check_two(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * variance(a, 1) + (nb - 1.0) * variance(b, 1)) / df;
    if pooled == 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(finish("student", mean(a) - mean(b), se, df, alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
}

pub fn anova_oneway(groups: &[&[f64]]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument("ANOVA needs at least two groups".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::InvalidArgument("every ANOVA group needs at least two values".into()));
    }
    let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let grand = mean(&all);
    let ssb: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ssw: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum();
    let dfb = groups.len() - 1;
    let dfw = all.len() - groups.len();
    if ssw == 0.0 {
        return Err(Error::Degenerate("zero within-group variance; F is undefined".into()));
    }
    let f = (ssb / dfb as f64) / (ssw / dfw as f64);
    let p = FisherSnedecor::new(dfb as f64, dfw as f64).expect("positive df").sf(f);
    Ok(AnovaResult {
        f_statistic: f,
        p_value: p.clamp(0.0, 1.0),
        df_between: dfb,
        df_within: dfw,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// Why the statistic could not be computed, if it could not.
    pub flag: Option<String>,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * x + k)
}

/// Shapiro-Wilk W and p-value (Royston's approximation, 3 <= n <= 5000).
pub fn shapiro_wilk(xs: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::InvalidArgument(format!("Shapiro-Wilk needs 3..=5000 values, got {n}")));
    }
    let mut x = xs.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 0.0 || !range.is_finite() {
        return Err(Error::Degenerate("constant sample".into()));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let nf = n as f64;
    let mut a = vec![0.0; n];
    if n == 3 {
        a[0] = -(0.5f64).sqrt();
        a[2] = (0.5f64).sqrt();
    } else {
        let m: Vec<f64> = (1..=n)
            .map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let mm: f64 = m.iter().map(|v| v * v).sum();
        let u = 1.0 / nf.sqrt();
        let c1 = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        let c2 = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let an = m[n - 1] / mm.sqrt() + poly(&c1, u);
        if n > 5 {
            let an1 = m[n - 2] / mm.sqrt() + poly(&c2, u);
            let phi = (mm - 2.0 * m[n - 1].powi(2) - 2.0 * m[n - 2].powi(2)) / (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
            for i in 2..n - 2 {
                a[i] = m[i] / phi.sqrt();
            }
            a[n - 1] = an;
            a[n - 2] = an1;
            a[0] = -an;
            a[1] = -an1;
        } else {
            let phi = (mm - 2.0 * m[n - 1].powi(2)) / (1.0 - 2.0 * an * an);
            for i in 1..n - 1 {
                a[i] = m[i] / phi.sqrt();
            }
            a[n - 1] = an;
            a[0] = -an;
        }
    }
    // Center for numerical stability; W is location and scale invariant.
    let mx = mean(&x);
    let ss: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let num: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * (xi - mx)).sum::<f64>().powi(2);
    let w = (num / ss).min(1.0);

    let p = if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        p.max(0.0)
    } else {
        let y = (1.0 - w).ln();
        let (z_num, m, s) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], nf);
            if y >= gamma {
                return Ok((w, 1e-99));
            }
            (
                -(gamma - y).ln(),
                poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], nf),
                poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp(),
            )
        } else {
            let ln = nf.ln();
            (
                y,
                poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln),
                poly(&[-0.4803, -0.082676, 0.0030302], ln).exp(),
            )
        };
        std_normal.sf((z_num - m) / s)
    };
    Ok((w, p.clamp(0.0, 1.0)))
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Brown-Forsythe test: one-way ANOVA on absolute deviations from each
/// group's median.
pub fn brown_forsythe(groups: &[&[f64]]) -> Result<AnovaResult> {
    let dev: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = median(g);
            g.iter().map(|x| (x - m).abs()).collect()
        })
        .collect();
    let refs: Vec<&[f64]> = dev.iter().map(Vec::as_slice).collect();
    anova_oneway(&refs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub normality: Vec<TestOutcome>,
    pub homogeneity: TestOutcome,
}

/// Shapiro-Wilk per sample and Brown-Forsythe across samples. Advisory:
/// failures are flagged, never raised.
pub fn normality_variance_checks(samples: &[&[f64]]) -> Diagnostics {
    let normality = samples
        .iter()
        .map(|s| match shapiro_wilk(s) {
            Ok((w, p)) => TestOutcome {
                test: "shapiro-wilk".into(),
                statistic: Some(w),
                p_value: Some(p),
                flag: None,
            },
            Err(e) => TestOutcome {
                test: "shapiro-wilk".into(),
                statistic: None,
                p_value: None,
                flag: Some(e.to_string()),
            },
        })
        .collect();
    let homogeneity = match brown_forsythe(samples) {
        Ok(r) => TestOutcome {
            test: "brown-forsythe".into(),
            statistic: Some(r.f_statistic),
            p_value: Some(r.p_value),
            flag: None,
        },
        Err(e) => TestOutcome {
            test: "brown-forsythe".into(),
            statistic: None,
            p_value: None,
            flag: Some(e.to_string()),
        },
    };
    Diagnostics { normality, homogeneity }
}
