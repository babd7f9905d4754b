//! Welch's two-sample t-test and the special functions behind it.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

const BETA_CF_EPS: f64 = 1e-12;
const BETA_CF_MAX_ITER: usize = 300;
const TINY: f64 = 1e-300;

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Invariant(format!(
        "incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})"
    )))
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || a <= 0.0 || b <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "incomplete beta undefined for x={x}, a={a}, b={b}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a)? / b)
    }
}

/// Upper tail `P(T >= t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 || t.is_nan() {
        return Err(Error::InvalidInput(format!(
            "student t tail undefined for t={t}, df={df}"
        )));
    }
    let x = df / (df + t * t);
    let half_two_sided = 0.5 * reg_inc_beta(x, 0.5 * df, 0.5)?;
    Ok(if t >= 0.0 {
        half_two_sided
    } else {
        1.0 - half_two_sided
    })
}

/// Closed-form CDFs for one and two degrees of freedom.
pub fn student_t_cdf_closed_form(t: f64, df: u32) -> Option<f64> {
    match df {
        1 => Some(0.5 + t.atan() / PI),
        2 => Some(0.5 + t / (2.0 * (2.0 + t * t).sqrt())),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupSummary {
    pub mean: f64,
    /// Unbiased sample variance; absent for a single observation.
    pub variance: Option<f64>,
    pub count: usize,
}

pub fn group_summary(values: &[f64]) -> Result<GroupSummary> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty group".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = (values.len() >= 2)
        .then(|| values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0));
    Ok(GroupSummary {
        mean,
        variance,
        count: values.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alternative {
    /// H1: mean(a) > mean(b).
    #[default]
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_one_sided: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

impl TTestResult {
    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_one_sided < alpha
    }
}

/// One-sided Welch t-test of `mean(a) > mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TTestResult> {
    let Alternative::Greater = alternative;
    if a.len() < 2 {
        return Err(Error::SampleTooSmall {
            which: "group a",
            len: a.len(),
        });
    }
    if b.len() < 2 {
        return Err(Error::SampleTooSmall {
            which: "group b",
            len: b.len(),
        });
    }
    let sa = group_summary(a)?;
    let sb = group_summary(b)?;
    let var_a = sa.variance.expect("n >= 2");
    let var_b = sb.variance.expect("n >= 2");
    if var_a == 0.0 && var_b == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let qa = var_a / na;
    let qb = var_b / nb;
    let se2 = qa + qb;
    let t = (sa.mean - sb.mean) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let p = student_t_sf(t, df)?;
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_one_sided: p,
        mean_a: sa.mean,
        mean_b: sb.mean,
        var_a,
        var_b,
        n_a: a.len(),
        n_b: b.len(),
    })
}
