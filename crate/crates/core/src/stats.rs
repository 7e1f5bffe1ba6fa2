//! Two-sample tests and effect sizes used by the experiment report.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample variance (n − 1 denominator); 0 below two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-tailed.
    pub p: f64,
}

fn check_sizes(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Statistics(format!("need at least two values per sample, got {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Statistics("samples contain non-finite values".into()));
    }
    Ok(())
}

/// Two-tailed p-value of a t statistic.
pub fn two_tailed_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Statistics(e.to_string()))?;
    Ok((2.0 * dist.cdf(-t.abs())).min(1.0))
}

fn pooled_variance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0)
}

/// Student's independent-samples t-test with pooled variance,
/// `df = n_a + n_b − 2`. Positive `t` means `a` has the larger mean.
pub fn student_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_sizes(a, b)?;
    let sp2 = pooled_variance(a, b);
    let diff = mean(a) - mean(b);
    if sp2 == 0.0 {
        if diff == 0.0 {
            return Err(Error::Statistics("both samples are constant and equal".into()));
        }
        return Err(Error::Statistics("zero pooled variance".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let t = diff / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    let df = na + nb - 2.0;
    Ok(TTest { t, df, p: two_tailed_p(t, df)? })
}

/// Welch's unequal-variance test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_sizes(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    if va + vb == 0.0 {
        return Err(Error::Statistics("zero variance in both samples".into()));
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTest { t, df, p: two_tailed_p(t, df)? })
}

/// Mean difference over the pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sizes(a, b)?;
    let sp = pooled_variance(a, b).sqrt();
    if sp == 0.0 {
        return Err(Error::Statistics("zero pooled standard deviation".into()));
    }
    Ok((mean(a) - mean(b)) / sp)
}

/// Agreement between two labelings of the same items beyond chance.
pub fn cohen_kappa<T: PartialEq + Clone>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Statistics("kappa needs two equally long, non-empty labelings".into()));
    }
    let n = a.len() as f64;
    let mut categories: Vec<T> = Vec::new();
    for x in a.iter().chain(b) {
        if !categories.contains(x) {
            categories.push(x.clone());
        }
    }
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let expected: f64 = categories
        .iter()
        .map(|c| {
            let pa = a.iter().filter(|x| *x == c).count() as f64 / n;
            let pb = b.iter().filter(|x| *x == c).count() as f64 / n;
            pa * pb
        })
        .sum();
    if expected >= 1.0 {
        return Err(Error::Statistics("chance agreement is 1; kappa undefined".into()));
    }
    Ok((observed - expected) / (1.0 - expected))
}
