//! Group comparison of per-case metrics: Shapiro–Wilk, one-way ANOVA and
//! Tukey–Kramer post-hoc intervals.

mod ptukey;
mod shapiro;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

pub use ptukey::{studentized_range_cdf, studentized_range_quantile};
pub use shapiro::shapiro_wilk;

/// Default significance level for reports.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwResult {
    pub w: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnovaResult {
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub ss_total: f64,
    pub ms_between: f64,
    pub ms_within: f64,
    pub f: f64,
    pub p_value: f64,
}

/// One pairwise comparison. `diff` is `mean(j) − mean(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TukeyPair {
    pub i: usize,
    pub j: usize,
    pub diff: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_adj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TukeyResult {
    pub alpha: f64,
    /// Critical studentized range `q(1 − alpha; k, df)`.
    pub q_crit: f64,
    pub df: usize,
    pub pairs: Vec<TukeyPair>,
}

impl TukeyResult {
    pub fn pair(&self, i: usize, j: usize) -> Option<&TukeyPair> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_groups<G: AsRef<[f64]>>(groups: &[G]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::arg("need at least two groups"));
    }
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(Error::arg(format!(
                "group {i} has {} observation(s); at least 2 are needed",
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg(format!("group {i} contains non-finite values")));
        }
    }
    Ok(())
}

/// One-way analysis of variance.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    check_groups(groups)?;
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let ss_total: f64 = groups
        .iter()
        .flat_map(|g| g.as_ref())
        .map(|v| (v - grand).powi(2))
        .sum();
    let (df_between, df_within) = (k - 1, n - k);
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let scale = ss_total.max(grand * grand * n as f64).max(f64::MIN_POSITIVE);
    let tiny = 1e-14 * scale;
    let (f, p_value) = if ss_within <= tiny {
        if ss_between <= tiny {
            return Err(Error::Numerical(
                "F is undefined: no variation within or between groups".into(),
            ));
        }
        (f64::INFINITY, 0.0)
    } else {
        let f = ms_between / ms_within;
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        (f, dist.sf(f))
    };
    Ok(AnovaResult {
        df_between,
        df_within,
        ss_between,
        ss_within,
        ss_total,
        ms_between,
        ms_within,
        f,
        p_value,
    })
}

/// All-pairs Tukey–Kramer comparisons at level `alpha`.
pub fn tukey_hsd<G: AsRef<[f64]>>(groups: &[G], alpha: f64) -> Result<TukeyResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg("alpha must lie in (0, 1)"));
    }
    let anova = anova_oneway(groups)?;
    let k = groups.len();
    let df = anova.df_within as f64;
    let q_crit = studentized_range_quantile(1.0 - alpha, k, df);
    let means: Vec<f64> = groups.iter().map(|g| mean(g.as_ref())).collect();
    let sizes: Vec<f64> = groups.iter().map(|g| g.as_ref().len() as f64).collect();
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let diff = means[j] - means[i];
            let se = (anova.ms_within / 2.0 * (1.0 / sizes[i] + 1.0 / sizes[j])).sqrt();
            let half = q_crit * se;
            let p_adj = if se > 0.0 {
                1.0 - studentized_range_cdf(diff.abs() / se, k, df)
            } else if diff == 0.0 {
                1.0
            } else {
                0.0
            };
            pairs.push(TukeyPair {
                i,
                j,
                diff,
                lower: diff - half,
                upper: diff + half,
                p_adj: p_adj.clamp(0.0, 1.0),
            });
        }
    }
    Ok(TukeyResult {
        alpha,
        q_crit,
        df: anova.df_within,
        pairs,
    })
}

/// `"*"` when `p < alpha`, else empty.
pub fn star(p: f64, alpha: f64) -> &'static str {
    if p < alpha {
        "*"
    } else {
        ""
    }
}
