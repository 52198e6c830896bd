//! Shapiro–Wilk W test using Royston's approximation (AS R94).

use statrs::distribution::{ContinuousCDF, Normal};

use super::SwResult;
use crate::error::{Error, Result};

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Coefficients for the upper half of the order statistics, largest first.
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let std_normal = Normal::standard();
    let an = n as f64;
    let m: Vec<f64> = (1..=half)
        .map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        (2, fac)
    } else {
        (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

fn p_value(w: f64, n: usize) -> f64 {
    let an = n as f64;
    if n == 3 {
        let pw = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - std::f64::consts::FRAC_PI_3);
        return pw.clamp(0.0, 1.0);
    }
    let mut w1 = (1.0 - w).ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if w1 >= gamma {
            return 1e-99;
        }
        w1 = -(gamma - w1).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    let z = (w1 - m) / s;
    Normal::standard().sf(z)
}

/// Shapiro–Wilk normality test for `3 ≤ n ≤ 5000` observations.
pub fn shapiro_wilk(x: &[f64]) -> Result<SwResult> {
    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::arg(format!(
            "Shapiro-Wilk needs 3 to 5000 observations, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("Shapiro-Wilk sample contains non-finite values"));
    }
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ssq: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum();
    let range = xs[n - 1] - xs[0];
    if range <= 0.0 || ssq <= f64::EPSILON * range * range {
        return Err(Error::Numerical("Shapiro-Wilk sample has zero variance".into()));
    }
    let a = coefficients(n);
    let b: f64 = a
        .iter()
        .enumerate()
        .map(|(i, ai)| ai * (xs[n - 1 - i] - xs[i]))
        .sum();
    let w = (b * b / ssq).min(1.0);
    Ok(SwResult {
        w,
        p_value: p_value(w, n),
        n,
    })
}
