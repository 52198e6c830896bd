//! Distribution of the studentized range.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const OUTER_NODES: usize = 64;
const INNER_NODES: usize = 128;
/// Beyond this many degrees of freedom the pooled SD is treated as exact.
const DF_EXACT: f64 = 25_000.0;

fn rule(n: usize, cell: &'static OnceLock<GaussLegendre>) -> &'static GaussLegendre {
    cell.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(n).unwrap()))
}

fn outer() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    rule(OUTER_NODES, &R)
}

fn inner() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    rule(INNER_NODES, &R)
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(range of k standard normals ≤ w)`.
fn range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let v = k as f64
        * inner().integrate(-8.0, 8.0, |z| {
            let d = (norm_cdf(z) - norm_cdf(z - w)).max(0.0);
            phi(z) * d.powi(km1)
        });
    v.clamp(0.0, 1.0)
}

/// `P(Q ≤ q)` for the studentized range of `k` means with `df` degrees of
/// freedom in the variance estimate.
///
/// Integrates the normal range distribution against the density of
/// `s = χ_df / √df` with fixed Gauss–Legendre rules. The result is clamped to
/// `[0, 1]`; `q ≤ 0` gives 0 and non-finite `q` gives 1.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    assert!(df >= 1.0, "studentized range needs df >= 1");
    if q.is_nan() {
        return f64::NAN;
    }
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    if df > DF_EXACT {
        return range_cdf(q, k);
    }
    let half = df / 2.0;
    let log_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2;
    let spread = 8.0 / (2.0 * df).sqrt();
    let (lo, hi) = ((1.0 - spread).max(0.0), 1.0 + spread);
    let v = outer().integrate(lo, hi, |s| {
        if s <= 0.0 {
            return 0.0;
        }
        let dens = (log_norm + (df - 1.0) * s.ln() - half * s * s).exp();
        dens * range_cdf(q * s, k)
    });
    v.clamp(0.0, 1.0)
}

/// Smallest `q` with `studentized_range_cdf(q, k, df) ≥ p`, by bisection.
pub fn studentized_range_quantile(p: f64, k: usize, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs 0 < p < 1");
    let mut hi = 4.0;
    while studentized_range_cdf(hi, k, df) < p {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    0.5 * (lo + hi)
}
