//! Gaussian-copula marriage matching.
//!
//! Men are ranked by latent schooling and given normal scores `u`. Each man
//! draws a key `c*u + sqrt(1-c^2)*eta`; the k-th smallest key is paired with
//! the k-th least educated woman. `c = 1` is comonotone pairing, `c = 0` is
//! random pairing. Education values are only permuted, never edited.
//!
//! The copula parameter `c` is calibrated at the population level from the
//! Hermite expansion of the two empirical quantile functions, not by tuning
//! the realized sample correlation, so matched samples keep their sampling
//! noise around the target.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const HERMITE_TERMS: usize = 8;

/// Indices that sort `x` ascending (stable).
pub(crate) fn argsort(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    idx
}

/// Normal scores `Phi^-1((i + 0.5) / n)` for `i = 0..n`.
pub(crate) fn normal_scores(n: usize) -> Vec<f64> {
    let z = Normal::standard();
    (0..n)
        .map(|i| z.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect()
}

/// Normalized Hermite coefficients `a_1..a_K` of a sorted sample.
fn hermite_coefficients(sorted: &[f64], scores: &[f64]) -> [f64; HERMITE_TERMS] {
    let n = sorted.len() as f64;
    let mut acc = [0.0; HERMITE_TERMS];
    for (&x, &u) in sorted.iter().zip(scores) {
        let (mut prev, mut cur) = (1.0, u);
        for (k, slot) in acc.iter_mut().enumerate() {
            *slot += x * cur;
            let next = u * cur - (k + 1) as f64 * prev;
            prev = cur;
            cur = next;
        }
    }
    let mut factorial = 1.0;
    for (k, slot) in acc.iter_mut().enumerate() {
        factorial *= (k + 1) as f64;
        *slot /= n * factorial.sqrt();
    }
    acc
}

fn population_sd(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let m = sorted.iter().sum::<f64>() / n;
    (sorted.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
}

/// Copula parameter whose implied population Pearson correlation between
/// the two marginals equals `target`.
pub fn calibrate_copula(sorted_x: &[f64], sorted_y: &[f64], target: f64) -> f64 {
    let n = sorted_x.len();
    if n < 2 || target <= 0.0 {
        return 0.0;
    }
    let (sx, sy) = (population_sd(sorted_x), population_sd(sorted_y));
    if sx == 0.0 || sy == 0.0 {
        return 0.0;
    }
    let scores = normal_scores(n);
    let a = hermite_coefficients(sorted_x, &scores);
    let b = hermite_coefficients(sorted_y, &scores);
    let implied = |c: f64| -> f64 {
        let mut ck = 1.0;
        let mut s = 0.0;
        for k in 0..HERMITE_TERMS {
            ck *= c;
            s += ck * a[k] * b[k];
        }
        s / (sx * sy)
    };
    if target >= implied(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if implied(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_pools(males: usize, females: usize) -> Result<()> {
    if males == females {
        return Ok(());
    }
    let (deficit, short_side) = if males < females {
        (females - males, "males")
    } else {
        (males - females, "females")
    };
    Err(Error::UnbalancedPools {
        males,
        females,
        deficit,
        short_side,
    })
}

/// Pair men and women so that spouses' latents correlate at `rho_target`.
///
/// Returns, for each man (by index into `men`), the index of his wife in
/// `women`.
pub fn match_latents<R: Rng + ?Sized>(
    men: &[f64],
    women: &[f64],
    rho_target: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_pools(men.len(), women.len())?;
    if !rho_target.is_finite() {
        return Err(Error::NonFinite("rho_target"));
    }
    if !(0.0..=1.0).contains(&rho_target) {
        return Err(Error::param("rho_target", "must lie in [0, 1]"));
    }
    if men.iter().chain(women).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("edu_latent"));
    }
    let n = men.len();
    let men_order = argsort(men);
    let women_order = argsort(women);
    let xs: Vec<f64> = men_order.iter().map(|&i| men[i]).collect();
    let ys: Vec<f64> = women_order.iter().map(|&i| women[i]).collect();
    let c = calibrate_copula(&xs, &ys, rho_target);

    // keys indexed by the man's rank
    let keys: Vec<f64> = if c >= 1.0 {
        normal_scores(n)
    } else {
        let s = (1.0 - c * c).sqrt();
        let scores = if c > 0.0 { normal_scores(n) } else { vec![0.0; n] };
        scores
            .iter()
            .map(|u| {
                let eta: f64 = rng.sample(StandardNormal);
                c * u + s * eta
            })
            .collect()
    };
    let key_order = argsort(&keys);
    let mut wife = vec![0usize; n];
    for (k, &rank) in key_order.iter().enumerate() {
        wife[men_order[rank]] = women_order[k];
    }
    Ok(wife)
}
