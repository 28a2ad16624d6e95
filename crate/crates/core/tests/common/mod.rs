//! Reference implementations written independently of the library, used as
//! oracles by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use mobility_lab::data_io::RegionId;
use mobility_lab::regional::{Period, RegionalStat, StatKind};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson correlation through the two-pass textbook formula.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Pearson correlation from all pairwise differences, O(n^2).
pub fn pearson_pairwise(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
    }
    sxy / (sxx * syy).sqrt()
}

pub fn ols_slope(y: &[f64], x: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Midrank of each value by counting, O(n^2).
pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson_pairwise(&brute_ranks(x), &brute_ranks(y))
}

/// Correlation of pairs counted in both orientations.
pub fn double_entry(pairs: &[(f64, f64)]) -> f64 {
    let x: Vec<f64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let y: Vec<f64> = pairs.iter().flat_map(|&(a, b)| [b, a]).collect();
    pearson_pairwise(&x, &y)
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            for c in col..k {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Subtract period means.
pub fn demean(v: &[f64], period: &[i32]) -> Vec<f64> {
    let mut acc: HashMap<i32, (f64, usize)> = HashMap::new();
    for (x, p) in v.iter().zip(period) {
        let e = acc.entry(*p).or_default();
        e.0 += x;
        e.1 += 1;
    }
    v.iter().zip(period).map(|(x, p)| x - acc[p].0 / acc[p].1 as f64).collect()
}

/// Just-identified IV with period fixed effects: `(Z'X)^-1 Z'y` on
/// within-period deviations. With `z == x` this is OLS.
pub fn fe_iv(y: &[f64], x: &[Vec<f64>], z: &[Vec<f64>], period: &[i32]) -> Vec<f64> {
    let y = demean(y, period);
    let x: Vec<Vec<f64>> = x.iter().map(|c| demean(c, period)).collect();
    let z: Vec<Vec<f64>> = z.iter().map(|c| demean(c, period)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let zx: Vec<Vec<f64>> = z.iter().map(|zi| x.iter().map(|xj| dot(zi, xj)).collect()).collect();
    let zy: Vec<f64> = z.iter().map(|zi| dot(zi, &y)).collect();
    solve(zx, zy)
}

pub type Cells = BTreeMap<(RegionId, Period, StatKind), RegionalStat>;

pub fn cells(panel: &[RegionalStat]) -> Cells {
    panel
        .iter()
        .map(|s| ((s.region_id.clone(), s.period, s.stat_kind), s.clone()))
        .collect()
}

/// OLS and split-IV persistence of `kind` on its previous-period value.
pub fn persistence(cells: &Cells, kind: StatKind) -> (f64, f64, usize) {
    let (mut y, mut x, mut xa, mut xb, mut t) = (vec![], vec![], vec![], vec![], vec![]);
    for ((r, p, k), s) in cells {
        if *k != kind {
            continue;
        }
        let Some(prev) = cells.get(&(r.clone(), Period(p.0 - 1), kind)) else { continue };
        let Some((a, b)) = prev.halves() else { continue };
        y.push(s.value);
        x.push(prev.value);
        xa.push(a);
        xb.push(b);
        t.push(p.0);
    }
    let ols = fe_iv(&y, &[x.clone()], &[x], &t)[0];
    let iv = fe_iv(&y, &[xa], &[xb], &t)[0];
    (ols, iv, y.len())
}

/// Split-IV coefficients of `dependent` on current-period `regressors`.
pub fn split_iv(cells: &Cells, dependent: StatKind, regressors: &[StatKind]) -> Vec<f64> {
    let k = regressors.len();
    let (mut y, mut xa, mut xb, mut t) = (vec![], vec![vec![]; k], vec![vec![]; k], vec![]);
    for ((r, p, kind), s) in cells {
        if *kind != dependent {
            continue;
        }
        let halves: Option<Vec<(f64, f64)>> = regressors
            .iter()
            .map(|rk| cells.get(&(r.clone(), *p, *rk)).and_then(|c| c.halves()))
            .collect();
        let Some(h) = halves else { continue };
        y.push(s.value);
        for (j, (a, b)) in h.into_iter().enumerate() {
            xa[j].push(a);
            xb[j].push(b);
        }
        t.push(p.0);
    }
    fe_iv(&y, &xa, &xb, &t)
}
