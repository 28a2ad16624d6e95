//! Least squares and two-stage least squares with HC1 standard errors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for declaring a column linearly dependent.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub coef: Vec<f64>,
    /// Heteroskedasticity-robust (HC1) standard errors.
    pub se: Vec<f64>,
    /// Conventional homoskedastic standard errors.
    pub se_classic: Vec<f64>,
    pub residuals: Vec<f64>,
    pub n: usize,
    /// Residual degrees of freedom after absorbed parameters.
    pub df: usize,
}

/// Fail with the names of collinear columns if `x` lacks full column rank.
///
/// Columns are scanned left to right; the first one lying in the span of
/// its predecessors is reported together with the predecessors it loads
/// on.
pub fn check_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let (n, k) = x.shape();
    if n < k {
        return Err(Error::TooFewObservations { needed: k, got: n });
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let p = q.dot(&v);
                v -= q * p;
            }
        }
        if norm == 0.0 || v.norm() <= RANK_TOL * norm.max(1.0) {
            let mut culprits = Vec::new();
            if j > 0 && norm > 0.0 {
                let prev = x.columns(0, j).into_owned();
                if let Ok(b) = prev.clone().svd(true, true).solve(&col, 1e-12) {
                    let scale = b.amax().max(1e-300);
                    culprits.extend((0..j).filter(|&i| b[i].abs() > 1e-8 * scale).map(|i| names[i].clone()));
                }
            }
            culprits.push(names[j].clone());
            return Err(Error::RankDeficient(culprits));
        }
        basis.push(v.normalize());
    }
    Ok(())
}

fn inv_upper(r: &DMatrix<f64>) -> DMatrix<f64> {
    let k = r.nrows();
    r.solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("full-rank triangular factor")
}

fn sandwich(xhat: &DMatrix<f64>, bread: &DMatrix<f64>, resid: &DVector<f64>, n: usize, df: usize) -> (Vec<f64>, Vec<f64>) {
    let k = xhat.ncols();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let row = xhat.row(i);
        let e2 = resid[i] * resid[i];
        for a in 0..k {
            for b in 0..k {
                meat[(a, b)] += e2 * row[a] * row[b];
            }
        }
    }
    let scale = n as f64 / df as f64;
    let v = bread * meat * bread * scale;
    let s2 = resid.norm_squared() / df as f64;
    let robust = (0..k).map(|i| v[(i, i)].max(0.0).sqrt()).collect();
    let classic = (0..k).map(|i| (s2 * bread[(i, i)]).max(0.0).sqrt()).collect();
    (robust, classic)
}

fn residual_df(n: usize, k: usize, absorbed: usize) -> Result<usize> {
    let used = k + absorbed;
    if n <= used {
        return Err(Error::TooFewObservations { needed: used + 1, got: n });
    }
    Ok(n - used)
}

/// OLS of `y` on `x`. `absorbed` counts parameters already partialled out
/// (e.g. fixed effects removed by demeaning) for the degrees of freedom.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String], absorbed: usize) -> Result<Fit> {
    let (n, k) = x.shape();
    let df = residual_df(n, k, absorbed)?;
    check_rank(x, names)?;
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let rinv = inv_upper(&r);
    let coef = &rinv * (q.transpose() * y);
    let resid = y - x * &coef;
    let bread = &rinv * rinv.transpose();
    let (se, se_classic) = sandwich(x, &bread, &resid, n, df);
    Ok(Fit {
        coef: coef.iter().copied().collect(),
        se,
        se_classic,
        residuals: resid.iter().copied().collect(),
        n,
        df,
    })
}

/// Two-stage least squares with instruments `z` (same column count as `x`,
/// exogenous columns instrumenting themselves).
pub fn tsls(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    instrument_names: &[String],
    absorbed: usize,
) -> Result<Fit> {
    let (n, k) = x.shape();
    let df = residual_df(n, k, absorbed)?;
    check_rank(x, names)?;
    check_rank(z, instrument_names)?;
    // first stage fitted values
    let zq = z.clone().qr();
    let q = zq.q();
    let xhat = &q * (q.transpose() * x);
    check_rank(&xhat, names)?;
    let hq = xhat.clone().qr();
    let rinv = inv_upper(&hq.r());
    let bread = &rinv * rinv.transpose();
    let coef = &bread * (xhat.transpose() * y);
    let resid = y - x * &coef;
    let (se, se_classic) = sandwich(&xhat, &bread, &resid, n, df);
    Ok(Fit {
        coef: coef.iter().copied().collect(),
        se,
        se_classic,
        residuals: resid.iter().copied().collect(),
        n,
        df,
    })
}

/// Design matrix from equal-length columns.
pub fn design(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_fit() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.7 - 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 + 0.5 * v).collect();
        let fit = ols(&design(&[vec![1.0; 20], x]), &DVector::from_vec(y), &names(&["const", "x"]), 0).unwrap();
        assert!((fit.coef[0] - 1.5).abs() < 1e-12);
        assert!((fit.coef[1] - 0.5).abs() < 1e-12);
        assert!(fit.se.iter().all(|s| *s < 1e-10));
    }

    #[test]
    fn hc1_matches_hand_formula() {
        // single regressor through the origin
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 5.0];
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let b = x.iter().zip(&y).map(|(a, c)| a * c).sum::<f64>() / sxx;
        let meat: f64 = x.iter().zip(&y).map(|(a, c)| (a * (c - b * a)).powi(2)).sum();
        let hand = (meat / (sxx * sxx) * 4.0 / 3.0).sqrt();
        let fit = ols(&design(&[x.to_vec()]), &DVector::from_vec(y.to_vec()), &names(&["x"]), 0).unwrap();
        assert!((fit.coef[0] - b).abs() < 1e-12);
        assert!((fit.se[0] - hand).abs() < 1e-12);
    }

    #[test]
    fn names_collinear_columns() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..10).map(|i| ((i * 7) % 5) as f64).collect();
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let err = check_rank(&design(&[vec![1.0; 10], a, b, c]), &names(&["const", "a", "b", "c"])).unwrap_err();
        match err {
            Error::RankDeficient(cols) => assert_eq!(cols, names(&["a", "b", "c"])),
            e => panic!("{e}"),
        }
        let err = check_rank(&design(&[vec![0.0; 4]]), &names(&["zero"])).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(c) if c == names(&["zero"])));
    }

    #[test]
    fn tsls_exactly_identified_matches_ratio() {
        let z: Vec<f64> = (0..50).map(|i| ((i * 13) % 17) as f64).collect();
        let x: Vec<f64> = z.iter().enumerate().map(|(i, v)| v + ((i * 7) % 3) as f64).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 2.0 * v + ((i * 5) % 4) as f64).collect();
        let fit = tsls(
            &design(&[x.clone()]),
            &design(&[z.clone()]),
            &DVector::from_vec(y.clone()),
            &names(&["x"]),
            &names(&["z"]),
            0,
        )
        .unwrap();
        let zy: f64 = z.iter().zip(&y).map(|(a, b)| a * b).sum();
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((fit.coef[0] - zy / zx).abs() < 1e-10);
    }
}
