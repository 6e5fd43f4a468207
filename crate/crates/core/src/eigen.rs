//! Eigenvalues of small dense real matrices.
//!
//! Balancing by powers of two, Householder reduction to upper Hessenberg
//! form, then Francis double-shift QR with deflation of 1x1 and 2x2 blocks.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("QR iteration did not converge within {0} sweeps")]
    NonConvergence(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub eigenvalues: Vec<Complex64>,
    /// `max(|sum(lambda) - tr M|, |prod(lambda) - det M|)`, each relative to
    /// the matching matrix scale.
    pub backward_error: f64,
}

impl EigenResult {
    /// Eigenvalues ordered by decreasing modulus, ties by decreasing
    /// imaginary part.
    pub fn sorted_by_modulus(&self) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(y.im.total_cmp(&x.im)));
        v
    }
}

fn check(m: &[Vec<f64>]) -> Result<usize, EigenError> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(EigenError::NotSquare);
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    Ok(n)
}

pub fn trace(m: &[Vec<f64>]) -> f64 {
    (0..m.len()).map(|i| m[i][i]).sum()
}

/// Determinant by LU factorization with partial pivoting.
pub fn determinant(m: &[Vec<f64>]) -> Result<f64, EigenError> {
    let n = check(m)?;
    let mut a = m.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        if a[p][k] == 0.0 {
            return Ok(0.0);
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    Ok(det)
}

fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut r, mut c) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[i][j] *= g;
                }
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k + 1][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vn);
        // A <- H A
        for j in 0..n {
            let s: f64 = v.iter().enumerate().map(|(i, vi)| vi * a[k + 1 + i][j]).sum();
            for (i, vi) in v.iter().enumerate() {
                a[k + 1 + i][j] -= 2.0 * vi * s;
            }
        }
        // A <- A H
        for row in a.iter_mut() {
            let s: f64 = v.iter().enumerate().map(|(j, vj)| row[k + 1 + j] * vj).sum();
            for (j, vj) in v.iter().enumerate() {
                row[k + 1 + j] -= 2.0 * s * vj;
            }
        }
        a[k + 1][k] = alpha;
        for row in a.iter_mut().skip(k + 2) {
            row[k] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hqr(a: &mut [Vec<f64>], budget: usize) -> Result<Vec<Complex64>, EigenError> {
    let n = a.len();
    let mut wri = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(wri);
    }
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n - 1;
    let mut t = 0.0;
    let mut its = 0usize;
    let mut sweeps = 0usize;
    loop {
        let mut l = nn;
        while l > 0 {
            let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
            if s == 0.0 {
                s = anorm;
            }
            if a[l][l - 1].abs() <= eps * s {
                a[l][l - 1] = 0.0;
                break;
            }
            l -= 1;
        }
        let mut x = a[nn][nn];
        if l == nn {
            wri[nn] = Complex64::new(x + t, 0.0);
            its = 0;
            if nn == 0 {
                break;
            }
            nn -= 1;
            continue;
        }
        let mut y = a[nn - 1][nn - 1];
        let mut w = a[nn][nn - 1] * a[nn - 1][nn];
        if l == nn - 1 {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let mut z = q.abs().sqrt();
            x += t;
            if q >= 0.0 {
                z = p + sign(z, p);
                wri[nn - 1] = Complex64::new(x + z, 0.0);
                wri[nn] = wri[nn - 1];
                if z != 0.0 {
                    wri[nn] = Complex64::new(x - w / z, 0.0);
                }
            } else {
                wri[nn] = Complex64::new(x + p, -z);
                wri[nn - 1] = wri[nn].conj();
            }
            its = 0;
            if nn < 2 {
                break;
            }
            nn -= 2;
            continue;
        }
        if sweeps >= budget {
            return Err(EigenError::NonConvergence(budget));
        }
        if its > 0 && its.is_multiple_of(10) {
            // exceptional shift
            t += x;
            for i in 0..=nn {
                a[i][i] -= x;
            }
            let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;
        sweeps += 1;
        let (mut p, mut q, mut r, mut z);
        let mut m = nn - 2;
        loop {
            z = a[m][m];
            r = x - z;
            let s0 = y - z;
            p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
            q = a[m + 1][m + 1] - z - r - s0;
            r = a[m + 2][m + 1];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a[m][m - 1].abs() * (q.abs() + r.abs());
            let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
            if u <= eps * v {
                break;
            }
            m -= 1;
        }
        for i in m..nn - 1 {
            a[i + 2][i] = 0.0;
            if i != m {
                a[i + 2][i - 1] = 0.0;
            }
        }
        for k in m..nn {
            if k != m {
                p = a[k][k - 1];
                q = a[k + 1][k - 1];
                r = if k + 1 != nn { a[k + 2][k - 1] } else { 0.0 };
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = sign((p * p + q * q + r * r).sqrt(), p);
            if s == 0.0 {
                continue;
            }
            if k == m {
                if l != m {
                    a[k][k - 1] = -a[k][k - 1];
                }
            } else {
                a[k][k - 1] = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for j in k..=nn {
                let mut pp = a[k][j] + q * a[k + 1][j];
                if k + 1 != nn {
                    pp += r * a[k + 2][j];
                    a[k + 2][j] -= pp * z;
                }
                a[k + 1][j] -= pp * y;
                a[k][j] -= pp * x;
            }
            let mmin = if nn < k + 3 { nn } else { k + 3 };
            for i in l..=mmin {
                let mut pp = x * a[i][k] + y * a[i][k + 1];
                if k + 1 != nn {
                    pp += z * a[i][k + 2];
                    a[i][k + 2] -= pp * r;
                }
                a[i][k + 1] -= pp * q;
                a[i][k] -= pp;
            }
        }
    }
    Ok(wri)
}

/// All eigenvalues of a real square matrix with at most a few dozen rows.
///
/// The QR budget is `100 n` double-shift sweeps in total.
pub fn eigen_small(m: &[Vec<f64>]) -> Result<EigenResult, EigenError> {
    let n = check(m)?;
    let mut a = m.to_vec();
    balance(&mut a);
    hessenberg(&mut a);
    let eigenvalues = hqr(&mut a, 100 * n.max(1))?;

    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let sum: Complex64 = eigenvalues.iter().sum();
    let prod: Complex64 = eigenvalues.iter().product();
    let det = determinant(m)?;
    let tr_err = (sum - trace(m)).norm() / (n as f64 * scale);
    let det_scale = scale.powi(n as i32).max(det.abs()).max(f64::MIN_POSITIVE);
    let det_err = (prod - det).norm() / det_scale;
    Ok(EigenResult { eigenvalues, backward_error: tr_err.max(det_err) })
}
