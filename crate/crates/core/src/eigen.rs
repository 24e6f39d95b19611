//! Lowest eigenpairs of real symmetric operators: Sturm-sequence bisection
//! with inverse iteration for tridiagonal matrices, and Lanczos with full
//! reorthogonalization for larger sparse operators.

use crate::error::{Error, Result};

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..diag.len() {
        let o2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { o2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r =
            if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// Solves `(T - shift) x = b` for symmetric tridiagonal `T` with partial
/// pivoting (LAPACK-style `gtsv`).
fn tridiagonal_solve(diag: &[f64], off: &[f64], shift: f64, b: &mut [f64]) {
    let n = diag.len();
    if n == 1 {
        let d = diag[0] - shift;
        b[0] /= if d == 0.0 { f64::EPSILON } else { d };
        return;
    }
    // After elimination `dl` holds the second superdiagonal fill-in.
    let mut dl: Vec<f64> = off.to_vec();
    let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
    let mut du: Vec<f64> = off.to_vec();
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = f64::EPSILON;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 1 < n - 1 {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            }
            du[i] = temp;
            b.swap(i, i + 1);
            b[i + 1] -= fact * b[i];
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = f64::EPSILON;
    }
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Lowest `count` eigenpairs of the symmetric tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off`, ascending. Eigenvectors have unit
/// Euclidean norm.
pub fn tridiagonal_lowest(diag: &[f64], off: &[f64], count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::Eigensolver(format!(
            "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
            n,
            off.len()
        )));
    }
    if count > n {
        return Err(Error::Eigensolver(format!(
            "requested {count} eigenpairs of a {n}×{n} matrix"
        )));
    }
    let (glo, ghi) = gershgorin(diag, off);
    let scale = glo.abs().max(ghi.abs()).max(1.0);
    let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(count);
    for k in 0..count {
        let (mut lo, mut hi) = (glo - 1e-12 * scale, ghi + 1e-12 * scale);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if sturm_count(diag, off, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        // Inverse iteration from a deterministic start, orthogonalized against
        // earlier vectors to separate clustered eigenvalues.
        let perturb = 4.0 * f64::EPSILON * scale;
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i * 7919 + k * 104729) % 97) as f64 / 97.0)
            .collect();
        normalize(&mut v);
        for _ in 0..6 {
            tridiagonal_solve(diag, off, lambda + perturb, &mut v);
            for (_, u) in &out {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
            }
            if normalize(&mut v) == 0.0 || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Eigensolver(format!(
                    "inverse iteration broke down for eigenvalue {k}"
                )));
            }
        }
        out.push((lambda, v));
    }
    Ok(out)
}

/// Lowest `count` eigenpairs of a symmetric operator of dimension `n` given
/// only through `apply(x, y)` computing `y = A x`.
///
/// Each eigenpair comes from a separate Lanczos run (full
/// reorthogonalization) restricted to the orthogonal complement of the pairs
/// already found, so degenerate eigenvalues are recovered with their full
/// multiplicity. A run stops once the Ritz residual is below
/// `tol · spectral scale`.
pub fn lanczos_lowest<F>(
    n: usize,
    count: usize,
    tol: f64,
    max_iter: usize,
    apply: F,
) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if count == 0 || count > n {
        return Err(Error::Eigensolver(format!(
            "requested {count} eigenpairs of dimension {n}"
        )));
    }
    let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(count);
    for run in 0..count {
        let pair = lanczos_single(n, tol, max_iter, run, &found, &apply)?;
        found.push(pair);
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(found)
}

fn project_out(v: &mut [f64], against: &[(f64, Vec<f64>)]) {
    for (_, u) in against {
        let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
    }
}

fn lanczos_single<F>(
    n: usize,
    tol: f64,
    max_iter: usize,
    seed: usize,
    deflate: &[(f64, Vec<f64>)],
    apply: &F,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let max_iter = max_iter.min(n - deflate.len());
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q: Vec<f64> = (0..n)
        .map(|i| {
            1.0 + ((i.wrapping_mul(2654435761).wrapping_add(seed * 40503)) % 1000) as f64 / 1000.0
        })
        .collect();
    project_out(&mut q, deflate);
    normalize(&mut q);
    let mut w = vec![0.0; n];
    let check_every = 10;
    loop {
        apply(&q, &mut w);
        project_out(&mut w, deflate);
        let a: f64 = q.iter().zip(&w).map(|(x, y)| x * y).sum();
        alpha.push(a);
        basis.push(q.clone());
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = b.iter().zip(&w).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
            project_out(&mut w, deflate);
        }
        let m = basis.len();
        let bnorm = normalize(&mut w);
        let exhausted = bnorm < 1e-14 * a.abs().max(1.0) || m >= max_iter;
        if m.is_multiple_of(check_every) || exhausted {
            let ritz = tridiagonal_lowest(&alpha, &beta, 1)?;
            let scale = alpha.iter().fold(1.0f64, |s, x| s.max(x.abs()));
            let (lambda, y) = &ritz[0];
            let converged = (bnorm * y[m - 1]).abs() <= tol * scale;
            if converged || exhausted {
                if !converged {
                    return Err(Error::Eigensolver(format!(
                        "Lanczos did not converge in {m} iterations"
                    )));
                }
                let mut v = vec![0.0; n];
                for (coef, b) in y.iter().zip(&basis) {
                    v.iter_mut().zip(b).for_each(|(x, bb)| *x += coef * bb);
                }
                project_out(&mut v, deflate);
                normalize(&mut v);
                return Ok((*lambda, v));
            }
        }
        beta.push(bnorm);
        q.copy_from_slice(&w);
    }
}
