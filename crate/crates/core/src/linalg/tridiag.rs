use super::SymmetricMatrix;

/// Householder reduction to symmetric tridiagonal form.
///
/// Returns the diagonal and the sub-diagonal (length `n - 1`).
fn tridiagonalize(m: &SymmetricMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let norm = (lo..n).map(|i| a[i * n + k] * a[i * n + k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[lo * n + k];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for i in lo..n {
            v[i] = a[i * n + k];
        }
        v[lo] -= alpha;
        let vnorm = (lo..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for i in lo..n {
            v[i] /= vnorm;
        }
        // p = A v on the trailing block, then w = p - (vᵀp) v.
        for i in lo..n {
            p[i] = (lo..n).map(|j| a[i * n + j] * v[j]).sum();
        }
        let vp: f64 = (lo..n).map(|i| v[i] * p[i]).sum();
        for i in lo..n {
            p[i] -= vp * v[i];
        }
        for i in lo..n {
            for j in i..n {
                let upd = a[i * n + j] - 2.0 * (v[i] * p[j] + p[i] * v[j]);
                a[i * n + j] = upd;
                a[j * n + i] = upd;
            }
        }
        a[lo * n + k] = alpha;
        a[k * n + lo] = alpha;
        for i in (lo + 1)..n {
            a[i * n + k] = 0.0;
            a[k * n + i] = 0.0;
        }
    }

    let diag = (0..n).map(|i| a[i * n + i]).collect();
    let off = (0..n.saturating_sub(1)).map(|i| a[(i + 1) * n + i]).collect();
    (diag, off)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Bisects for the smallest `x` in `[lo, hi]` with `sturm_count(x) >= target`.
fn bisect(diag: &[f64], off: &[f64], mut lo: f64, mut hi: f64, target: usize, pivmin: f64) -> f64 {
    for _ in 0..256 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        if sturm_count(diag, off, mid, pivmin) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(λ_max, λ_min)` of a symmetric matrix.
pub fn extreme_eigenvalues(m: &SymmetricMatrix) -> (f64, f64) {
    let n = m.dim();
    assert!(n > 0, "empty matrix");
    if n == 1 {
        let v = m.get(0, 0);
        return (v, v);
    }
    let (diag, off) = tridiagonalize(m);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 }
            + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = lo.abs().max(hi.abs());
    if scale == 0.0 {
        return (0.0, 0.0);
    }
    let pad = 4.0 * f64::EPSILON * scale;
    lo -= pad;
    hi += pad;
    let max_off2 = off.iter().map(|e| e * e).fold(0.0, f64::max);
    let pivmin = f64::MIN_POSITIVE.max(f64::MIN_POSITIVE * max_off2);

    let largest = bisect(&diag, &off, lo, hi, n, pivmin);
    let smallest = bisect(&diag, &off, lo, hi, 1, pivmin);
    (largest, smallest)
}
