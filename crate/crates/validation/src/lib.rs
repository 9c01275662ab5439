//! Independent reference computations used to check `specsense`.
//!
//! Nothing here calls into the library's numerical paths: eigenvalues come
//! from characteristic polynomials, the normal tail from quadrature and
//! the eigenvalue-ratio moments from the largest/smallest eigenvalue laws
//! evaluated separately.

use std::f64::consts::PI;
use std::io::Write;

/// Coefficients `c[0..=n]` of `det(xI − A) = Σ c[k] xᵏ` (Faddeev–LeVerrier).
pub fn characteristic_polynomial(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{n−k+1}·I
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| rows[i][l] * m[l][j]).sum::<f64>();
            }
            next[i][i] += c[n - k + 1];
        }
        m = next;
        let trace_am: f64 = (0..n).map(|i| (0..n).map(|l| rows[i][l] * m[l][i]).sum::<f64>()).sum();
        c[n - k] = -trace_am / k as f64;
    }
    c
}

#[derive(Clone, Copy, Debug)]
struct C(f64, f64);

impl C {
    fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
    fn sub(self, o: C) -> C {
        C(self.0 - o.0, self.1 - o.1)
    }
    fn mul(self, o: C) -> C {
        C(self.0 * o.0 - self.1 * o.1, self.0 * o.1 + self.1 * o.0)
    }
    fn div(self, o: C) -> C {
        let d = o.0 * o.0 + o.1 * o.1;
        C((self.0 * o.0 + self.1 * o.1) / d, (self.1 * o.0 - self.0 * o.1) / d)
    }
}

fn horner(c: &[f64], x: C) -> C {
    c.iter().rev().fold(C(0.0, 0.0), |acc, &a| acc.mul(x).add(C(a, 0.0)))
}

/// Real parts of all roots of a monic polynomial (Durand–Kerner, then
/// Newton polishing on the real line).
pub fn polynomial_real_roots(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let bound = 1.0 + c[..n].iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut z: Vec<C> = (0..n)
        .map(|k| {
            let ang = 2.0 * PI * k as f64 / n as f64 + 0.4;
            C(bound * ang.cos(), bound * ang.sin())
        })
        .collect();
    for _ in 0..5000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = C(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den = den.mul(z[i].sub(z[j]));
                }
            }
            let step = horner(c, z[i]).div(den);
            z[i] = z[i].sub(step);
            delta = delta.max(step.0.abs() + step.1.abs());
        }
        if delta < 1e-15 * bound {
            break;
        }
    }
    let dc: Vec<f64> = (1..=n).map(|k| k as f64 * c[k]).collect();
    z.iter()
        .map(|r| {
            let mut x = r.0;
            for _ in 0..3 {
                let d = horner(&dc, C(x, 0.0)).0;
                if d.abs() > 1e-300 {
                    let nx = x - horner(c, C(x, 0.0)).0 / d;
                    if nx.is_finite() {
                        x = nx;
                    }
                }
            }
            x
        })
        .collect()
}

/// Eigenvalues of a small symmetric matrix, descending.
pub fn eigenvalues_by_characteristic_polynomial(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut r = polynomial_real_roots(&characteristic_polynomial(rows));
    r.sort_by(|a, b| b.total_cmp(a));
    r
}

fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Upper normal tail by composite Simpson quadrature of the density over
/// `[t, 40]`.
pub fn q_by_quadrature(t: f64) -> f64 {
    let upper = 40.0;
    if t >= upper {
        return 0.0;
    }
    let intervals = 200_000;
    let h = (upper - t) / intervals as f64;
    let mut sum = normal_density(t) + normal_density(upper);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * normal_density(t + h * i as f64);
    }
    sum * h / 3.0
}

/// Inverse of [`q_by_quadrature`] by bisection.
pub fn q_inverse_by_quadrature(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if q_by_quadrature(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean and variance of `λ_max/λ_min` for a white sample covariance of
/// `n_eq` vectors with noise power `sigma2`: the largest eigenvalue from
/// its Tracy–Widom centring and scaling, the smallest at the
/// Marchenko–Pastur edge.
pub fn eigen_ratio_moments(n_eq: f64, dim: usize, sigma2: f64, tw_mean: f64, tw_var: f64) -> (f64, f64) {
    let l = dim as f64;
    let centre = ((n_eq - 1.0).sqrt() + l.sqrt()).powi(2);
    let scale = ((n_eq - 1.0).sqrt() + l.sqrt()) * (1.0 / (n_eq - 1.0).sqrt() + 1.0 / l.sqrt()).powf(1.0 / 3.0);
    let largest_mean = sigma2 * (centre + scale * tw_mean) / n_eq;
    let largest_var = sigma2 * sigma2 * scale * scale * tw_var / (n_eq * n_eq);
    let smallest = sigma2 / n_eq * (n_eq.sqrt() - l.sqrt()).powi(2);
    (largest_mean / smallest, largest_var / (smallest * smallest))
}

/// `power·a^|i−j|`.
pub fn ar1_covariance_rows(dim: usize, coefficient: f64, power: f64) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| power * coefficient.powi((i as i32 - j as i32).abs())).collect())
        .collect()
}

/// One-line outcome of an acceptance criterion, written to stderr even
/// when the test harness captures output.
pub fn report(id: &str, pass: bool, detail: &str) -> String {
    let line = format!("criterion {id}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr(), "{line}");
    line
}
