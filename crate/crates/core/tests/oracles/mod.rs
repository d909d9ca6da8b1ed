//! Slow, direct reference implementations used to check the library.
//! Nothing here calls into the crate under test.
#![allow(dead_code)]

/// Rank of `xs[i]` = 1 + (# strictly smaller) + (# ties other than itself) / 2.
pub fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&v| {
            let below = xs.iter().filter(|&&o| o < v).count() as f64;
            let ties = xs.iter().filter(|&&o| o == v).count() as f64;
            1.0 + below + (ties - 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}

pub fn brute_spearman(a: &[f64], b: &[f64]) -> f64 {
    brute_pearson(&brute_ranks(a), &brute_ranks(b))
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Standardized ridge through the normal equations `(ZᵀZ + λI) w = Zᵀ(y − ȳ)`;
/// returns in-sample predictions for `rows` and predictions for `test`.
pub fn ridge_predictions(rows: &[Vec<f64>], y: &[f64], lambda: f64, test: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for k in 0..d {
        mean[k] = rows.iter().map(|r| r[k]).sum::<f64>() / n as f64;
        sd[k] = (rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n as f64).sqrt();
    }
    let active: Vec<usize> = (0..d).filter(|&k| sd[k] > 0.0).collect();
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| active.iter().map(|&k| (r[k] - mean[k]) / sd[k]).collect())
        .collect();
    let m = active.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for i in 0..n {
        for p in 0..m {
            b[p] += z[i][p] * (y[i] - ybar);
            for q in 0..m {
                a[p][q] += z[i][p] * z[i][q];
            }
        }
    }
    for (p, row) in a.iter_mut().enumerate() {
        row[p] += lambda;
    }
    let w = gauss_solve(a, b);
    test.iter()
        .map(|r| {
            ybar + active
                .iter()
                .zip(&w)
                .map(|(&k, wk)| (r[k] - mean[k]) / sd[k] * wk)
                .sum::<f64>()
        })
        .collect()
}

/// Coefficient on `x` in the regression `y ~ 1 + step + x`.
pub fn multiple_regression_x_coef(x: &[f64], y: &[f64], step: &[f64]) -> f64 {
    let cols = [vec![1.0; x.len()], step.to_vec(), x.to_vec()];
    let mut a = vec![vec![0.0; 3]; 3];
    let mut b = vec![0.0; 3];
    for p in 0..3 {
        for q in 0..3 {
            a[p][q] = cols[p].iter().zip(&cols[q]).map(|(u, v)| u * v).sum();
        }
        b[p] = cols[p].iter().zip(y).map(|(u, v)| u * v).sum();
    }
    gauss_solve(a, b)[2]
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Two-sided Student-t p-value by quadrature of the unnormalized density after
/// `x = tan θ`, divided by the same quadrature over the whole line.
pub fn t_two_sided_p(t: f64, dof: f64) -> f64 {
    let g = |theta: f64| {
        let x = theta.tan();
        let c = theta.cos();
        if c <= 0.0 {
            return 0.0;
        }
        (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0) / (c * c)
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let total = 2.0 * simpson(g, 0.0, half_pi, 200_000);
    let tail = simpson(g, t.abs().atan(), half_pi, 200_000);
    (2.0 * tail / total).min(1.0)
}

/// Population standard deviation of `X·u` computed row by row.
pub fn projection_std(rows: &[Vec<f64>], u: &[f64]) -> f64 {
    let p: Vec<f64> = rows.iter().map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum()).collect();
    let m = p.iter().sum::<f64>() / p.len() as f64;
    (p.iter().map(|v| (v - m).powi(2)).sum::<f64>() / p.len() as f64).sqrt()
}

/// Type-7 sample quantile by the textbook formula.
pub fn quantile7(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}
