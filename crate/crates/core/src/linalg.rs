//! Small dense linear-algebra helpers.
//!
//! Everything here operates on `Vec<f64>` / `&[f64]` with square matrices
//! stored row-major. The sizes involved (metric matrices, Ritz blocks) are
//! small enough that a dependency-free implementation is the simplest thing
//! that works, and it keeps the crate portable to wasm.

/// Dot product. Panics on length mismatch.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y = M x` for a row-major `d x d` matrix.
pub fn mat_vec(m: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.len(), d * d);
    assert_eq!(x.len(), d);
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], x)).collect()
}

/// Linear-interpolation percentile (the numpy default). `q` in [0, 100].
/// Returns `None` on empty input.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let rank = q / 100.0 * (xs.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(xs.len() - 1);
    let frac = rank - lo as f64;
    Some(xs[lo] + frac * (xs[hi] - xs[lo]))
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// `eigenvectors[k]` is the unit eigenvector for `eigenvalues[k]`.
pub fn jacobi_eigh(matrix: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(matrix.len(), d * d);
    let mut a = matrix.to_vec();
    // v starts as identity and accumulates the rotations (columns = eigenvectors).
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += a[i * d + j] * a[i * d + j];
                }
            }
        }
        s
    };
    let scale: f64 = (0..d).map(|i| matrix[i * d + i].abs()).fold(1e-300, f64::max);
    let tol = (scale * 1e-15).powi(2).max(1e-300);
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j * d + j].total_cmp(&a[i * d + i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * d + i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..d).map(|row| v[row * d + col]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

/// Top principal axes of a point cloud.
pub struct PrincipalAxes {
    /// Column mean of the input points.
    pub mean: Vec<f64>,
    /// `r` orthonormal direction vectors, by descending variance.
    pub axes: Vec<Vec<f64>>,
    /// Sample variances (covariance eigenvalues) along each axis.
    pub eigenvalues: Vec<f64>,
}

impl PrincipalAxes {
    /// Coordinates of `x` in the axis basis, after centering.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.axes.iter().map(|axis| dot(axis, &centered)).collect()
    }
}

/// Computes the top-`r` principal axes of `points` (rows are observations)
/// by block subspace iteration with Rayleigh-Ritz extraction, at a relative
/// residual tolerance of 1e-12.
pub fn principal_axes(points: &[Vec<f64>], r: usize) -> Option<PrincipalAxes> {
    principal_axes_with(points, r, 1e-12, None)
}

/// [`principal_axes`] with an explicit relative residual tolerance and an
/// optional iteration cap.
///
/// The sample covariance (denominator `n - 1`) is never materialized: each
/// iteration applies it through the centered data matrix, which keeps the
/// cost at `O(n * d * r)` per step for high-dimensional inputs. Sign
/// convention: each axis is flipped so its largest-magnitude entry is
/// positive (first such entry on ties). When the residual target is not
/// reached within the budget the final Rayleigh-Ritz extraction is returned
/// anyway: it is still orthonormal, variance-ordered, and deterministic.
///
/// Returns `None` when there are fewer than 2 points, `r == 0`, or the data
/// has exactly zero variance.
pub fn principal_axes_with(
    points: &[Vec<f64>],
    r: usize,
    rel_tol: f64,
    max_iter: Option<usize>,
) -> Option<PrincipalAxes> {
    let n = points.len();
    if n < 2 || r == 0 {
        return None;
    }
    let d = points[0].len();
    let r = r.min(d).min(n - 1);
    let mut mean = vec![0.0; d];
    for p in points {
        assert_eq!(p.len(), d);
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let denom = (n - 1) as f64;
    let total_variance: f64 = centered.iter().map(|c| dot(c, c)).sum::<f64>() / denom;
    if total_variance == 0.0 {
        return None;
    }
    // cov_apply(q) = (1/(n-1)) * sum_i c_i (c_i . q)
    let cov_apply = |q: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for c in &centered {
            let w = dot(c, q) / denom;
            for (o, ci) in out.iter_mut().zip(c) {
                *o += w * ci;
            }
        }
        out
    };
    // y_k = sum_j coeffs[k][j] * basis[j]
    let combine = |basis: &[Vec<f64>], coeffs: &[Vec<f64>]| -> Vec<Vec<f64>> {
        coeffs
            .iter()
            .map(|row| {
                let mut y = vec![0.0; d];
                for (c, q) in row.iter().zip(basis) {
                    for (yi, qi) in y.iter_mut().zip(q) {
                        *yi += c * qi;
                    }
                }
                y
            })
            .collect()
    };

    // Deterministic starting block, independent of the user-facing seed so a
    // projection rerun is byte-identical regardless of pipeline config.
    let mut rng = crate::rng::substream(0x5ca1_ab1e, "principal-axes");
    let mut block: Vec<Vec<f64>> = (0..r)
        .map(|_| {
            (0..d)
                .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
                .collect()
        })
        .collect();
    orthonormalize(&mut block);

    // Default iteration budget shrinks with problem size.
    let work = (n * d * r) as u64;
    let max_iter =
        max_iter.unwrap_or_else(|| (4_000_000_000u64 / work.max(1)).clamp(300, 10_000) as usize);

    let mut axes: Vec<Vec<f64>> = Vec::new();
    let mut eigenvalues: Vec<f64> = Vec::new();
    for iteration in 0..max_iter {
        // W = C Q, then Rayleigh-Ritz on span(Q): B = Q^T W.
        let mut image: Vec<Vec<f64>> = block.iter().map(|q| cov_apply(q)).collect();
        let mut b = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                b[i * r + j] = dot(&block[i], &image[j]);
            }
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let m = 0.5 * (b[i * r + j] + b[j * r + i]);
                b[i * r + j] = m;
                b[j * r + i] = m;
            }
        }
        let (theta, w) = jacobi_eigh(&b, r);
        // Residual of each Ritz pair reuses W: C y_k = W w_k exactly.
        let tol = rel_tol * theta[0].abs().max(total_variance * 1e-4).max(1e-300);
        let cy = combine(&image, &w);
        let y = combine(&block, &w);
        let converged = cy.iter().zip(&y).zip(&theta).all(|((cyk, yk), &t)| {
            let res: f64 = cyk
                .iter()
                .zip(yk)
                .map(|(a, b)| (a - t * b).powi(2))
                .sum::<f64>()
                .sqrt();
            res <= tol
        });
        if converged || iteration + 1 == max_iter {
            axes = y;
            eigenvalues = theta;
            break;
        }
        // Subspace iteration step: the image becomes the next block.
        orthonormalize(&mut image);
        // Re-seed any column that collapsed (rank-deficient covariance).
        let mut reseeded = false;
        for col in &mut image {
            if norm(col) < 1e-14 {
                *col = (0..d)
                    .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
                    .collect();
                reseeded = true;
            }
        }
        if reseeded {
            orthonormalize(&mut image);
        }
        block = image;
    }
    if axes.is_empty() {
        return None;
    }
    for axis in &mut axes {
        fix_sign(axis);
    }
    Some(PrincipalAxes {
        mean,
        axes,
        eigenvalues,
    })
}

/// Flips `v` in place so the entry of largest magnitude (first on ties) is
/// positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Modified Gram-Schmidt, in place. Columns that vanish are left as zero
/// vectors for the caller to re-seed.
fn orthonormalize(block: &mut [Vec<f64>]) {
    for i in 0..block.len() {
        for j in 0..i {
            let proj = dot(&block[i], &block[j]);
            let prev = block[j].clone();
            for (x, p) in block[i].iter_mut().zip(&prev) {
                *x -= proj * p;
            }
        }
        let n = norm(&block[i]);
        if n > 1e-14 {
            for x in block[i].iter_mut() {
                *x /= n;
            }
        } else {
            for x in block[i].iter_mut() {
                *x = 0.0;
            }
        }
    }
}
