use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

/// Fitted principal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` unit-length components of width `dim`, by descending variance.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalue of each component.
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl Pca {
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(row).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum())
            .collect()
    }

    pub fn inverse_transform_row(&self, projected: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, z) in self.components.iter().zip(projected) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += z * w;
            }
        }
        out
    }
}

/// Result of [`pca_fit_transform`]: the model plus the `rows × k`
/// projections, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub pca: Pca,
    pub k: usize,
    pub projected: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            let p = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
    }
}

fn matvec(m: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// A unit vector orthogonal to `basis`, from the standard basis.
fn complement_vector(n: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        orthogonalize(&mut e, basis);
        let len = norm(&e);
        if len > 1e-6 {
            e.iter_mut().for_each(|x| *x /= len);
            return e;
        }
    }
    unreachable!("basis spans the whole space")
}

/// Top-`k` eigenpairs of a symmetric positive semi-definite `n × n` matrix
/// by power iteration, orthogonalizing against the pairs already found.
pub fn top_eigenpairs(m: &[f64], n: usize, k: usize) -> Vec<(f64, Vec<f64>)> {
    let scale = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        // start from the deflated column with the largest norm
        let mut v: Vec<f64> = vec![0.0; n];
        let mut best = -1.0;
        for c in 0..n {
            let mut col: Vec<f64> = (0..n).map(|r| m[r * n + c]).collect();
            orthogonalize(&mut col, &basis);
            let len = norm(&col);
            if len > best {
                best = len;
                v = col;
            }
        }
        let len = norm(&v);
        if len <= scale * 1e-14 || len == 0.0 {
            v = complement_vector(n, &basis);
        } else {
            v.iter_mut().for_each(|x| *x /= len);
        }
        let mut lambda = 0.0;
        let mut converged = false;
        for _ in 0..POWER_MAX_ITER {
            let mut w = matvec(m, n, &v);
            orthogonalize(&mut w, &basis);
            let len = norm(&w);
            if len <= scale * 1e-14 || len == 0.0 {
                // remaining spectrum is zero
                lambda = 0.0;
                converged = true;
                break;
            }
            w.iter_mut().for_each(|x| *x /= len);
            lambda = len;
            let delta = v.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v = w;
            if delta < POWER_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            warn!("power iteration for component {j} stopped after {POWER_MAX_ITER} iterations");
        }
        if lambda > 0.0 {
            // Rayleigh quotient is the sharper estimate
            lambda = dot(&v, &matvec(m, n, &v));
        }
        basis.push(v.clone());
        out.push((lambda, v));
    }
    out
}

/// Flips `v` so that its largest-magnitude entry (lowest index on ties) is
/// positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Projects `rows × dim` data (row-major) onto its top `k` principal
/// components of the sample covariance.
///
/// When `dim` exceeds `rows` the eigenproblem is solved on the `rows × rows`
/// Gram matrix instead, which shares its non-zero spectrum.
pub fn pca_fit_transform(data: &[f64], rows: usize, dim: usize, k: usize) -> Result<PcaProjection> {
    if data.len() != rows * dim {
        return Err(Error::Dimension {
            expected: rows * dim,
            found: data.len(),
        });
    }
    if rows < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 rows, got {rows}")));
    }
    let max_k = (rows - 1).min(dim);
    if k == 0 || k > max_k {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={max_k}")));
    }
    let mut mean = vec![0.0; dim];
    for r in 0..rows {
        for (m, x) in mean.iter_mut().zip(&data[r * dim..(r + 1) * dim]) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let centered: Vec<f64> = data
        .iter()
        .enumerate()
        .map(|(i, x)| x - mean[i % dim])
        .collect();
    let denom = (rows - 1) as f64;
    let total_variance = centered.iter().map(|x| x * x).sum::<f64>() / denom;
    if total_variance <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let row = |r: usize| &centered[r * dim..(r + 1) * dim];

    let mut pairs: Vec<(f64, Vec<f64>)> = if dim <= rows {
        let mut cov = vec![0.0; dim * dim];
        for r in 0..rows {
            let x = row(r);
            for a in 0..dim {
                let xa = x[a];
                if xa == 0.0 {
                    continue;
                }
                for b in a..dim {
                    cov[a * dim + b] += xa * x[b];
                }
            }
        }
        for a in 0..dim {
            for b in a..dim {
                let v = cov[a * dim + b] / denom;
                cov[a * dim + b] = v;
                cov[b * dim + a] = v;
            }
        }
        top_eigenpairs(&cov, dim, k)
    } else {
        let mut gram = vec![0.0; rows * rows];
        for a in 0..rows {
            for b in a..rows {
                let v = dot(row(a), row(b)) / denom;
                gram[a * rows + b] = v;
                gram[b * rows + a] = v;
            }
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
        top_eigenpairs(&gram, rows, k)
            .into_iter()
            .map(|(lambda, u)| {
                let mut v = vec![0.0; dim];
                for (r, ur) in u.iter().enumerate() {
                    for (vi, x) in v.iter_mut().zip(row(r)) {
                        *vi += ur * x;
                    }
                }
                orthogonalize(&mut v, &basis);
                let len = norm(&v);
                if len > 1e-12 {
                    v.iter_mut().for_each(|x| *x /= len);
                } else {
                    v = complement_vector(dim, &basis);
                }
                basis.push(v.clone());
                (lambda, v)
            })
            .collect()
    };
    for (_, v) in pairs.iter_mut() {
        fix_sign(v);
    }

    let eigenvalues: Vec<f64> = pairs.iter().map(|(l, _)| l.max(0.0)).collect();
    let components: Vec<Vec<f64>> = pairs.into_iter().map(|(_, v)| v).collect();
    let explained_variance_ratio = eigenvalues.iter().map(|l| l / total_variance).collect();
    let mut projected = Vec::with_capacity(rows * k);
    for r in 0..rows {
        let x = row(r);
        projected.extend(components.iter().map(|c| dot(c, x)));
    }
    Ok(PcaProjection {
        pca: Pca {
            mean,
            components,
            eigenvalues,
            explained_variance_ratio,
        },
        k,
        projected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points() {
        let data = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let p = pca_fit_transform(&data, 3, 2, 1).unwrap();
        assert!((p.pca.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        let s = 2f64.sqrt();
        for (got, want) in p.projected.iter().zip([-s, 0.0, s]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn argument_checks() {
        let data = [0.0, 1.0, 2.0, 3.0];
        assert!(pca_fit_transform(&data, 2, 2, 2).is_err());
        assert!(pca_fit_transform(&data, 2, 2, 0).is_err());
        assert!(pca_fit_transform(&data[..2], 1, 2, 1).is_err());
        let same = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        assert!(matches!(pca_fit_transform(&same, 3, 2, 1), Err(Error::ZeroVariance)));
    }

    fn lcg_data(rows: usize, dim: usize) -> Vec<f64> {
        let mut s = 12345u64;
        (0..rows * dim)
            .map(|i| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * (1.0 + (i % dim) as f64)
            })
            .collect()
    }

    #[test]
    fn full_rank_reconstruction_and_orthonormality() {
        let (rows, dim) = (12, 4);
        let data = lcg_data(rows, dim);
        let p = pca_fit_transform(&data, rows, dim, dim).unwrap();
        for r in 0..rows {
            let back = p.pca.inverse_transform_row(&p.projected[r * dim..(r + 1) * dim]);
            for (a, b) in back.iter().zip(&data[r * dim..(r + 1) * dim]) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        for (i, a) in p.pca.components.iter().enumerate() {
            for (j, b) in p.pca.components.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - want).abs() < 1e-8);
            }
        }
        for w in p.pca.explained_variance_ratio.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!((p.pca.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for c in 0..dim {
            let m: f64 = (0..rows).map(|r| p.projected[r * dim + c]).sum::<f64>() / rows as f64;
            assert!(m.abs() < 1e-9);
        }
    }

    #[test]
    fn gram_route_reconstructs() {
        // 6 centered rows in 10 dims have rank 5, so 5 components are exact
        let (rows, dim) = (6, 10);
        let data = lcg_data(rows, dim);
        let p = pca_fit_transform(&data, rows, dim, rows - 1).unwrap();
        assert!((p.pca.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for r in 0..rows {
            let back = p.pca.inverse_transform_row(&p.projected[r * (rows - 1)..(r + 1) * (rows - 1)]);
            for (a, b) in back.iter().zip(&data[r * dim..(r + 1) * dim]) {
                assert!((a - b).abs() < 1e-8);
            }
            let direct = p.pca.transform_row(&data[r * dim..(r + 1) * dim]);
            for (a, b) in direct.iter().zip(&p.projected[r * (rows - 1)..]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
