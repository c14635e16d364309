use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApParams {
    pub preference: Preference,
    pub damping: f64,
    pub max_iter: usize,
    /// Iterations the exemplar set must stay unchanged to count as converged.
    pub convergence_window: usize,
}

impl Default for ApParams {
    fn default() -> Self {
        ApParams {
            preference: Preference::Median,
            damping: 0.7,
            max_iter: 500,
            convergence_window: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Exemplar row of every row; exemplars point at themselves.
    pub exemplar: Vec<usize>,
    /// Exemplar rows in ascending order; cluster `c` is `exemplars[c]`.
    pub exemplars: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.exemplars.len()
    }

    /// Cluster index of every row.
    pub fn labels(&self) -> Vec<usize> {
        self.exemplar
            .iter()
            .map(|e| self.exemplars.binary_search(e).expect("exemplar listed"))
            .collect()
    }
}

/// Negative squared Euclidean distances between the rows of a row-major
/// `rows × dim` matrix.
pub fn neg_sq_euclidean(data: &[f64], rows: usize, dim: usize) -> Vec<f64> {
    let mut s = vec![0.0; rows * rows];
    for i in 0..rows {
        let a = &data[i * dim..(i + 1) * dim];
        for j in i + 1..rows {
            let b = &data[j * dim..(j + 1) * dim];
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
            s[i * rows + j] = -d;
            s[j * rows + i] = -d;
        }
    }
    s
}

/// Median of the off-diagonal entries (mean of the middle two for an even
/// count).
pub fn median_off_diagonal(s: &[f64], n: usize) -> f64 {
    let mut v: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| s[i * n + j]))
        .collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Points whose own index maximizes `a(i, k) + r(i, k)`.
fn self_selected(resp: &[f64], avail: &[f64], n: usize) -> Vec<usize> {
    (0..n)
        .filter(|&i| {
            let row = i * n;
            let own = resp[row + i] + avail[row + i];
            (0..n).all(|k| {
                let v = resp[row + k] + avail[row + k];
                // lowest index wins ties
                v < own || (v == own && k >= i)
            })
        })
        .collect()
}

/// Whether `i` and `j` are interchangeable: equal similarity to every other
/// point, and at least as similar to each other as to anything else.
fn exchangeable(s: &[f64], n: usize, i: usize, j: usize) -> bool {
    let sij = s[i * n + j];
    if sij != s[j * n + i] {
        return false;
    }
    (0..n)
        .filter(|&m| m != i && m != j)
        .all(|m| s[i * n + m] == s[j * n + m] && s[m * n + i] == s[m * n + j] && s[i * n + m] <= sij)
}

/// Identical points receive identical messages, so they are elected
/// together; keep only the lowest index of each such group.
fn merge_exchangeable(s: &[f64], n: usize, exemplars: Vec<usize>) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::with_capacity(exemplars.len());
    for e in exemplars {
        if !kept.iter().any(|&k| exchangeable(s, n, k, e)) {
            kept.push(e);
        }
    }
    kept
}

/// Affinity Propagation on a square similarity matrix (row-major, `n × n`).
///
/// The preference replaces the diagonal. Messages are damped as
/// `λ·old + (1−λ)·new`. The run converges once the set of self-selected
/// exemplars is non-empty and unchanged for `convergence_window`
/// iterations; otherwise it stops after `max_iter` with
/// `converged == false`. Exchangeable exemplars collapse to the lowest
/// index. Non-exemplars join the exemplar they are most
/// similar to, ties going to the lowest index.
pub fn affinity_propagation(similarity: &[f64], n: usize, params: &ApParams) -> Result<ClusterAssignment> {
    if similarity.len() != n * n {
        return Err(Error::InvalidArgument(format!(
            "similarity matrix has {} entries, expected {n}×{n}",
            similarity.len()
        )));
    }
    if !(0.5..1.0).contains(&params.damping) {
        return Err(Error::InvalidArgument(format!("damping {} outside [0.5, 1)", params.damping)));
    }
    if n == 0 {
        return Ok(ClusterAssignment {
            exemplar: vec![],
            exemplars: vec![],
            iterations: 0,
            converged: true,
        });
    }
    if n == 1 {
        return Ok(ClusterAssignment {
            exemplar: vec![0],
            exemplars: vec![0],
            iterations: 0,
            converged: true,
        });
    }
    let preference = match params.preference {
        Preference::Median => median_off_diagonal(similarity, n),
        Preference::Value(p) => p,
    };
    let mut s = similarity.to_vec();
    for i in 0..n {
        s[i * n + i] = preference;
    }

    let lambda = params.damping;
    let mut resp = vec![0.0; n * n];
    let mut avail = vec![0.0; n * n];
    let mut col_sum = vec![0.0; n];
    let mut last: Vec<usize> = Vec::new();
    let mut stable = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..params.max_iter {
        iterations = it + 1;
        // responsibilities
        for i in 0..n {
            let row = i * n;
            let (mut best, mut best_k, mut second) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for k in 0..n {
                let v = avail[row + k] + s[row + k];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == best_k { second } else { best };
                let fresh = s[row + k] - competitor;
                resp[row + k] = lambda * resp[row + k] + (1.0 - lambda) * fresh;
            }
        }
        // availabilities
        col_sum.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..n {
            let row = i * n;
            for k in 0..n {
                let r = resp[row + k];
                col_sum[k] += if i == k { r } else { r.max(0.0) };
            }
        }
        for i in 0..n {
            let row = i * n;
            for k in 0..n {
                let fresh = if i == k {
                    col_sum[k] - resp[row + k]
                } else {
                    (col_sum[k] - resp[row + k].max(0.0)).min(0.0)
                };
                avail[row + k] = lambda * avail[row + k] + (1.0 - lambda) * fresh;
            }
        }

        let current = self_selected(&resp, &avail, n);
        if !current.is_empty() && current == last {
            stable += 1;
        } else {
            stable = 1;
        }
        last = current;
        if !last.is_empty() && stable >= params.convergence_window {
            converged = true;
            break;
        }
    }

    let mut exemplars = last;
    if exemplars.is_empty() {
        let best = (0..n)
            .max_by(|&a, &b| {
                let va = resp[a * n + a] + avail[a * n + a];
                let vb = resp[b * n + b] + avail[b * n + b];
                va.total_cmp(&vb).then(b.cmp(&a))
            })
            .expect("n > 0");
        exemplars = vec![best];
    }
    let exemplars = merge_exchangeable(&s, n, exemplars);
    let exemplar = (0..n)
        .map(|i| {
            if exemplars.binary_search(&i).is_ok() {
                return i;
            }
            let mut best = exemplars[0];
            for &k in &exemplars[1..] {
                if s[i * n + k] > s[i * n + best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    Ok(ClusterAssignment {
        exemplar,
        exemplars,
        iterations,
        converged,
    })
}
