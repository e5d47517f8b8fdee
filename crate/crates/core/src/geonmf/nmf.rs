//! Frobenius-norm NMF with multiplicative updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matrix::{DenseMatrix, SparseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum NmfError {
    #[error("negative entry {0} in input matrix")]
    Negative(f64),
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("rank {rank} exceeds matrix dimension {dim}")]
    RankTooLarge { rank: usize, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfOptions {
    pub rank: usize,
    pub max_iterations: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl NmfOptions {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_iterations: 2000,
            tolerance: 1e-9,
            seed: 1,
        }
    }
}

/// `V ≈ W H` with `W: rows × d`, `H: d × cols`; factors ordered by
/// descending column mass of `W`.
#[derive(Debug, Clone)]
pub struct NmfResult {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    /// `‖V − W H‖²` after initialization and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl NmfResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }

    pub fn rank(&self) -> usize {
        self.w.cols
    }

    /// Column `k` of `W`: the factor's profile over source cells.
    pub fn source_profile(&self, k: usize) -> Vec<f64> {
        self.w.column(k)
    }

    /// Row `k` of `H`: the factor's profile over destination cells.
    pub fn destination_profile(&self, k: usize) -> Vec<f64> {
        self.h.row(k).to_vec()
    }

    pub fn reconstruction(&self) -> DenseMatrix {
        self.w.matmul(&self.h)
    }
}

/// Row-major `n × d` product helpers. `ht` holds `Hᵀ` so both factors are
/// tall and row access is contiguous.
fn gram(a: &[f64], d: usize) -> Vec<f64> {
    let mut g = vec![0.0; d * d];
    for row in a.chunks_exact(d) {
        for i in 0..d {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in 0..d {
                g[i * d + j] += ri * row[j];
            }
        }
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖V − W H‖²`, exact over stored entries plus the implicit zeros.
fn objective(v: &SparseMatrix, w: &[f64], ht: &[f64], d: usize) -> f64 {
    // per-row partial sums, added in row order so the value is reproducible
    let rows: Vec<(f64, f64)> = (0..v.rows)
        .into_par_iter()
        .map(|i| {
            let wi = &w[i * d..(i + 1) * d];
            let mut r = 0.0;
            let mut p = 0.0;
            for &(j, x) in v.row(i) {
                let wh = dot(wi, &ht[j as usize * d..(j as usize + 1) * d]);
                r += (x - wh) * (x - wh);
                p += wh * wh;
            }
            (r, p)
        })
        .collect();
    let stored = rows.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if v.is_complete() {
        return stored.0;
    }
    let (gw, gh) = (gram(w, d), gram(ht, d));
    let full = dot(&gw, &gh);
    stored.0 + (full - stored.1).max(0.0)
}

/// One multiplicative step for a tall factor `x` (rows × d):
/// `x ← x ∘ num / (x G)`.
fn update(x: &mut [f64], num: &[f64], g: &[f64], d: usize) {
    x.par_chunks_exact_mut(d)
        .zip(num.par_chunks_exact(d))
        .for_each(|(row, nr)| {
            let mut den = vec![0.0; d];
            for (k, dk) in den.iter_mut().enumerate() {
                *dk = (0..d).map(|j| row[j] * g[j * d + k]).sum();
            }
            for k in 0..d {
                // zeros are fixed points; skipping them avoids 0 * inf
                if row[k] > 0.0 && den[k] > 0.0 {
                    let f = nr[k] / den[k];
                    if f.is_finite() {
                        row[k] *= f;
                    }
                }
            }
        });
}

/// Factorizes a non-negative matrix. Entries not stored in `v` are zero.
pub fn factorize(v: &SparseMatrix, opts: &NmfOptions) -> Result<NmfResult, NmfError> {
    let d = opts.rank;
    if d == 0 {
        return Err(NmfError::ZeroRank);
    }
    if d > v.rows.min(v.cols) {
        return Err(NmfError::RankTooLarge {
            rank: d,
            dim: v.rows.min(v.cols),
        });
    }
    if v.nnz() > 0 && v.min_value() < 0.0 {
        return Err(NmfError::Negative(v.min_value()));
    }
    if v.frobenius_sq() == 0.0 {
        return Ok(NmfResult {
            w: DenseMatrix::zeros(v.rows, d),
            h: DenseMatrix::zeros(d, v.cols),
            objective_trace: vec![0.0],
            iterations: 0,
            converged: true,
        });
    }
    // uniform entries with mean `sqrt(mean(V) / d)`, so `W H` starts at the
    // scale of `V`
    let mean = v.sum() / (v.rows as f64 * v.cols as f64);
    let scale = 2.0 * (mean / d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut w: Vec<f64> = (0..v.rows * d)
        .map(|_| scale * rng.random::<f64>())
        .collect();
    let mut ht: Vec<f64> = (0..v.cols * d)
        .map(|_| scale * rng.random::<f64>())
        .collect();
    let mut trace = vec![objective(v, &w, &ht, d)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        // H update: (Wᵀ V)ᵀ = Vᵀ W, denominator Hᵀ (Wᵀ W)
        let num: Vec<f64> = (0..v.cols)
            .into_par_iter()
            .flat_map_iter(|j| {
                let mut acc = vec![0.0; d];
                for &(i, x) in v.col(j) {
                    let wi = &w[i as usize * d..(i as usize + 1) * d];
                    for k in 0..d {
                        acc[k] += x * wi[k];
                    }
                }
                acc
            })
            .collect();
        update(&mut ht, &num, &gram(&w, d), d);
        // W update: V Hᵀ, denominator W (H Hᵀ)
        let num: Vec<f64> = (0..v.rows)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut acc = vec![0.0; d];
                for &(j, x) in v.row(i) {
                    let hj = &ht[j as usize * d..(j as usize + 1) * d];
                    for k in 0..d {
                        acc[k] += x * hj[k];
                    }
                }
                acc
            })
            .collect();
        update(&mut w, &num, &gram(&ht, d), d);
        let obj = objective(v, &w, &ht, d);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if obj == 0.0 || (prev - obj) <= opts.tolerance * prev {
            converged = true;
            break;
        }
    }
    Ok(finish(
        w, ht, v.rows, v.cols, d, trace, iterations, converged,
    ))
}

/// Balances each factor pair to equal norms and sorts by `W` column mass.
#[allow(clippy::too_many_arguments)]
fn finish(
    mut w: Vec<f64>,
    mut ht: Vec<f64>,
    rows: usize,
    cols: usize,
    d: usize,
    objective_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> NmfResult {
    for k in 0..d {
        let nw = (0..rows).map(|i| w[i * d + k].powi(2)).sum::<f64>().sqrt();
        let nh = (0..cols).map(|j| ht[j * d + k].powi(2)).sum::<f64>().sqrt();
        if nw > 0.0 && nh > 0.0 {
            let s = (nh / nw).sqrt();
            (0..rows).for_each(|i| w[i * d + k] *= s);
            (0..cols).for_each(|j| ht[j * d + k] /= s);
        }
    }
    let mass: Vec<f64> = (0..d)
        .map(|k| (0..rows).map(|i| w[i * d + k]).sum())
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
    NmfResult {
        w: DenseMatrix::from_fn(rows, d, |i, k| w[i * d + order[k]]),
        h: DenseMatrix::from_fn(d, cols, |k, j| ht[j * d + order[k]]),
        objective_trace,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_factors(rows: usize, cols: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DenseMatrix::from_fn(rows, d, |_, _| rng.random::<f64>());
        let h = DenseMatrix::from_fn(d, cols, |_, _| rng.random::<f64>());
        w.matmul(&h)
    }

    #[test]
    fn zero_matrix_is_immediate() {
        let v = SparseMatrix::from_dense(&DenseMatrix::zeros(4, 5));
        let r = factorize(&v, &NmfOptions::new(2)).unwrap();
        assert_eq!((r.objective(), r.iterations), (0.0, 0));
    }

    #[test]
    fn rejects_bad_input() {
        let v = SparseMatrix::from_triplets(2, 2, [(0, 0, -1.0)]);
        assert!(matches!(
            factorize(&v, &NmfOptions::new(1)),
            Err(NmfError::Negative(_))
        ));
        let v = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0)]);
        assert_eq!(
            factorize(&v, &NmfOptions::new(0)).unwrap_err(),
            NmfError::ZeroRank
        );
        assert!(factorize(&v, &NmfOptions::new(3)).is_err());
    }

    #[test]
    fn objective_matches_dense_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let triplets: Vec<_> = (0..30)
            .map(|_| {
                (
                    rng.random_range(0..8),
                    rng.random_range(0..9),
                    rng.random::<f64>(),
                )
            })
            .collect();
        let v = SparseMatrix::from_triplets(8, 9, triplets);
        let w: Vec<f64> = (0..8 * 3).map(|_| rng.random()).collect();
        let ht: Vec<f64> = (0..9 * 3).map(|_| rng.random()).collect();
        let dv = v.to_dense();
        let mut direct = 0.0;
        for i in 0..8 {
            for j in 0..9 {
                let wh = dot(&w[i * 3..i * 3 + 3], &ht[j * 3..j * 3 + 3]);
                direct += (dv.get(i, j) - wh).powi(2);
            }
        }
        assert!((objective(&v, &w, &ht, 3) - direct).abs() < 1e-10 * direct);
        assert!(
            (objective(&SparseMatrix::from_dense(&dv), &w, &ht, 3) - direct).abs() < 1e-10 * direct
        );
    }

    #[test]
    fn monotone_and_ordered() {
        let v = SparseMatrix::from_dense(&random_factors(12, 10, 4, 9));
        let mut o = NmfOptions::new(3);
        o.tolerance = 0.0;
        o.max_iterations = 300;
        let r = factorize(&v, &o).unwrap();
        for p in r.objective_trace.windows(2) {
            assert!(p[1] <= p[0] * (1.0 + 1e-12));
        }
        let mass: Vec<f64> = (0..3).map(|k| r.source_profile(k).iter().sum()).collect();
        assert!(mass.windows(2).all(|m| m[0] >= m[1]));
    }

    #[test]
    fn recovers_exact_low_rank() {
        let dense = random_factors(15, 12, 2, 4);
        let v = SparseMatrix::from_dense(&dense);
        let mut o = NmfOptions::new(2);
        o.max_iterations = 50_000;
        o.tolerance = 0.0;
        let r = factorize(&v, &o).unwrap();
        let rel = (r.objective() / v.frobenius_sq()).sqrt();
        assert!(rel < 1e-6, "relative error {rel}");
    }
}
