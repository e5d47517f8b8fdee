//! Geographic flow matrices and their non-negative factorization.

mod grid;
mod matrix;
mod nmf;

pub use grid::{bin_transfers, haversine_km, GeoFlowMatrix, GeoGrid, GridError, EARTH_RADIUS_KM};
pub use matrix::{DenseMatrix, SparseMatrix};
pub use nmf::{factorize, NmfError, NmfOptions, NmfResult};

use serde::{Deserialize, Serialize};

pub const DEFAULT_RADIUS_KM: f64 = 10.0;
pub const LOCALIZED_THRESHOLD: f64 = 0.23;
pub const MATCH_THRESHOLD: f64 = 0.9;

/// Peak share of a basis vector inside a disc of the given radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub gamma: f64,
    pub center: (usize, usize),
}

/// Grid cells reachable from any center in latitude band `q`, as `(dp, q')`.
fn disc_offsets(grid: &GeoGrid, q: usize, radius_km: f64) -> Vec<(isize, usize)> {
    let c = grid.center(0, q);
    let mut out = Vec::new();
    for q2 in 0..grid.k {
        if haversine_km(c, grid.center(0, q2)) > radius_km {
            continue;
        }
        for p2 in 0..grid.k {
            if haversine_km(c, grid.center(p2, q2)) <= radius_km {
                out.push((p2 as isize, q2));
                if p2 > 0 {
                    out.push((-(p2 as isize), q2));
                }
            } else {
                break;
            }
        }
    }
    out
}

/// `γ = max β(p, q)`: for each candidate center, the fraction of the vector's
/// mass in cells whose centers lie within `radius_km`. Ties go to the smallest
/// `(p, q)`. `None` for an all-zero vector.
pub fn localization(v: &[f64], grid: &GeoGrid, radius_km: f64) -> Option<Localization> {
    let k = grid.k;
    assert_eq!(v.len(), grid.cells());
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let offsets: Vec<Vec<(isize, usize)>> =
        (0..k).map(|q| disc_offsets(grid, q, radius_km)).collect();
    let mut best: Option<Localization> = None;
    for p in 0..k {
        for (q, offs) in offsets.iter().enumerate() {
            let mut sum = 0.0;
            for &(dp, q2) in offs {
                let p2 = p as isize + dp;
                if (0..k as isize).contains(&p2) {
                    sum += v[grid.index(p2 as usize, q2)];
                }
            }
            let beta = sum / total;
            if best.is_none_or(|b| beta > b.gamma) {
                best = Some(Localization {
                    gamma: beta,
                    center: (p, q),
                });
            }
        }
    }
    best
}

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// `S[n][m] = cos(w_m, h_n)`: rows index destination profiles, columns
/// source profiles.
pub fn similarity_matrix(r: &NmfResult) -> Vec<Vec<Option<f64>>> {
    let d = r.rank();
    let w: Vec<Vec<f64>> = (0..d).map(|k| r.source_profile(k)).collect();
    let h: Vec<Vec<f64>> = (0..d).map(|k| r.destination_profile(k)).collect();
    (0..d)
        .map(|n| (0..d).map(|m| cosine(&w[m], &h[n])).collect())
        .collect()
}

/// Per-factor diagnostics of one factorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub factor: usize,
    pub source: Option<Localization>,
    pub destination: Option<Localization>,
    pub self_similarity: Option<f64>,
}

impl FactorSummary {
    fn localized(l: &Option<Localization>) -> bool {
        l.is_some_and(|l| l.gamma > LOCALIZED_THRESHOLD)
    }

    /// Both profiles localized and mutually similar.
    pub fn is_localized_pair(&self) -> bool {
        Self::localized(&self.source)
            && Self::localized(&self.destination)
            && self.self_similarity.is_some_and(|s| s >= MATCH_THRESHOLD)
    }

    pub fn has_scattered_destination(&self) -> bool {
        self.destination.is_some() && !Self::localized(&self.destination)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub rank: usize,
    pub objective: f64,
    pub iterations: usize,
    pub factors: Vec<FactorSummary>,
    pub localized_pairs: usize,
    pub scattered_destinations: usize,
}

pub fn summarize(r: &NmfResult, grid: &GeoGrid, radius_km: f64) -> RankSummary {
    let sim = similarity_matrix(r);
    let factors: Vec<FactorSummary> = (0..r.rank())
        .map(|k| FactorSummary {
            factor: k,
            source: localization(&r.source_profile(k), grid, radius_km),
            destination: localization(&r.destination_profile(k), grid, radius_km),
            self_similarity: sim[k][k],
        })
        .collect();
    RankSummary {
        rank: r.rank(),
        objective: r.objective(),
        iterations: r.iterations,
        localized_pairs: factors.iter().filter(|f| f.is_localized_pair()).count(),
        scattered_destinations: factors
            .iter()
            .filter(|f| f.has_scattered_destination())
            .count(),
        factors,
    }
}

/// Factorizes `v` at every rank in `ranks` with the same options otherwise.
pub fn d_sweep(
    v: &SparseMatrix,
    grid: &GeoGrid,
    ranks: impl IntoIterator<Item = usize>,
    base: &NmfOptions,
    radius_km: f64,
) -> Result<Vec<(NmfResult, RankSummary)>, NmfError> {
    ranks
        .into_iter()
        .map(|d| {
            let r = factorize(v, &NmfOptions { rank: d, ..*base })?;
            let s = summarize(&r, grid, radius_km);
            Ok((r, s))
        })
        .collect()
}

/// `k × k` heat map of a cell vector, row `q`, column `p`.
pub fn as_grid(v: &[f64], grid: &GeoGrid) -> Vec<Vec<f64>> {
    (0..grid.k)
        .map(|q| (0..grid.k).map(|p| v[grid.index(p, q)]).collect())
        .collect()
}
