use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AggregatedLink, Coord};

use super::matrix::SparseMatrix;

pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid needs k >= 1")]
    ZeroCells,
    #[error("empty or inverted bounds")]
    BadBounds,
}

/// Great-circle distance in km (haversine).
pub fn haversine_km(a: Coord, b: Coord) -> f64 {
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// `k × k` lattice of equal-angle cells over a lat/lon box. Cell `(p, q)`
/// (0-based) spans the `p`-th longitude band and `q`-th latitude band; its
/// flat index is `p + q k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoGrid {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub k: usize,
}

impl GeoGrid {
    pub fn new(
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
        k: usize,
    ) -> Result<Self, GridError> {
        if k == 0 {
            return Err(GridError::ZeroCells);
        }
        if !(lat_max > lat_min && lon_max > lon_min) {
            return Err(GridError::BadBounds);
        }
        Ok(Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            k,
        })
    }

    /// Box whose sides measure about `side_km` on the ground around `center`.
    pub fn square_around(center: Coord, side_km: f64, k: usize) -> Result<Self, GridError> {
        let dlat = (side_km / 2.0) / EARTH_RADIUS_KM * 180.0 / std::f64::consts::PI;
        let dlon = dlat / center.lat.to_radians().cos();
        Self::new(
            center.lat - dlat,
            center.lat + dlat,
            center.lon - dlon,
            center.lon + dlon,
            k,
        )
    }

    pub fn cells(&self) -> usize {
        self.k * self.k
    }

    pub fn index(&self, p: usize, q: usize) -> usize {
        p + q * self.k
    }

    pub fn cell_of_index(&self, m: usize) -> (usize, usize) {
        (m % self.k, m / self.k)
    }

    /// Cell containing `c`; the upper edges belong to the last cell.
    pub fn cell_of(&self, c: Coord) -> Option<(usize, usize)> {
        if !(self.lat_min..=self.lat_max).contains(&c.lat)
            || !(self.lon_min..=self.lon_max).contains(&c.lon)
        {
            return None;
        }
        let band = |x: f64, lo: f64, hi: f64| {
            (((x - lo) / (hi - lo) * self.k as f64).floor() as usize).min(self.k - 1)
        };
        Some((
            band(c.lon, self.lon_min, self.lon_max),
            band(c.lat, self.lat_min, self.lat_max),
        ))
    }

    pub fn center(&self, p: usize, q: usize) -> Coord {
        let k = self.k as f64;
        Coord::new(
            self.lat_min + (q as f64 + 0.5) * (self.lat_max - self.lat_min) / k,
            self.lon_min + (p as f64 + 0.5) * (self.lon_max - self.lon_min) / k,
        )
    }
}

/// Cell-to-cell transfer frequencies `α` and `V = ln(max(1, α))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoFlowMatrix {
    pub grid: GeoGrid,
    /// `(source cell, destination cell) → α`.
    pub alpha: BTreeMap<(u32, u32), u64>,
    /// Links skipped because an endpoint lies outside the grid.
    pub out_of_bounds: usize,
    /// Links skipped because an endpoint has no coordinate.
    pub missing_coordinates: usize,
}

impl GeoFlowMatrix {
    /// `V` as a sparse `k² × k²` matrix; only entries with `α > 1` are stored.
    pub fn log_matrix(&self) -> SparseMatrix {
        let n = self.grid.cells();
        let triplets = self
            .alpha
            .iter()
            .filter(|(_, &a)| a > 1)
            .map(|(&(m, j), &a)| (m as usize, j as usize, (a as f64).ln()));
        SparseMatrix::from_triplets(n, n, triplets)
    }

    pub fn total_frequency(&self) -> u64 {
        self.alpha.values().sum()
    }
}

/// Accumulates link frequencies `g` into cell pairs.
pub fn bin_transfers(
    links: &[AggregatedLink],
    coords: &BTreeMap<String, Coord>,
    grid: &GeoGrid,
) -> GeoFlowMatrix {
    let mut out = GeoFlowMatrix {
        grid: *grid,
        alpha: BTreeMap::new(),
        out_of_bounds: 0,
        missing_coordinates: 0,
    };
    for l in links {
        let (Some(&a), Some(&b)) = (coords.get(&l.source), coords.get(&l.destination)) else {
            out.missing_coordinates += 1;
            continue;
        };
        let (Some((p1, q1)), Some((p2, q2))) = (grid.cell_of(a), grid.cell_of(b)) else {
            out.out_of_bounds += 1;
            continue;
        };
        let key = (grid.index(p1, q1) as u32, grid.index(p2, q2) as u32);
        *out.alpha.entry(key).or_default() += l.frequency;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(s: &str, d: &str, g: u64) -> AggregatedLink {
        AggregatedLink {
            source: s.into(),
            destination: d.into(),
            flow: g,
            frequency: g,
        }
    }

    #[test]
    fn index_is_bijective() {
        let g = GeoGrid::new(0.0, 1.0, 0.0, 1.0, 7).unwrap();
        let mut seen = [false; 49];
        for p in 0..7 {
            for q in 0..7 {
                let m = g.index(p, q);
                assert!(!seen[m]);
                seen[m] = true;
                assert_eq!(g.cell_of_index(m), (p, q));
                assert_eq!(g.cell_of(g.center(p, q)), Some((p, q)));
            }
        }
        assert_eq!(g.cell_of(Coord::new(1.0, 1.0)), Some((6, 6)));
        assert_eq!(g.cell_of(Coord::new(1.01, 0.5)), None);
    }

    #[test]
    fn bins_and_logs() {
        let g = GeoGrid::new(35.0, 36.0, 139.0, 140.0, 10).unwrap();
        let coords: BTreeMap<String, Coord> = [
            ("a".to_string(), Coord::new(35.05, 139.05)),
            ("b".to_string(), Coord::new(35.95, 139.95)),
            ("c".to_string(), Coord::new(40.0, 139.5)),
        ]
        .into_iter()
        .collect();
        let m = bin_transfers(&[link("a", "b", 1)], &coords, &g);
        assert_eq!(m.alpha.into_iter().collect::<Vec<_>>(), vec![((0, 99), 1)]);
        let m = bin_transfers(&[link("a", "b", 1)], &coords, &g);
        assert_eq!(m.log_matrix().nnz(), 0);

        let m = bin_transfers(
            &[link("a", "b", 7), link("a", "c", 3), link("a", "z", 3)],
            &coords,
            &g,
        );
        let v = m.log_matrix();
        assert!((v.get(0, 99) - 7f64.ln()).abs() < 1e-12);
        assert!((v.get(0, 99) - 1.9459).abs() < 1e-4);
        assert_eq!((m.out_of_bounds, m.missing_coordinates), (1, 1));
        assert_eq!(m.total_frequency(), 7);
    }

    #[test]
    fn haversine_one_degree_latitude() {
        let d = haversine_km(Coord::new(35.0, 139.0), Coord::new(36.0, 139.0));
        assert!((d - 111.19).abs() < 0.05);
    }
}
