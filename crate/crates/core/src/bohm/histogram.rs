use serde::{Deserialize, Serialize};

use super::trajectory::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::grid::{Grid, Rect};
use crate::nodes::{find_nodes, DEFAULT_STEP};
use crate::state::Propagator;

pub const DEFAULT_BIN: f64 = 0.05;

/// Visit counts on square bins over a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyHistogram {
    pub region: Rect,
    pub bin: f64,
    pub nx: usize,
    pub ny: usize,
    pub counts: Vec<u64>,
    pub total: u64,
    /// Points that fell outside the region (not part of `total`).
    pub outside: u64,
}

impl OccupancyHistogram {
    pub fn new(region: Rect, bin: f64) -> Result<Self> {
        region.validate()?;
        if !(bin > 0.0) {
            return Err(Error::InvalidParameter("bin size must be positive".into()));
        }
        let nx = (region.width() / bin).round().max(1.0) as usize;
        let ny = (region.height() / bin).round().max(1.0) as usize;
        Ok(Self {
            region,
            bin,
            nx,
            ny,
            counts: vec![0; nx * ny],
            total: 0,
            outside: 0,
        })
    }

    pub fn bin_of(&self, x: f64, y: f64) -> Option<usize> {
        if !self.region.contains(x, y) {
            return None;
        }
        let i = (((x - self.region.x_min) / self.region.width() * self.nx as f64) as usize).min(self.nx - 1);
        let j = (((y - self.region.y_min) / self.region.height() * self.ny as f64) as usize).min(self.ny - 1);
        Some(j * self.nx + i)
    }

    pub fn add(&mut self, x: f64, y: f64) {
        match self.bin_of(x, y) {
            Some(k) => {
                self.counts[k] += 1;
                self.total += 1;
            }
            None => self.outside += 1,
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.region == other.region
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch {
                expected: self.counts.len(),
                got: other.counts.len(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.outside += other.outside;
        Ok(())
    }

    /// Counts divided by the total; all zeros when empty.
    pub fn normalized(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    /// Fraction of visits in the square `[−h, h]²`.
    pub fn central_fraction(&self, half: f64) -> f64 {
        let mut inside = 0u64;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let x = self.region.x_min + (i as f64 + 0.5) * self.region.width() / self.nx as f64;
                let y = self.region.y_min + (j as f64 + 0.5) * self.region.height() / self.ny as f64;
                if x.abs() < half && y.abs() < half {
                    inside += self.counts[j * self.nx + i];
                }
            }
        }
        inside as f64 / self.total.max(1) as f64
    }

    pub fn to_grid(&self) -> Grid<f64> {
        Grid::new(self.region, self.nx, self.ny, self.counts.iter().map(|&c| c as f64).collect())
    }
}

/// Frobenius distance between two normalized matrices.
pub fn frobenius_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

/// Histogram of the fixed-cadence samples of a trajectory.
pub fn occupancy(record: &TrajectoryRecord, region: Rect, bin: f64) -> Result<OccupancyHistogram> {
    if record.samples.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let mut h = OccupancyHistogram::new(region, bin)?;
    for s in &record.samples {
        h.add(s[1], s[2]);
    }
    Ok(h)
}

/// Positions of all nodal points sampled every `dt` over `[0, t_end]`.
pub fn node_visit_colorplot(
    propagator: &Propagator,
    t_end: f64,
    dt: f64,
    region: Rect,
    bin: f64,
) -> Result<OccupancyHistogram> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("node tracking cadence must be positive".into()));
    }
    let frames = (t_end / dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=frames).map(|k| k as f64 * dt).collect();
    let scan = |t: &f64| -> Result<Vec<[f64; 2]>> {
        let set = find_nodes(&propagator.evolve(*t), region, DEFAULT_STEP)?;
        Ok(set.nodes.iter().map(|n| [n.x, n.y]).collect())
    };
    #[cfg(feature = "parallel")]
    let found: Vec<Vec<[f64; 2]>> = {
        use rayon::prelude::*;
        times.par_iter().map(scan).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let found: Vec<Vec<[f64; 2]>> = times.iter().map(scan).collect::<Result<_>>()?;
    let mut h = OccupancyHistogram::new(region, bin)?;
    for frame in found {
        for [x, y] in frame {
            h.add(x, y);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(points: &[[f64; 2]]) -> TrajectoryRecord {
        TrajectoryRecord {
            initial: points[0],
            samples: points.iter().enumerate().map(|(k, p)| [k as f64, p[0], p[1]]).collect(),
            accepted_steps: 0,
            rejected_steps: 0,
            min_density_seen: 1.0,
            abort: None,
        }
    }

    #[test]
    fn single_sample_single_bin() {
        let h = occupancy(&record(&[[0.01, 0.02]]), Rect::square(1.0), DEFAULT_BIN).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.total, 1);
    }

    #[test]
    fn outside_points_are_counted_separately() {
        let h = occupancy(&record(&[[0.0, 0.0], [5.0, 0.0], [0.0, -3.0]]), Rect::square(1.0), 0.1).unwrap();
        assert_eq!(h.total, 1);
        assert_eq!(h.outside, 2);
    }

    #[test]
    fn empty_record_rejected() {
        let mut r = record(&[[0.0, 0.0]]);
        r.samples.clear();
        assert!(occupancy(&r, Rect::square(1.0), 0.1).is_err());
    }

    proptest! {
        #[test]
        fn totals_preserved(pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..200)) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            let h = occupancy(&record(&pts), Rect::square(1.5), 0.05).unwrap();
            prop_assert_eq!(h.total, h.counts.iter().sum::<u64>());
            prop_assert_eq!(h.total + h.outside, pts.len() as u64);
            if h.total > 0 {
                prop_assert!((h.normalized().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn merge_is_additive(a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..50),
                             b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..50)) {
            let to = |v: &Vec<(f64, f64)>| v.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>();
            let (pa, pb) = (to(&a), to(&b));
            let mut ha = occupancy(&record(&pa), Rect::square(1.0), 0.25).unwrap();
            let hb = occupancy(&record(&pb), Rect::square(1.0), 0.25).unwrap();
            let both: Vec<[f64; 2]> = pa.iter().chain(&pb).copied().collect();
            let hab = occupancy(&record(&both), Rect::square(1.0), 0.25).unwrap();
            ha.merge(&hb).unwrap();
            prop_assert_eq!(ha, hab);
        }
    }
}
