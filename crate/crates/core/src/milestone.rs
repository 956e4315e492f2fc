//! Milestone point clouds and kernel density anomaly scoring.
//!
//! At a control milestone every simulated run is located where its earned
//! curve reaches the underway project's earned value, giving one
//! `(ad_j, tad_j)` point per run. A bivariate Gaussian product-kernel density
//! over that cloud scores how typical the observed `(AD, TAD_AD)` is.
//!
//! Bandwidths follow the normal-reference rule
//! `h = 4 * 1.06 * min(sd, IQR / 1.349) * n^(-1/5)` and each kernel has
//! standard deviation `h / 4`, the convention of the classic `kde2d`
//! routine. The anomaly percentile is the fraction of cloud points whose
//! density strictly exceeds the density at the observed point.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::curves::{earned_time_in, interpolate, CurveError};
use crate::montecarlo::{SimulationStore, TrajectoryRecord};
use crate::stats;

#[derive(Debug, Error)]
pub enum MilestoneError {
    #[error("store was saved without trajectories; re-run the simulation keeping them")]
    NoTrajectories,
    #[error("need at least 2 samples for a bandwidth, got {0}")]
    TooFewSamples(usize),
    #[error("samples have zero spread; the density is degenerate, skip KDE for this axis")]
    DegenerateBandwidth,
    #[error("bandwidths must be positive, got ({0}, {1})")]
    BadBandwidth(f64, f64),
    #[error("run {run_id}: {source}")]
    Match { run_id: u64, source: CurveError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloudPoint {
    pub run_id: u64,
    pub ad: f64,
    pub tad: f64,
}

/// One point per simulated run, all sharing the same earned value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCloud {
    pub target: f64,
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ad).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tad).collect()
    }

    /// `run_id,ad_j,tad_j` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MilestoneError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["run_id", "ad_j", "tad_j"])?;
        for p in &self.points {
            w.write_record([p.run_id.to_string(), p.ad.to_string(), p.tad.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Where `trajectory` reaches `target` earned value: `(ad_j, tad_j)`.
pub fn match_progress(trajectory: &TrajectoryRecord, target: f64) -> Result<(f64, f64), CurveError> {
    let ad = earned_time_in(&trajectory.earned, target)?;
    Ok((ad, interpolate(&trajectory.actual, ad)))
}

pub fn build_point_cloud(store: &SimulationStore, target: f64) -> Result<PointCloud, MilestoneError> {
    if !store.has_trajectories() {
        return Err(MilestoneError::NoTrajectories);
    }
    let points = store
        .records
        .iter()
        .map(|r| {
            match_progress(r, target)
                .map(|(ad, tad)| CloudPoint {
                    run_id: r.run_id,
                    ad,
                    tad,
                })
                .map_err(|source| MilestoneError::Match {
                    run_id: r.run_id,
                    source,
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(PointCloud { target, points })
}

/// Normal-reference bandwidth `4 * 1.06 * min(sd, IQR / 1.349) * n^(-1/5)`.
///
/// When the IQR is zero but the sd is not (heavy ties) the sd alone is used.
pub fn bandwidth_nrd(samples: &[f64]) -> Result<f64, MilestoneError> {
    let n = samples.len();
    if n < 2 {
        return Err(MilestoneError::TooFewSamples(n));
    }
    let sd = stats::sd(samples);
    let s = stats::sorted(samples);
    let iqr = stats::quantile_sorted(&s, 0.75) - stats::quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    if !(spread > 0.0) {
        return Err(MilestoneError::DegenerateBandwidth);
    }
    Ok(4.0 * 1.06 * spread * (n as f64).powf(-0.2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BandwidthRule {
    NormalReference,
    Fixed { hx: f64, hy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KdeConfig {
    pub bandwidth: BandwidthRule,
    /// Kernel standard deviation is `h / kernel_scale`.
    pub kernel_scale: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            bandwidth: BandwidthRule::NormalReference,
            kernel_scale: 4.0,
        }
    }
}

/// Kernel contributions beyond this many standard deviations on an axis
/// are below `exp(-40)` of the peak and are skipped in bulk evaluation.
const CUTOFF_SDS: f64 = 8.944_271_909_999_16; // sqrt(80)

#[derive(Debug, Clone)]
pub struct KdeModel {
    xs: Vec<f64>,
    ys: Vec<f64>,
    hx: f64,
    hy: f64,
    sx: f64,
    sy: f64,
    /// Point indices ordered by x, for windowed evaluation.
    by_x: Vec<usize>,
}

impl KdeModel {
    pub fn fit(points: &[(f64, f64)], config: &KdeConfig) -> Result<Self, MilestoneError> {
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let (hx, hy) = match config.bandwidth {
            BandwidthRule::NormalReference => (bandwidth_nrd(&xs)?, bandwidth_nrd(&ys)?),
            BandwidthRule::Fixed { hx, hy } => (hx, hy),
        };
        if !(hx > 0.0 && hy > 0.0 && config.kernel_scale > 0.0) || points.is_empty() {
            return Err(MilestoneError::BadBandwidth(hx, hy));
        }
        let mut by_x: Vec<usize> = (0..xs.len()).collect();
        by_x.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
        Ok(KdeModel {
            sx: hx / config.kernel_scale,
            sy: hy / config.kernel_scale,
            xs,
            ys,
            hx,
            hy,
            by_x,
        })
    }

    pub fn fit_cloud(cloud: &PointCloud, config: &KdeConfig) -> Result<Self, MilestoneError> {
        let pts: Vec<(f64, f64)> = cloud.points.iter().map(|p| (p.ad, p.tad)).collect();
        Self::fit(&pts, config)
    }

    pub fn bandwidths(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn norm(&self) -> f64 {
        1.0 / (2.0 * PI * self.sx * self.sy * self.xs.len() as f64)
    }

    /// Exact density at `(x, y)`: every kernel is evaluated.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        let sum: f64 = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(&px, &py)| {
                let u = (x - px) / self.sx;
                let v = (y - py) / self.sy;
                (-0.5 * (u * u + v * v)).exp()
            })
            .sum();
        sum * self.norm()
    }

    /// Density with far kernels skipped; summation follows the x order so
    /// coincident query points get bit-identical values.
    fn density_windowed(&self, x: f64, y: f64) -> f64 {
        let rx = CUTOFF_SDS * self.sx;
        let lo = self.by_x.partition_point(|&i| self.xs[i] < x - rx);
        let mut sum = 0.0;
        for &i in &self.by_x[lo..] {
            let dx = self.xs[i] - x;
            if dx > rx {
                break;
            }
            let v = (y - self.ys[i]) / self.sy;
            if v.abs() > CUTOFF_SDS {
                continue;
            }
            let u = dx / self.sx;
            sum += (-0.5 * (u * u + v * v)).exp();
        }
        sum * self.norm()
    }

    /// Fraction of cloud points whose density strictly exceeds the density
    /// at `observed`. Ties count as not exceeding.
    pub fn anomaly_percentile(&self, observed: (f64, f64)) -> f64 {
        let at_obs = self.density_windowed(observed.0, observed.1);
        let above = (0..self.xs.len())
            .filter(|&i| self.density_windowed(self.xs[i], self.ys[i]) > at_obs)
            .count();
        above as f64 / self.xs.len() as f64
    }

    /// Density on a regular `nx` by `ny` grid spanning the given ranges.
    pub fn density_grid(&self, x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> DensityGrid {
        let axis = |(lo, hi): (f64, f64), m: usize| -> Vec<f64> {
            if m == 1 {
                return vec![lo];
            }
            (0..m).map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64).collect()
        };
        let gx = axis(x_range, nx);
        let gy = axis(y_range, ny);
        let n = self.xs.len();
        let kernel = |grid: &[f64], pts: &[f64], s: f64| {
            DMatrix::from_fn(grid.len(), n, |g, k| {
                let u = (grid[g] - pts[k]) / s;
                (-0.5 * u * u).exp()
            })
        };
        let ax = kernel(&gx, &self.xs, self.sx);
        let ay = kernel(&gy, &self.ys, self.sy);
        let values = (ay * ax.transpose()) * self.norm();
        DensityGrid { xs: gx, ys: gy, values }
    }
}

/// Density values on a grid; `values[(j, i)]` is the density at `(xs[i], ys[j])`.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl DensityGrid {
    /// Riemann sum of the density over the grid cells.
    pub fn mass(&self) -> f64 {
        let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 1.0 };
        self.values.sum() * step(&self.xs) * step(&self.ys)
    }

    /// `x,y,density` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MilestoneError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "density"])?;
        for (j, y) in self.ys.iter().enumerate() {
            for (i, x) in self.xs.iter().enumerate() {
                w.write_record([x.to_string(), y.to_string(), self.values[(j, i)].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Anomaly percentile that also covers clouds with no spread on an axis.
///
/// A zero-spread axis acts as a point mass: an observation off that value has
/// zero density (every cloud point exceeds it), one on it is compared on the
/// remaining axis alone. With both axes degenerate an on-cloud observation
/// ties with every point and scores 0.
pub fn milestone_percentile(points: &[(f64, f64)], observed: (f64, f64), config: &KdeConfig) -> Result<f64, MilestoneError> {
    if points.is_empty() {
        return Err(MilestoneError::TooFewSamples(0));
    }
    match KdeModel::fit(points, config) {
        Ok(model) => Ok(model.anomaly_percentile(observed)),
        Err(MilestoneError::DegenerateBandwidth | MilestoneError::TooFewSamples(_)) => {
            let constant = |f: fn(&(f64, f64)) -> f64| {
                let v = f(&points[0]);
                points.iter().all(|p| f(p) == v).then_some(v)
            };
            let cx = constant(|p| p.0);
            let cy = constant(|p| p.1);
            if cx.is_some_and(|v| v != observed.0) || cy.is_some_and(|v| v != observed.1) {
                return Ok(1.0);
            }
            let free: Option<(Vec<f64>, f64)> = match (cx, cy) {
                (Some(_), Some(_)) => None,
                (Some(_), None) => Some((points.iter().map(|p| p.1).collect(), observed.1)),
                (None, Some(_)) => Some((points.iter().map(|p| p.0).collect(), observed.0)),
                (None, None) => return Err(MilestoneError::DegenerateBandwidth),
            };
            let Some((values, obs)) = free else { return Ok(0.0) };
            // One free axis: a 1-D KDE through the same machinery with a
            // constant partner coordinate.
            let h = match config.bandwidth {
                BandwidthRule::NormalReference => bandwidth_nrd(&values)?,
                BandwidthRule::Fixed { hx, hy } => {
                    if cx.is_some() {
                        hy
                    } else {
                        hx
                    }
                }
            };
            let line: Vec<(f64, f64)> = values.iter().map(|&v| (v, 0.0)).collect();
            let model = KdeModel::fit(
                &line,
                &KdeConfig {
                    bandwidth: BandwidthRule::Fixed { hx: h, hy: 1.0 },
                    kernel_scale: config.kernel_scale,
                },
            )?;
            Ok(model.anomaly_percentile((obs, 0.0)))
        }
        Err(e) => Err(e),
    }
}
