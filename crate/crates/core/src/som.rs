//! Self-organizing maps on a hexagonal sheet lattice.
//!
//! Maps are sized from the data (principal-axis ratio around a target unit
//! count), initialized linearly on the plane of the two leading principal
//! components and trained in two phases: a rough phase with a wide
//! neighbourhood, then a fine phase that narrows it to one grid step.
//! Batch training is deterministic and independent of sample order;
//! sequential training shuffles with a seeded generator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds::mix_seed;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SomError {
    #[error("no training data")]
    EmptyData,
    #[error("vector {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("unit {unit} outside a map of {units} units")]
    UnitOutOfRange { unit: usize, units: usize },
    #[error("invalid prototype set: {0}")]
    InvalidPrototypes(String),
}

/// Lattice dimensions. Units are numbered row-major; odd rows are shifted
/// half a step to the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid needs at least one unit");
        Self { rows, cols }
    }

    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    /// Planar embedding of unit `u`.
    pub fn position(&self, u: usize) -> (f64, f64) {
        let (r, c) = (u / self.cols, u % self.cols);
        (c as f64 + 0.5 * (r % 2) as f64, r as f64 * SQRT3_2)
    }

    fn squared_distances(&self) -> Vec<f64> {
        let n = self.units();
        let pos: Vec<(f64, f64)> = (0..n).map(|u| self.position(u)).collect();
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                d2[i * n + j] = dx * dx + dy * dy;
            }
        }
        d2
    }
}

/// Euclidean distance between two units on the hexagonal embedding.
pub fn hex_distance(u: usize, v: usize, grid: &GridSpec) -> Result<f64, SomError> {
    let units = grid.units();
    for unit in [u, v] {
        if unit >= units {
            return Err(SomError::UnitOutOfRange { unit, units });
        }
    }
    let (a, b) = (grid.position(u), grid.position(v));
    Ok(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingMode {
    Batch,
    Sequential,
}

/// Map-independent training settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomConfig {
    pub target_units: usize,
    pub rough_epochs: usize,
    pub fine_epochs: usize,
    pub mode: TrainingMode,
    pub rough_alpha: (f64, f64),
    pub fine_alpha: (f64, f64),
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            target_units: 150,
            rough_epochs: 40,
            fine_epochs: 200,
            mode: TrainingMode::Batch,
            rough_alpha: (0.5, 0.05),
            fine_alpha: (0.05, 0.01),
        }
    }
}

impl SomConfig {
    /// Resolves the neighbourhood radii for a concrete grid.
    pub fn schedule_for(&self, grid: &GridSpec) -> TrainingSchedule {
        let side = grid.rows.max(grid.cols) as f64;
        let rough_end = (side / 16.0).max(1.0);
        let rough_start = (side / 4.0).max(rough_end);
        TrainingSchedule {
            rough_epochs: self.rough_epochs,
            fine_epochs: self.fine_epochs,
            rough_sigma: (rough_start, rough_end),
            fine_sigma: (rough_end, 1.0),
            mode: self.mode,
            rough_alpha: self.rough_alpha,
            fine_alpha: self.fine_alpha,
        }
    }
}

/// Fully resolved two-phase schedule. Radii and learning rates change
/// linearly from epoch to epoch within each phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub rough_epochs: usize,
    pub fine_epochs: usize,
    pub rough_sigma: (f64, f64),
    pub fine_sigma: (f64, f64),
    pub mode: TrainingMode,
    /// Sequential mode only.
    pub rough_alpha: (f64, f64),
    pub fine_alpha: (f64, f64),
}

fn ramp((start, end): (f64, f64), step: usize, steps: usize) -> f64 {
    if steps <= 1 {
        start
    } else {
        start + (end - start) * step as f64 / (steps - 1) as f64
    }
}

impl TrainingSchedule {
    pub fn total_epochs(&self) -> usize {
        self.rough_epochs + self.fine_epochs
    }

    fn phase(&self, epoch: usize) -> (usize, usize, bool) {
        if epoch < self.rough_epochs {
            (epoch, self.rough_epochs, true)
        } else {
            (epoch - self.rough_epochs, self.fine_epochs, false)
        }
    }

    pub fn sigma_at(&self, epoch: usize) -> f64 {
        let (step, steps, rough) = self.phase(epoch);
        ramp(if rough { self.rough_sigma } else { self.fine_sigma }, step, steps)
    }

    pub fn alpha_at(&self, epoch: usize) -> f64 {
        let (step, steps, rough) = self.phase(epoch);
        ramp(if rough { self.rough_alpha } else { self.fine_alpha }, step, steps)
    }

    /// Canonical text form, used for provenance digests.
    pub fn describe(&self) -> String {
        format!(
            "mode={:?};rough={}:{:e}->{:e};fine={}:{:e}->{:e};alpha={:e}->{:e},{:e}->{:e}",
            self.mode,
            self.rough_epochs,
            self.rough_sigma.0,
            self.rough_sigma.1,
            self.fine_epochs,
            self.fine_sigma.0,
            self.fine_sigma.1,
            self.rough_alpha.0,
            self.rough_alpha.1,
            self.fine_alpha.0,
            self.fine_alpha.1,
        )
    }
}

/// Trained (or initialized) prototype vectors, one per grid unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    grid: GridSpec,
    dim: usize,
    values: Vec<f64>,
}

impl PrototypeSet {
    pub fn new(grid: GridSpec, dim: usize, values: Vec<f64>) -> Result<Self, SomError> {
        if dim == 0 {
            return Err(SomError::InvalidPrototypes("zero dimension".into()));
        }
        if values.len() != grid.units() * dim {
            return Err(SomError::InvalidPrototypes(format!(
                "{} values for {} units of dimension {dim}",
                values.len(),
                grid.units()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SomError::InvalidPrototypes(format!("non-finite value at {i}")));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn units(&self) -> usize {
        self.grid.units()
    }

    pub fn prototype(&self, u: usize) -> &[f64] {
        &self.values[u * self.dim..(u + 1) * self.dim]
    }

    pub fn prototypes(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nearest unit and squared distance. Ties go to the lowest index.
    fn nearest(&self, v: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (u, proto) in self.values.chunks_exact(self.dim).enumerate() {
            let mut acc = 0.0;
            let mut pruned = false;
            for (xs, ps) in v.chunks(8).zip(proto.chunks(8)) {
                for (x, p) in xs.iter().zip(ps) {
                    let d = x - p;
                    acc += d * d;
                }
                if acc >= best.1 {
                    pruned = true;
                    break;
                }
            }
            if !pruned && acc < best.1 {
                best = (u, acc);
            }
        }
        best
    }

    fn check_dim(&self, v: &[f64], index: usize) -> Result<(), SomError> {
        if v.len() != self.dim {
            return Err(SomError::DimensionMismatch {
                index,
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }
}

/// Best-matching unit of `v` and its Euclidean distance.
pub fn bmu(protos: &PrototypeSet, v: &[f64]) -> Result<(usize, f64), SomError> {
    protos.check_dim(v, 0)?;
    let (u, d2) = protos.nearest(v);
    Ok((u, d2.sqrt()))
}

/// Mean best-matching-unit distance over `data`.
pub fn quantization_error<V: AsRef<[f64]> + Sync>(protos: &PrototypeSet, data: &[V]) -> Result<f64, SomError> {
    if data.is_empty() {
        return Err(SomError::EmptyData);
    }
    for (i, v) in data.iter().enumerate() {
        protos.check_dim(v.as_ref(), i)?;
    }
    let total: f64 = data.iter().map(|v| protos.nearest(v.as_ref()).1.sqrt()).sum();
    Ok(total / data.len() as f64)
}

fn check_data<V: AsRef<[f64]>>(data: &[V]) -> Result<usize, SomError> {
    let first = data.first().ok_or(SomError::EmptyData)?.as_ref().len();
    if first == 0 {
        return Err(SomError::DimensionMismatch {
            index: 0,
            expected: 1,
            found: 0,
        });
    }
    for (index, v) in data.iter().enumerate() {
        if v.as_ref().len() != first {
            return Err(SomError::DimensionMismatch {
                index,
                expected: first,
                found: v.as_ref().len(),
            });
        }
    }
    Ok(first)
}

/// Mean and the two leading principal axes (eigenvalue, unit eigenvector) of
/// the population covariance. Missing axes (dimension 1) come back as zero.
struct PrincipalAxes {
    mean: Vec<f64>,
    axes: [(f64, Vec<f64>); 2],
}

fn principal_axes<V: AsRef<[f64]>>(data: &[V], dim: usize) -> PrincipalAxes {
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in data {
        for (m, x) in mean.iter_mut().zip(v.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for v in data {
        for ((c, x), m) in centered.iter_mut().zip(v.as_ref()).zip(&mean) {
            *c = x - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axis = |k: usize| -> (f64, Vec<f64>) {
        match order.get(k) {
            Some(&i) => {
                let mut vec: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                // Fix the sign so the largest-magnitude component is positive.
                let pivot = vec
                    .iter()
                    .copied()
                    .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
                if pivot < 0.0 {
                    vec.iter_mut().for_each(|x| *x = -*x);
                }
                (eig.eigenvalues[i].max(0.0), vec)
            }
            None => (0.0, vec![0.0; dim]),
        }
    };
    PrincipalAxes {
        mean,
        axes: [axis(0), axis(1)],
    }
}

const MAX_SIDE_RATIO: f64 = 5.0;

/// Chooses grid sides whose ratio follows the spread of the data along its
/// two leading principal axes, with `rows >= cols` and about `target_units`
/// units in total (always within 20%).
pub fn plan_grid<V: AsRef<[f64]>>(data: &[V], target_units: usize) -> GridSpec {
    let target = target_units.max(1);
    let ratio = match check_data(data) {
        Ok(dim) if data.len() >= 2 => {
            let pa = principal_axes(data, dim);
            let (l1, l2) = (pa.axes[0].0, pa.axes[1].0);
            if l1 <= 1e-24 {
                1.0
            } else if l2 <= 1e-12 * l1 {
                MAX_SIDE_RATIO
            } else {
                (l1 / l2).sqrt().clamp(1.0, MAX_SIDE_RATIO)
            }
        }
        _ => 1.0,
    };
    let cols = ((target as f64 / ratio).sqrt().round() as usize).max(1);
    let mut rows = ((target as f64 / cols as f64).round() as usize).max(1);
    let (lo, hi) = (0.8 * target as f64, 1.2 * target as f64);
    while ((rows * cols) as f64) > hi && rows > 1 {
        rows -= 1;
    }
    while ((rows * cols) as f64) < lo {
        rows += 1;
    }
    GridSpec::new(rows, cols)
}

/// Linear initialization on the plane of the two leading principal axes.
/// The longer grid side follows the first axis; grid coordinates map to
/// `[-2σ, 2σ]`. Directions the data does not span are filled with small
/// seeded noise, centred so the prototype centroid stays at the data mean.
pub fn init_linear<V: AsRef<[f64]>>(data: &[V], grid: &GridSpec, seed: u64) -> Result<PrototypeSet, SomError> {
    let dim = check_data(data)?;
    let pa = principal_axes(data, dim);
    let (l1, l2) = (pa.axes[0].0, pa.axes[1].0);
    let rank0 = l1 <= 1e-24;
    let rank1 = rank0 || l2 <= 1e-12 * l1;
    let noise_scale = 1e-3 * if rank0 { 1.0 } else { l1.sqrt().max(1e-6) };

    let units = grid.units();
    let (long_side, short_side) = (grid.rows.max(grid.cols), grid.rows.min(grid.cols));
    let span = |i: usize, n: usize| if n > 1 { -1.0 + 2.0 * i as f64 / (n - 1) as f64 } else { 0.0 };
    let mut values = vec![0.0; units * dim];
    for u in 0..units {
        let (r, c) = (u / grid.cols, u % grid.cols);
        let (a, b) = if grid.rows >= grid.cols {
            (span(r, long_side), span(c, short_side))
        } else {
            (span(c, long_side), span(r, short_side))
        };
        let proto = &mut values[u * dim..(u + 1) * dim];
        proto.copy_from_slice(&pa.mean);
        for (k, coord) in [(0, a), (1, b)] {
            let (lambda, ref axis) = pa.axes[k];
            let deficient = if k == 0 { rank0 } else { rank1 };
            if deficient {
                continue;
            }
            let scale = 2.0 * lambda.sqrt() * coord;
            for (p, e) in proto.iter_mut().zip(axis) {
                *p += scale * e;
            }
        }
    }

    // Identical inputs leave nothing to spread; every prototype is the datum.
    if rank1 && !rank0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x1417));
        let mut noise: Vec<f64> = (0..units * dim)
            .map(|_| noise_scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        for d in 0..dim {
            let m = (0..units).map(|u| noise[u * dim + d]).sum::<f64>() / units as f64;
            for u in 0..units {
                noise[u * dim + d] -= m;
            }
        }
        for (v, e) in values.iter_mut().zip(&noise) {
            *v += e;
        }
    }
    PrototypeSet::new(*grid, dim, values)
}

fn kernel(d2: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        if d2 == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (-d2 / (2.0 * sigma * sigma)).exp()
    }
}

/// Linear initialization followed by the two-phase schedule.
pub fn train<V: AsRef<[f64]> + Sync>(
    data: &[V],
    grid: &GridSpec,
    schedule: &TrainingSchedule,
    seed: u64,
) -> Result<PrototypeSet, SomError> {
    let init = init_linear(data, grid, seed)?;
    train_from(init, data, schedule, seed)
}

/// Runs the schedule starting from an existing prototype set.
pub fn train_from<V: AsRef<[f64]> + Sync>(
    mut protos: PrototypeSet,
    data: &[V],
    schedule: &TrainingSchedule,
    seed: u64,
) -> Result<PrototypeSet, SomError> {
    let dim = check_data(data)?;
    if dim != protos.dim {
        return Err(SomError::DimensionMismatch {
            index: 0,
            expected: protos.dim,
            found: dim,
        });
    }
    let d2 = protos.grid.squared_distances();
    match schedule.mode {
        TrainingMode::Batch => {
            for epoch in 0..schedule.total_epochs() {
                batch_epoch(&mut protos, data, &d2, schedule.sigma_at(epoch));
            }
        }
        TrainingMode::Sequential => {
            let mut order: Vec<usize> = (0..data.len()).collect();
            for epoch in 0..schedule.total_epochs() {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, epoch as u64 + 1));
                order.shuffle(&mut rng);
                sequential_epoch(
                    &mut protos,
                    data,
                    &order,
                    &d2,
                    schedule.sigma_at(epoch),
                    schedule.alpha_at(epoch),
                );
            }
        }
    }
    Ok(protos)
}

fn batch_epoch<V: AsRef<[f64]> + Sync>(protos: &mut PrototypeSet, data: &[V], d2: &[f64], sigma: f64) {
    let (units, dim) = (protos.units(), protos.dim);
    let bmus: Vec<usize> = data.par_iter().map(|v| protos.nearest(v.as_ref()).0).collect();

    let mut sums = vec![0.0; units * dim];
    let mut counts = vec![0usize; units];
    for (v, &b) in data.iter().zip(&bmus) {
        counts[b] += 1;
        for (s, x) in sums[b * dim..(b + 1) * dim].iter_mut().zip(v.as_ref()) {
            *s += x;
        }
    }
    let active: Vec<usize> = (0..units).filter(|&u| counts[u] > 0).collect();

    let mut num = vec![0.0; dim];
    for j in 0..units {
        num.iter_mut().for_each(|x| *x = 0.0);
        let mut den = 0.0;
        for &u in &active {
            let h = kernel(d2[j * units + u], sigma);
            if h == 0.0 {
                continue;
            }
            den += h * counts[u] as f64;
            for (n, s) in num.iter_mut().zip(&sums[u * dim..(u + 1) * dim]) {
                *n += h * s;
            }
        }
        if den > 0.0 {
            for (p, n) in protos.values[j * dim..(j + 1) * dim].iter_mut().zip(&num) {
                *p = n / den;
            }
        }
    }
}

fn sequential_epoch<V: AsRef<[f64]>>(
    protos: &mut PrototypeSet,
    data: &[V],
    order: &[usize],
    d2: &[f64],
    sigma: f64,
    alpha: f64,
) {
    let (units, dim) = (protos.units(), protos.dim);
    for &i in order {
        let x = data[i].as_ref();
        let (b, _) = protos.nearest(x);
        for j in 0..units {
            let step = alpha * kernel(d2[b * units + j], sigma);
            if step == 0.0 {
                continue;
            }
            for (p, xv) in protos.values[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                *p += step * (xv - *p);
            }
        }
    }
}
