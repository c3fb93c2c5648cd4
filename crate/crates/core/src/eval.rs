//! Sample-quality statistics: Wasserstein-2, energy distance, mode coverage,
//! drift fields on grids and kernel density heatmaps.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{dim, invalid, Result};
use crate::matrix::Matrix;
use crate::reference::GaussianMixture;
use crate::rng::Rng;

/// Largest sample size solved exactly by [`wasserstein2`].
pub const EXACT_W2_LIMIT: usize = 4096;
/// Projections used by the sliced approximation.
pub const SLICED_PROJECTIONS: usize = 256;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimum-cost perfect matching for an `n x n` cost given by `cost(i, j)`.
/// Returns `assignment[row] = column`.
///
/// Shortest augmenting paths (Jonker-Volgenant style, column prices only)
/// over a sparse candidate set holding each row's nearest columns. Once every
/// row is matched, a dense pass checks that each row sits at its cheapest
/// column under the final prices; rows that do not get the missing columns
/// added and are re-augmented. The result is therefore exactly optimal for
/// the full cost matrix, while the searches touch only a few columns per row.
pub fn min_cost_assignment(n: usize, cost: impl Fn(usize, usize) -> f64 + Sync) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let k = n.min(CANDIDATES);
    let edges: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cols: Vec<usize> = (0..n).collect();
            if k < n {
                cols.select_nth_unstable_by(k, |&a, &b| cost(i, a).total_cmp(&cost(i, b)));
                cols.truncate(k);
                // a few far columns keep the candidate graph connected across
                // clusters, so searches rarely dead-end
                let mut h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
                for _ in 0..LONG_EDGES {
                    h ^= h >> 33;
                    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
                    h ^= h >> 29;
                    let j = (h % n as u64) as usize;
                    if !cols.contains(&j) {
                        cols.push(j);
                    }
                }
            }
            cols
        })
        .collect();
    let mut lap = SparseLap {
        n,
        cost: &cost,
        edges,
        dense: vec![k == n; n],
        x: vec![NONE; n],
        y: vec![NONE; n],
        v: vec![0.0; n],
        d: vec![f64::INFINITY; n],
        pred: vec![0; n],
        settled: vec![false; n],
        mark: vec![false; n],
    };
    let mut free: Vec<usize> = (0..n).collect();
    loop {
        while let Some(i) = free.pop() {
            lap.augment(i, &mut free);
        }
        free = lap.violations();
        if free.is_empty() {
            return lap.x;
        }
    }
}

const NONE: usize = usize::MAX;
/// Nearest columns initially offered to each row.
const CANDIDATES: usize = 48;
/// Pseudo-random extra columns per row.
const LONG_EDGES: usize = 8;

struct SparseLap<'a, F> {
    n: usize,
    cost: &'a F,
    edges: Vec<Vec<usize>>,
    dense: Vec<bool>,
    /// column assigned to each row
    x: Vec<usize>,
    /// row assigned to each column
    y: Vec<usize>,
    /// column prices; every matched row sits at a cheapest `cost - price`
    /// among its candidate columns
    v: Vec<f64>,
    d: Vec<f64>,
    pred: Vec<usize>,
    settled: Vec<bool>,
    mark: Vec<bool>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed so BinaryHeap pops the smallest distance; ties by column
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl<F: Fn(usize, usize) -> f64 + Sync> SparseLap<'_, F> {
    fn reduced(&self, i: usize, j: usize) -> f64 {
        (self.cost)(i, j) - self.v[j]
    }

    fn cols_of(&self, i: usize) -> Box<dyn Iterator<Item = usize> + '_> {
        if self.dense[i] {
            Box::new(0..self.n)
        } else {
            Box::new(self.edges[i].iter().copied())
        }
    }

    fn unassign(&mut self, i: usize) {
        let j = self.x[i];
        if j != NONE {
            self.y[j] = NONE;
            self.x[i] = NONE;
        }
    }

    fn augment(&mut self, start: usize, free: &mut Vec<usize>) {
        loop {
            match self.shortest_path(start) {
                Some(end) => {
                    let mut j = end;
                    loop {
                        let i = self.pred[j];
                        self.y[j] = i;
                        let prev = std::mem::replace(&mut self.x[i], j);
                        if i == start {
                            return;
                        }
                        j = prev;
                    }
                }
                None => {
                    // no path inside the candidate graph: give every row the
                    // search reached its cheapest column outside the tree,
                    // which is the edge a dense search would try next
                    let mut rows = vec![start];
                    rows.extend((0..self.n).filter(|&j| self.settled[j]).map(|j| self.y[j]));
                    let mut added = Vec::with_capacity(rows.len());
                    for &i in &rows {
                        if self.dense[i] {
                            continue;
                        }
                        for &j in &self.edges[i] {
                            self.mark[j] = true;
                        }
                        let mut best = None;
                        let mut best_r = f64::INFINITY;
                        for j in 0..self.n {
                            if !self.settled[j] && !self.mark[j] {
                                let r = self.reduced(i, j);
                                if r < best_r {
                                    best_r = r;
                                    best = Some(j);
                                }
                            }
                        }
                        for &j in &self.edges[i] {
                            self.mark[j] = false;
                        }
                        match best {
                            Some(j) => added.push((i, j)),
                            None => self.dense[i] = true,
                        }
                    }
                    self.settled.fill(false);
                    for (i, j) in added {
                        self.edges[i].push(j);
                        let cur = self.x[i];
                        if i != start && cur != NONE && self.reduced(i, j) < self.reduced(i, cur) {
                            self.unassign(i);
                            free.push(i);
                        }
                    }
                }
            }
        }
    }

    fn shortest_path(&mut self, start: usize) -> Option<usize> {
        let mut touched = Vec::new();
        let mut heap = std::collections::BinaryHeap::new();
        let mut settled = Vec::new();
        for j in self.cols_of(start).collect::<Vec<_>>() {
            let dj = self.reduced(start, j);
            if dj < self.d[j] {
                if self.d[j] == f64::INFINITY {
                    touched.push(j);
                }
                self.d[j] = dj;
                self.pred[j] = start;
                heap.push(Entry(dj, j));
            }
        }
        let mut found = None;
        while let Some(Entry(dj, j)) = heap.pop() {
            if self.settled[j] || dj > self.d[j] {
                continue;
            }
            if self.y[j] == NONE {
                found = Some((j, dj));
                break;
            }
            self.settled[j] = true;
            settled.push(j);
            let i = self.y[j];
            let h = self.reduced(i, j) - dj;
            for j2 in self.cols_of(i).collect::<Vec<_>>() {
                if self.settled[j2] {
                    continue;
                }
                let nd = self.reduced(i, j2) - h;
                if nd < self.d[j2] {
                    if self.d[j2] == f64::INFINITY {
                        touched.push(j2);
                    }
                    self.d[j2] = nd;
                    self.pred[j2] = i;
                    heap.push(Entry(nd, j2));
                }
            }
        }
        if let Some((_, mind)) = found {
            for &j in &settled {
                self.v[j] += self.d[j] - mind;
            }
            for &j in &settled {
                self.settled[j] = false;
            }
        }
        // on failure the settled marks are left for the caller to inspect
        for j in touched {
            self.d[j] = f64::INFINITY;
        }
        found.map(|(j, _)| j)
    }

    /// Rows whose matched column is not a global cheapest under the current
    /// prices. Their candidate sets are widened and they are unassigned.
    /// An empty result means the assignment is optimal.
    fn violations(&mut self) -> Vec<usize> {
        let n = self.n;
        let found: Vec<(usize, Vec<usize>)> = (0..n)
            .into_par_iter()
            .filter_map(|i| {
                let here = self.reduced(i, self.x[i]);
                let tol = 1e-12 * here.abs().max(1.0);
                let mut better: Vec<(f64, usize)> =
                    (0..n).map(|j| (self.reduced(i, j), j)).filter(|&(r, _)| r < here - tol).collect();
                if better.is_empty() {
                    return None;
                }
                if better.len() > CANDIDATES {
                    better.select_nth_unstable_by(CANDIDATES, |a, b| a.0.total_cmp(&b.0));
                    better.truncate(CANDIDATES);
                }
                Some((i, better.into_iter().map(|(_, j)| j).collect()))
            })
            .collect();
        let mut rows = Vec::with_capacity(found.len());
        for (i, extra) in found {
            if !self.dense[i] {
                for j in extra {
                    if !self.edges[i].contains(&j) {
                        self.edges[i].push(j);
                    }
                }
            }
            self.unassign(i);
            rows.push(i);
        }
        rows
    }
}

/// How a Wasserstein value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum W2Method {
    Exact,
    Sliced { projections: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct W2 {
    pub value: f64,
    pub method: W2Method,
}

/// Exact 2-Wasserstein distance between equal-size empirical measures.
pub fn wasserstein2_exact(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(dim(format!("exact W2 needs equal sample counts, got {} and {}", a.rows(), b.rows())));
    }
    if a.cols() != b.cols() {
        return Err(dim("samples differ in dimension"));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let assign = min_cost_assignment(n, |i, j| sq_dist(a.row(i), b.row(j)));
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| sq_dist(a.row(i), b.row(j))).sum();
    Ok((total / n as f64).sqrt())
}

/// Sliced 2-Wasserstein distance: root mean over random directions of the
/// squared 1D distance between projected quantile functions.
pub fn sliced_wasserstein2(a: &Matrix, b: &Matrix, projections: usize, rng: &mut Rng) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(dim("samples differ in dimension"));
    }
    if a.rows() == 0 || b.rows() == 0 {
        return Err(invalid("sliced W2 needs nonempty samples"));
    }
    let d = a.cols();
    let m = a.rows().max(b.rows());
    let mut acc = 0.0;
    for _ in 0..projections {
        let mut dir = rng.normals(d);
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|x| *x /= norm);
        let proj = |x: &Matrix| {
            let mut p: Vec<f64> = x.iter_rows().map(|r| r.iter().zip(&dir).map(|(a, b)| a * b).sum()).collect();
            p.sort_by(f64::total_cmp);
            p
        };
        let (pa, pb) = (proj(a), proj(b));
        let q = |p: &[f64], k: usize| p[((k as f64 + 0.5) / m as f64 * p.len() as f64) as usize];
        acc += (0..m).map(|k| (q(&pa, k) - q(&pb, k)).powi(2)).sum::<f64>() / m as f64;
    }
    Ok((acc / projections as f64).sqrt())
}

/// W2 between two sample sets: exact up to [`EXACT_W2_LIMIT`] points, sliced
/// beyond that. The result says which was used.
pub fn wasserstein2(a: &Matrix, b: &Matrix, rng: &mut Rng) -> Result<W2> {
    if a.rows() <= EXACT_W2_LIMIT && b.rows() <= EXACT_W2_LIMIT {
        Ok(W2 { value: wasserstein2_exact(a, b)?, method: W2Method::Exact })
    } else {
        Ok(W2 {
            value: sliced_wasserstein2(a, b, SLICED_PROJECTIONS, rng)?,
            method: W2Method::Sliced { projections: SLICED_PROJECTIONS },
        })
    }
}

fn mean_pair_distance(a: &Matrix, b: &Matrix) -> f64 {
    let rows: Vec<f64> = (0..a.rows())
        .into_par_iter()
        .map(|i| b.iter_rows().map(|r| sq_dist(a.row(i), r).sqrt()).sum::<f64>())
        .collect();
    rows.iter().sum::<f64>() / (a.rows() as f64 * b.rows() as f64)
}

/// `2 E|A - B| - E|A - A'| - E|B - B'|` over all pairs (V-statistic).
pub fn energy_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(invalid("energy distance needs nonempty samples"));
    }
    if a.cols() != b.cols() {
        return Err(dim("samples differ in dimension"));
    }
    Ok(2.0 * mean_pair_distance(a, b) - mean_pair_distance(a, a) - mean_pair_distance(b, b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeReport {
    pub counts: Vec<usize>,
    pub fractions: Vec<f64>,
    pub radius: f64,
    pub missed: Vec<usize>,
    /// Samples farther than `radius` from every mean.
    pub unassigned: usize,
}

impl ModeReport {
    pub fn min_fraction(&self) -> f64 {
        self.fractions.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Assign each sample to the nearest component mean within `radius`.
pub fn mode_coverage(samples: &Matrix, g: &GaussianMixture, radius: f64) -> Result<ModeReport> {
    if !(radius > 0.0) {
        return Err(invalid("radius must be positive"));
    }
    if samples.cols() != g.dim() {
        return Err(dim("samples and mixture differ in dimension"));
    }
    let means = g.means();
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            if sq_dist(&means[i], &means[j]).sqrt() <= 2.0 * radius {
                return Err(invalid(format!("radius {radius} makes modes {i} and {j} overlap")));
            }
        }
    }
    let mut counts = vec![0; means.len()];
    let mut unassigned = 0;
    for x in samples.iter_rows() {
        // radii are disjoint, so at most one mean can be within reach
        match means.iter().position(|m| sq_dist(x, m) <= radius * radius) {
            Some(k) => counts[k] += 1,
            None => unassigned += 1,
        }
    }
    let n = samples.rows().max(1) as f64;
    Ok(ModeReport {
        fractions: counts.iter().map(|&c| c as f64 / n).collect(),
        missed: (0..means.len()).filter(|&k| counts[k] == 0).collect(),
        counts,
        radius,
        unassigned,
    })
}

/// Regular 2D grid over `[x_min, x_max] x [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self { x_min: -half_width, x_max: half_width, y_min: -half_width, y_max: half_width, nx: n, ny: n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(invalid("grid needs at least 2 nodes per axis"));
        }
        if !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(invalid("grid extents must be increasing"));
        }
        Ok(())
    }

    /// Node coordinates, x varying fastest.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            let y = self.y_min + (self.y_max - self.y_min) * iy as f64 / (self.ny - 1) as f64;
            for ix in 0..self.nx {
                let x = self.x_min + (self.x_max - self.x_min) * ix as f64 / (self.nx - 1) as f64;
                out.push([x, y]);
            }
        }
        out
    }

    pub fn as_matrix(&self) -> Matrix {
        let nodes = self.nodes();
        Matrix::from_fn(nodes.len(), 2, |i, j| nodes[i][j])
    }
}

/// A 2D vector field sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub grid: GridSpec,
    pub t: f64,
    /// One `[u, v]` per node, in [`GridSpec::nodes`] order.
    pub values: Vec<[f64; 2]>,
}

impl FieldGrid {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "x,y,u,v")?;
        for (p, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(w, "{},{},{},{}", p[0], p[1], v[0], v[1])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Evaluate `drift(t, points)` on every grid node. The drift sees all nodes
/// at once as an `n x 2` matrix so networks can run batched.
pub fn drift_field(drift: impl Fn(f64, &Matrix) -> Result<Matrix>, t: f64, grid: GridSpec) -> Result<FieldGrid> {
    grid.validate()?;
    let pts = grid.as_matrix();
    let out = drift(t, &pts)?;
    if out.shape() != pts.shape() {
        return Err(dim("drift must return one 2-vector per node"));
    }
    Ok(FieldGrid { grid, t, values: out.iter_rows().map(|r| [r[0], r[1]]).collect() })
}

/// Mean cosine similarity between two fields over the nodes where `keep` holds.
pub fn field_cosine(a: &FieldGrid, b: &FieldGrid, keep: impl Fn([f64; 2]) -> bool) -> Result<f64> {
    if a.grid != b.grid {
        return Err(dim("fields live on different grids"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((p, u), v) in a.grid.nodes().into_iter().zip(&a.values).zip(&b.values) {
        if !keep(p) {
            continue;
        }
        let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if nu == 0.0 || nv == 0.0 {
            continue;
        }
        total += (u[0] * v[0] + u[1] * v[1]) / (nu * nv);
        count += 1;
    }
    if count == 0 {
        return Err(invalid("no grid nodes selected"));
    }
    Ok(total / count as f64)
}

/// Gaussian kernel density estimate evaluated on a 2D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeGrid {
    pub grid: GridSpec,
    /// Kernel covariance `[[a, b], [b, c]]`.
    pub bandwidth: [f64; 3],
    pub density: Vec<f64>,
}

/// Scott's-rule kernel covariance: the sample covariance scaled by `n^(-2/(d+4))`.
pub fn scott_bandwidth(samples: &Matrix) -> Result<[f64; 3]> {
    if samples.cols() != 2 || samples.rows() < 2 {
        return Err(invalid("Scott's rule needs at least two 2D samples"));
    }
    let n = samples.rows() as f64;
    let m = samples.mean_row();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for r in samples.iter_rows() {
        let (dx, dy) = (r[0] - m[0], r[1] - m[1]);
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    let f = n.powf(-2.0 / 6.0) / (n - 1.0);
    Ok([a * f, b * f, c * f])
}

/// KDE with covariance `bandwidth` (Scott's rule if `None`).
pub fn kde(samples: &Matrix, grid: GridSpec, bandwidth: Option<[f64; 3]>) -> Result<KdeGrid> {
    grid.validate()?;
    if samples.cols() != 2 {
        return Err(dim("KDE grids are two-dimensional"));
    }
    if samples.rows() == 0 {
        return Err(invalid("KDE needs at least one sample"));
    }
    let bw = match bandwidth {
        Some(bw) => bw,
        None => scott_bandwidth(samples)?,
    };
    let det = bw[0] * bw[2] - bw[1] * bw[1];
    if !(det > 0.0) || !(bw[0] > 0.0) {
        return Err(invalid("kernel covariance must be positive definite"));
    }
    let (ia, ib, ic) = (bw[2] / det, -bw[1] / det, bw[0] / det);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt() * samples.rows() as f64);
    let density = grid
        .nodes()
        .par_iter()
        .map(|p| {
            samples
                .iter_rows()
                .map(|r| {
                    let (dx, dy) = (p[0] - r[0], p[1] - r[1]);
                    (-0.5 * (ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy)).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    Ok(KdeGrid { grid, bandwidth: bw, density })
}

impl KdeGrid {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "x,y,density")?;
        for (p, d) in self.grid.nodes().iter().zip(&self.density) {
            writeln!(w, "{},{},{:e}", p[0], p[1], d)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binary PPM (P6), one pixel per node, top row = largest y.
    pub fn write_ppm(&self, mut w: impl Write) -> Result<()> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let top = self.density.iter().cloned().fold(0.0, f64::max);
        let mut buf = format!("P6\n{nx} {ny}\n255\n").into_bytes();
        for iy in (0..ny).rev() {
            for ix in 0..nx {
                let v = if top > 0.0 { self.density[iy * nx + ix] / top } else { 0.0 };
                buf.extend_from_slice(&heat(v));
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Grid nodes that are strict local maxima (8-neighbourhood) with
    /// density at least `min_rel` of the global maximum.
    pub fn local_maxima(&self, min_rel: f64) -> Vec<[f64; 2]> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let nodes = self.grid.nodes();
        let top = self.density.iter().cloned().fold(0.0, f64::max);
        let mut out = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let v = self.density[iy * nx + ix];
                if v < min_rel * top {
                    continue;
                }
                let mut is_max = true;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                        if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                            continue;
                        }
                        if self.density[jy as usize * nx + jx as usize] >= v {
                            is_max = false;
                        }
                    }
                }
                if is_max {
                    out.push(nodes[iy * nx + ix]);
                }
            }
        }
        out
    }
}

/// Black-red-yellow-white ramp for `v` in `[0, 1]`.
fn heat(v: f64) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0) * 3.0;
    let c = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
    [c(v), c(v - 1.0), c(v - 2.0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_w2(a: &Matrix, b: &Matrix) -> f64 {
        fn perms(k: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, f: &mut dyn FnMut(&[usize])) {
            if cur.len() == k {
                f(cur);
                return;
            }
            for j in 0..k {
                if !used[j] {
                    used[j] = true;
                    cur.push(j);
                    perms(k, cur, used, f);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let n = a.rows();
        let mut best = f64::INFINITY;
        perms(n, &mut Vec::new(), &mut vec![false; n], &mut |p| {
            let c: f64 = (0..n).map(|i| sq_dist(a.row(i), b.row(p[i]))).sum();
            best = best.min(c);
        });
        (best / n as f64).sqrt()
    }

    #[test]
    fn exact_w2_matches_brute_force() {
        let mut rng = Rng::new(11);
        for trial in 0..200 {
            let n = 1 + trial % 7;
            let d = 1 + trial % 3;
            let a = Matrix::from_fn(n, d, |_, _| rng.normal());
            let b = Matrix::from_fn(n, d, |_, _| 2.0 * rng.normal() + 0.5);
            let exact = wasserstein2_exact(&a, &b).unwrap();
            let brute = brute_w2(&a, &b);
            assert!((exact - brute).abs() <= 1e-12 * brute.max(1.0), "n={n}: {exact} vs {brute}");
        }
    }

    // textbook O(n^3) Hungarian method with row and column potentials
    fn hungarian_cost(c: &[Vec<f64>]) -> f64 {
        let n = c.len();
        let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
        let mut p = vec![0usize; n + 1];
        let mut way = vec![0usize; n + 1];
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0;
            let mut minv = vec![f64::INFINITY; n + 1];
            let mut used = vec![false; n + 1];
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let (mut delta, mut j1) = (f64::INFINITY, 0);
                for j in 1..=n {
                    if !used[j] {
                        let cur = c[i0 - 1][j - 1] - u[i0] - v[j];
                        if cur < minv[j] {
                            minv[j] = cur;
                            way[j] = j0;
                        }
                        if minv[j] < delta {
                            delta = minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        (1..=n).map(|j| c[p[j] - 1][j - 1]).sum()
    }

    #[test]
    fn exact_w2_matches_hungarian_on_clustered_sets() {
        let g = GaussianMixture::six_modes();
        let mut rng = Rng::new(5);
        for n in [60, 250, 700] {
            let a = g.sample(n, &mut rng);
            // unequal cluster sizes force transport between modes
            let b = g.smooth(0.4).unwrap().sample(n, &mut rng);
            let c: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| sq_dist(a.row(i), b.row(j))).collect()).collect();
            let oracle = (hungarian_cost(&c) / n as f64).sqrt();
            let ours = wasserstein2_exact(&a, &b).unwrap();
            assert!((ours - oracle).abs() <= 1e-10 * oracle, "n={n}: {ours} vs {oracle}");
        }
    }

    #[test]
    fn w2_trivial_cases() {
        let a = Matrix::from_fn(5, 2, |i, j| (i * 3 + j) as f64);
        assert_eq!(wasserstein2_exact(&a, &a).unwrap(), 0.0);
        let p = Matrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        let q = Matrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        assert!((wasserstein2_exact(&p, &q).unwrap() - 5.0).abs() < 1e-15);
        assert!(wasserstein2_exact(&a, &p).is_err());
        let mut rng = Rng::new(0);
        let big = Matrix::from_fn(EXACT_W2_LIMIT + 1, 1, |i, _| i as f64);
        let w = wasserstein2(&big, &big, &mut rng).unwrap();
        assert_eq!(w.method, W2Method::Sliced { projections: 256 });
        assert_eq!(w.value, 0.0);
    }

    #[test]
    fn w2_is_metric_and_beats_permutations() {
        let mut rng = Rng::new(12);
        for _ in 0..100 {
            let n = 2 + rng.below(6);
            let m = |rng: &mut Rng| Matrix::from_fn(n, 2, |_, _| rng.normal() * 2.0);
            let (a, b, c) = (m(&mut rng), m(&mut rng), m(&mut rng));
            let ab = wasserstein2_exact(&a, &b).unwrap();
            let ba = wasserstein2_exact(&b, &a).unwrap();
            let bc = wasserstein2_exact(&b, &c).unwrap();
            let ac = wasserstein2_exact(&a, &c).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            assert!(ac <= ab + bc + 1e-12);
        }
        let n = 40;
        let a = Matrix::from_fn(n, 2, |_, _| rng.normal());
        let b = Matrix::from_fn(n, 2, |_, _| rng.normal() + 1.0);
        let w = wasserstein2_exact(&a, &b).unwrap();
        for _ in 0..50 {
            let mut p: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                p.swap(i, rng.below(i + 1));
            }
            let c: f64 = (0..n).map(|i| sq_dist(a.row(i), b.row(p[i]))).sum::<f64>() / n as f64;
            assert!(w <= c.sqrt() + 1e-12);
        }
    }

    #[test]
    fn sliced_w2_of_shifted_gaussians() {
        // W2 between N(0, I) and N(m, I) is |m|; each slice sees (m.u)^2, whose
        // mean over directions in 2D is |m|^2 / 2
        let mut rng = Rng::new(2);
        let a = Matrix::from_fn(5000, 2, |_, _| rng.normal());
        let b = Matrix::from_fn(5000, 2, |_, j| rng.normal() + if j == 0 { 2.0 } else { 0.0 });
        let s = sliced_wasserstein2(&a, &b, 256, &mut rng).unwrap();
        assert!((s - 2f64.sqrt()).abs() < 0.1, "{s}");
    }

    #[test]
    fn energy_distance_cases() {
        let mut rng = Rng::new(3);
        let a = Matrix::from_fn(50, 2, |_, _| rng.normal());
        assert!(energy_distance(&a, &a).unwrap().abs() < 1e-12);
        let p = Matrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        let q = Matrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        assert!((energy_distance(&p, &q).unwrap() - 10.0).abs() < 1e-12);
        let b = Matrix::from_fn(40, 2, |_, _| rng.normal() + 1.0);
        assert!((energy_distance(&a, &b).unwrap() - energy_distance(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn energy_distance_of_shifted_gaussians() {
        // 1D N(0,1) vs N(1,1): 2 E|X - Y + 1| - 2 E|X - X'| with X - Y ~ N(0, 2).
        // E|N(m, s^2)| = s sqrt(2/pi) exp(-m^2 / 2s^2) + m (1 - 2 Phi(-m/s)).
        let s = 2f64.sqrt();
        let e1 = s * (2.0 / std::f64::consts::PI).sqrt() * (-0.25f64).exp() + (1.0 - 2.0 * 0.239_750_061_093_477_5);
        let e0 = s * (2.0 / std::f64::consts::PI).sqrt();
        let want = 2.0 * e1 - 2.0 * e0;
        let mut rng = Rng::new(4);
        let a = Matrix::from_fn(1000, 1, |_, _| rng.normal());
        let b = Matrix::from_fn(1000, 1, |_, _| rng.normal() + 1.0);
        let got = energy_distance(&a, &b).unwrap();
        assert!((got - want).abs() <= 0.1 * want, "{got} vs {want}");
    }

    #[test]
    fn mode_coverage_cases() {
        let g = GaussianMixture::six_modes();
        let at_means = Matrix::from_fn(60, 2, |i, j| g.means()[i % 6][j]);
        let r = mode_coverage(&at_means, &g, 1.0).unwrap();
        assert!(r.fractions.iter().all(|&f| (f - 1.0 / 6.0).abs() < 1e-15));
        assert!(r.missed.is_empty());
        let origin = Matrix::zeros(10, 2);
        let r = mode_coverage(&origin, &g, 1.0).unwrap();
        assert_eq!(r.missed.len(), 6);
        assert_eq!(r.unassigned, 10);
        assert!(mode_coverage(&origin, &g, 3.0).is_err());
        let draws = g.sample(5000, &mut Rng::new(8));
        let r = mode_coverage(&draws, &g, 1.0).unwrap();
        assert!(r.fractions.iter().all(|&f| (f - 1.0 / 6.0).abs() <= 0.03), "{:?}", r.fractions);
        assert!(r.fractions.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn field_of_gaussian_target() {
        let g = GaussianMixture::gaussian(vec![0.0, 0.0], 0.5).unwrap();
        let grid = GridSpec::square(2.0, 5);
        let f = drift_field(
            |_, x| {
                let mut out = Matrix::zeros(x.rows(), 2);
                for i in 0..x.rows() {
                    out.row_mut(i).copy_from_slice(&g.score(x.row(i))?);
                }
                Ok(out)
            },
            1.0,
            grid,
        )
        .unwrap();
        for (p, v) in grid.nodes().iter().zip(&f.values) {
            assert!((v[0] + p[0] / 0.5).abs() < 1e-12 && (v[1] + p[1] / 0.5).abs() < 1e-12);
        }
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,u,v\n-2,-2,4,4\n"));
        assert_eq!(text.lines().count(), 26);
        assert!((field_cosine(&f, &f, |_| true).unwrap() - 1.0).abs() < 1e-12);
        assert!(GridSpec::square(1.0, 1).validate().is_err());
    }

    #[test]
    fn kde_peaks_sit_on_modes() {
        let g = GaussianMixture::six_modes();
        let draws = g.sample(5000, &mut Rng::new(6));
        let k = kde(&draws, GridSpec::square(7.0, 141), None).unwrap();
        let peaks = k.local_maxima(0.1);
        assert_eq!(peaks.len(), 6, "{peaks:?}");
        for m in g.means() {
            assert!(peaks.iter().any(|p| sq_dist(p, m).sqrt() <= 0.2));
        }
        let mut ppm = Vec::new();
        k.write_ppm(&mut ppm).unwrap();
        assert!(ppm.starts_with(b"P6\n141 141\n255\n"));
        assert_eq!(ppm.len(), 15 + 141 * 141 * 3);
    }

    #[test]
    fn kde_integrates_to_one() {
        let mut rng = Rng::new(1);
        let x = Matrix::from_fn(200, 2, |_, _| rng.normal());
        let grid = GridSpec::square(8.0, 161);
        let k = kde(&x, grid, None).unwrap();
        let cell = (16.0 / 160.0) * (16.0 / 160.0);
        let mass: f64 = k.density.iter().sum::<f64>() * cell;
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    }
}
