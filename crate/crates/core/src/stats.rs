//! Ensemble statistics: mergeable moments, tile histograms, empirical CDFs,
//! Gaussian reference CDFs and Kolmogorov–Smirnov distances.
//!
//! The dynamics are exact; everything here runs in `f64` on values converted
//! once from exact end states.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::bigrat::ExactPoint;
use crate::environment::Environment;
use crate::error::{invalid, Result};
use crate::Rational;

/// Tile coordinate; 1D tiles use `[k, 0]`.
pub type TileKey = [usize; 2];

/// Running mean and co-moment matrix (Welford / Chan), mergeable.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    dim: usize,
    count: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.comoment[i * self.dim + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Combines two disjoint sample sets.
    pub fn merge(&mut self, other: &Moments) {
        assert_eq!(self.dim, other.dim, "merging moments of different dimension");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.comoment[i * self.dim + j] +=
                    other.comoment[i * self.dim + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.count += other.count;
    }

    /// Unbiased sample covariance; zeros for fewer than two samples.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let denom = if self.count > 1 { (self.count - 1) as f64 } else { f64::INFINITY };
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.comoment[i * self.dim + j] / denom).collect())
            .collect()
    }
}

/// What one trajectory contributes to a summary.
#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub tile: TileKey,
    /// End position `vₙ` as floating point.
    pub position: Vec<f64>,
    /// `(vₙ − nD)/√n`.
    pub scaled: Vec<f64>,
    pub end_label: u8,
    pub stopped: bool,
    /// Labels at steps `t` and `t+1` when transition tracking is on.
    pub transition: Option<(u8, u8)>,
}

/// Statistics of an ensemble of trajectories after `n` steps.
///
/// Stopped trajectories appear in the tile histogram (at the tile where they
/// froze) and in `stopped_count`, but not in the moments, label counts or
/// retained samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub dim: usize,
    pub n: u64,
    pub count: u64,
    /// Moments of the end positions `vₙ`.
    pub moments: Moments,
    pub tile_histogram: BTreeMap<TileKey, u64>,
    pub label_counts: [u64; 2],
    pub stopped_count: u64,
    /// Flattened `(vₙ − nD)/√n` values, `dim` per trajectory, in trajectory order.
    pub scaled_samples: Option<Vec<f64>>,
    pub transition_counts: Option<[[u64; 2]; 2]>,
}

impl EnsembleSummary {
    pub fn empty(dim: usize, n: u64, retain_samples: bool, track_transitions: bool) -> Self {
        Self {
            dim,
            n,
            count: 0,
            moments: Moments::new(dim),
            tile_histogram: BTreeMap::new(),
            label_counts: [0; 2],
            stopped_count: 0,
            scaled_samples: retain_samples.then(Vec::new),
            transition_counts: track_transitions.then_some([[0; 2]; 2]),
        }
    }

    pub fn record(&mut self, t: &TrajectoryOutcome) {
        self.count += 1;
        *self.tile_histogram.entry(t.tile).or_insert(0) += 1;
        if t.stopped {
            self.stopped_count += 1;
            return;
        }
        self.moments.push(&t.position);
        self.label_counts[t.end_label as usize] += 1;
        if let Some(samples) = self.scaled_samples.as_mut() {
            samples.extend_from_slice(&t.scaled);
        }
        if let (Some(counts), Some((i, j))) = (self.transition_counts.as_mut(), t.transition) {
            counts[i as usize][j as usize] += 1;
        }
    }

    /// Appends `other`, which must describe the trajectories following ours.
    pub fn merge(&mut self, other: &EnsembleSummary) {
        assert_eq!((self.dim, self.n), (other.dim, other.n), "incompatible summaries");
        self.count += other.count;
        self.moments.merge(&other.moments);
        for (tile, c) in &other.tile_histogram {
            *self.tile_histogram.entry(*tile).or_insert(0) += c;
        }
        for l in 0..2 {
            self.label_counts[l] += other.label_counts[l];
        }
        self.stopped_count += other.stopped_count;
        if let (Some(a), Some(b)) = (self.scaled_samples.as_mut(), other.scaled_samples.as_ref()) {
            a.extend_from_slice(b);
        }
        if let (Some(a), Some(b)) = (self.transition_counts.as_mut(), other.transition_counts.as_ref()) {
            for i in 0..2 {
                for j in 0..2 {
                    a[i][j] += b[i][j];
                }
            }
        }
    }

    /// Mean end position.
    pub fn mean(&self) -> &[f64] {
        self.moments.mean()
    }

    /// `mean(vₙ)/n`.
    pub fn drift_estimate(&self) -> Vec<f64> {
        self.mean().iter().map(|m| m / self.n.max(1) as f64).collect()
    }

    /// Sample covariance of `vₙ/√n` (equivalently of `Zₙ/√n`).
    pub fn scaled_covariance(&self) -> Vec<Vec<f64>> {
        let n = self.n.max(1) as f64;
        self.moments
            .covariance()
            .into_iter()
            .map(|row| row.into_iter().map(|c| c / n).collect())
            .collect()
    }

    /// Fractions of all trajectories ending in label-0 and label-1 tiles.
    pub fn label_mass(&self) -> [f64; 2] {
        if self.count == 0 {
            return [0.0; 2];
        }
        let c = self.count as f64;
        [self.label_counts[0] as f64 / c, self.label_counts[1] as f64 / c]
    }
}

/// Trajectories per reduction chunk. Chunk boundaries depend only on the
/// trajectory index, never on the worker count.
pub const CHUNK: u64 = 1024;

/// Runs `count` trajectories in parallel and reduces them in index order.
pub fn collect_ensemble<F>(
    empty: EnsembleSummary,
    count: u64,
    run: F,
) -> Result<EnsembleSummary>
where
    F: Fn(u64) -> Result<TrajectoryOutcome> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let partials: Vec<Result<EnsembleSummary>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut part = empty.clone();
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                part.record(&run(i)?);
            }
            Ok(part)
        })
        .collect();
    let mut total = empty;
    for part in partials {
        total.merge(&part?);
    }
    Ok(total)
}

/// `(v − nD)/√n` for `v = tile + frac`, computed exactly and rounded once.
pub fn scaled_fluctuation(
    tile: &[usize],
    frac: Option<&ExactPoint>,
    n: u64,
    drift: &[Rational],
) -> Vec<f64> {
    assert!(n >= 1, "scaling needs at least one step");
    let root = (n as f64).sqrt();
    tile.iter()
        .zip(drift)
        .enumerate()
        .map(|(i, (&k, d))| {
            let mut offset = Rational::from_integer(BigInt::from(k)) - d * BigInt::from(n);
            if let Some(x) = frac {
                offset += Rational::new(
                    BigInt::from(x.numerators()[i].clone()),
                    BigInt::from(x.denominator().clone()),
                );
            }
            rational_f64(&offset) / root
        })
        .collect()
}

pub(crate) fn rational_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        0.0
    } else {
        r.to_f64().unwrap_or(f64::NAN)
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// CDF of `N(0, sigma2)` at `y`.
pub fn gaussian_cdf_1d(y: f64, sigma2: f64) -> f64 {
    assert!(sigma2 > 0.0, "variance must be positive");
    std_normal_cdf(y / sigma2.sqrt())
}

/// Validated 2×2 covariance of a centered bivariate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    sd: [f64; 2],
    rho: f64,
}

impl Gaussian2 {
    pub fn new(cov: [[f64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = cov;
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return invalid("covariance has non-finite entries");
        }
        if (b - c).abs() > 1e-12 * (1.0 + b.abs()) {
            return invalid("covariance is not symmetric");
        }
        if a <= 0.0 || d <= 0.0 || a * d - b * b <= 0.0 {
            return invalid("covariance is not positive definite");
        }
        let sd = [a.sqrt(), d.sqrt()];
        Ok(Self { sd, rho: b / (sd[0] * sd[1]) })
    }

    /// `P(X ≤ z₁, Y ≤ z₂)`.
    ///
    /// Integrates the conditional normal CDF of the second coordinate against
    /// the marginal density of the first, truncated at ±10 standard
    /// deviations, with composite 8-point Gauss–Legendre panels.
    pub fn cdf(&self, z: [f64; 2]) -> f64 {
        let u = z[0] / self.sd[0];
        let w = z[1] / self.sd[1];
        if u.is_nan() || w.is_nan() {
            return f64::NAN;
        }
        let hi = u.min(10.0);
        let lo = -10.0;
        if hi <= lo {
            return 0.0;
        }
        let cond_sd = (1.0 - self.rho * self.rho).sqrt();
        let integrand = |t: f64| {
            let arg = if w == f64::INFINITY {
                f64::INFINITY
            } else if w == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                (w - self.rho * t) / cond_sd
            };
            std_normal_pdf(t) * std_normal_cdf(arg)
        };
        let width = 0.25 * cond_sd.clamp(0.02, 1.0);
        let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        let mut sum = 0.0;
        for k in 0..panels {
            let a = lo + k as f64 * h;
            let mid = a + 0.5 * h;
            for (x, wt) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
                sum += wt * integrand(mid + 0.5 * h * x);
            }
        }
        (sum * 0.5 * h).clamp(0.0, 1.0)
    }
}

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// CDF of the centered bivariate normal with covariance `cov` at `z`.
pub fn gaussian_cdf_2d(z: [f64; 2], cov: [[f64; 2]; 2]) -> Result<f64> {
    Ok(Gaussian2::new(cov)?.cdf(z))
}

/// Empirical CDF of a one-dimensional sample.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return invalid("empirical CDF of an empty sample");
        }
        if samples.iter().any(|s| s.is_nan()) {
            return invalid("sample contains NaN");
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples `≤ t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= t) as f64 / self.sorted.len() as f64
    }

    /// Distinct sample values with the ECDF value just after each jump.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &s) in self.sorted.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.0 == s => last.1 = (i + 1) as f64 / n,
                _ => out.push((s, (i + 1) as f64 / n)),
            }
        }
        out
    }

    /// Exact `sup |F_emp − F|` for a continuous model CDF `F`.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let mut below = 0.0;
        let mut sup: f64 = 0.0;
        for (x, after) in self.steps() {
            let f = cdf(x);
            sup = sup.max((f - below).abs()).max((after - f).abs());
            below = after;
        }
        sup.min(1.0)
    }
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    Ok(EmpiricalCdf::new(samples)?.ks_distance(cdf))
}

/// Rectangular evaluation grid for 2D CDF comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub points_per_axis: usize,
    /// Half-width in empirical standard deviations.
    pub half_width_sd: f64,
}

impl Default for Grid2 {
    fn default() -> Self {
        Self {
            points_per_axis: 201,
            half_width_sd: 4.0,
        }
    }
}

/// Empirical and Gaussian CDFs on a grid centered at the origin spanning
/// `±half_width_sd` empirical standard deviations per axis. The Gaussian is
/// centered with the samples' empirical covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `xs` outer: entry `i·len(ys) + j` is at `(xs[i], ys[j])`.
    pub empirical: Vec<f64>,
    pub model: Vec<f64>,
    pub covariance: [[f64; 2]; 2],
}

pub fn evaluate_grid_2d(samples: &[[f64; 2]], grid: Grid2) -> Result<GridCdf> {
    if samples.is_empty() {
        return invalid("empty sample set");
    }
    if grid.points_per_axis < 2 {
        return invalid("grid needs at least two points per axis");
    }
    let mut m = Moments::new(2);
    for s in samples {
        m.push(s);
    }
    let c = m.covariance();
    let cov = [[c[0][0], c[0][1]], [c[1][0], c[1][1]]];
    let gauss = Gaussian2::new(cov)?;
    let g = grid.points_per_axis;
    let axis = |sd: f64| -> Vec<f64> {
        (0..g)
            .map(|i| -grid.half_width_sd * sd + 2.0 * grid.half_width_sd * sd * i as f64 / (g - 1) as f64)
            .collect()
    };
    let xs = axis(cov[0][0].sqrt());
    let ys = axis(cov[1][1].sqrt());
    // cell[i][j] counts samples whose first grid point at or above them is (i, j)
    let mut cell = vec![0u64; g * g];
    for s in samples {
        let i = xs.partition_point(|&x| x < s[0]);
        let j = ys.partition_point(|&y| y < s[1]);
        if i < g && j < g {
            cell[i * g + j] += 1;
        }
    }
    for i in 0..g {
        for j in 0..g {
            let mut v = cell[i * g + j];
            if i > 0 {
                v += cell[(i - 1) * g + j];
            }
            if j > 0 {
                v += cell[i * g + j - 1];
            }
            if i > 0 && j > 0 {
                v -= cell[(i - 1) * g + j - 1];
            }
            cell[i * g + j] = v;
        }
    }
    let total = samples.len() as f64;
    let empirical = cell.iter().map(|&c| c as f64 / total).collect();
    let model = (0..g * g)
        .into_par_iter()
        .map(|ij| gauss.cdf([xs[ij / g], ys[ij % g]]))
        .collect();
    Ok(GridCdf {
        xs,
        ys,
        empirical,
        model,
        covariance: cov,
    })
}

impl GridCdf {
    /// Largest absolute difference and the first grid point attaining it.
    pub fn max_difference(&self) -> GridKs {
        let g = self.ys.len();
        let mut best = GridKs {
            distance: 0.0,
            at: [self.xs[0], self.ys[0]],
            covariance: self.covariance,
        };
        for (ij, (e, m)) in self.empirical.iter().zip(&self.model).enumerate() {
            let d = (e - m).abs();
            if d > best.distance {
                best.distance = d;
                best.at = [self.xs[ij / g], self.ys[ij % g]];
            }
        }
        best
    }
}

/// `max |ECDF(z) − F(z)|` over the grid of [`evaluate_grid_2d`].
pub fn ks_distance_2d_grid(samples: &[[f64; 2]], grid: Grid2) -> Result<GridKs> {
    Ok(evaluate_grid_2d(samples, grid)?.max_difference())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridKs {
    pub distance: f64,
    pub at: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

/// Tile histograms restricted to label-0 and label-1 end tiles, with the
/// fraction of trajectories each one holds.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSplit {
    pub hist: [BTreeMap<TileKey, u64>; 2],
    pub mass: [f64; 2],
}

pub fn conditional_label_histograms(summary: &EnsembleSummary, env: &Environment) -> Result<LabelSplit> {
    let mut hist = [BTreeMap::new(), BTreeMap::new()];
    let mut totals = [0u64; 2];
    for (tile, &c) in &summary.tile_histogram {
        let label = match summary.dim {
            1 => env.label_at(tile[0])?,
            _ => env.label_at_2d(*tile)?,
        };
        hist[label as usize].insert(*tile, c);
        totals[label as usize] += c;
    }
    let all = (totals[0] + totals[1]).max(1) as f64;
    Ok(LabelSplit {
        hist,
        mass: [totals[0] as f64 / all, totals[1] as f64 / all],
    })
}

/// Binned per-tile frequency curves of the two labels on the scaled axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelCurves {
    /// Bin centers on the `(V − nD)/√n` axis.
    pub centers: Vec<f64>,
    /// Mean per-tile end frequency, times `√n`, over label-0 / label-1 tiles of each bin.
    pub density: [Vec<f64>; 2],
    pub bin_width: f64,
}

/// Groups tiles into bins `bin_width` wide on the scaled axis and averages
/// the end frequency over the tiles of each label inside every bin. Bins
/// lacking tiles of either label are dropped.
pub fn label_density_curves(
    env: &Environment,
    summary: &EnsembleSummary,
    drift: f64,
    bin_width: f64,
) -> Result<LabelCurves> {
    if summary.dim != 1 {
        return invalid("label density curves are defined for 1D ensembles");
    }
    if summary.count == 0 {
        return invalid("empty ensemble");
    }
    let n = summary.n as f64;
    let root = n.sqrt();
    let (lo, hi) = match (summary.tile_histogram.keys().next(), summary.tile_histogram.keys().last()) {
        (Some(a), Some(b)) => (a[0], b[0]),
        _ => return invalid("empty histogram"),
    };
    let bin_of = |k: usize| ((k as f64 - n * drift) / root / bin_width).floor() as i64;
    let mut acc: BTreeMap<i64, [(u64, u64); 2]> = BTreeMap::new();
    for k in lo..=hi {
        let label = env.label_at(k)? as usize;
        let c = summary.tile_histogram.get(&[k, 0]).copied().unwrap_or(0);
        let e = acc.entry(bin_of(k)).or_insert([(0, 0); 2]);
        e[label].0 += c;
        e[label].1 += 1;
    }
    let total = summary.count as f64;
    let mut curves = LabelCurves {
        centers: Vec::new(),
        density: [Vec::new(), Vec::new()],
        bin_width,
    };
    for (b, e) in acc {
        if e[0].1 == 0 || e[1].1 == 0 {
            continue;
        }
        curves.centers.push((b as f64 + 0.5) * bin_width);
        for l in 0..2 {
            curves.density[l].push(e[l].0 as f64 / e[l].1 as f64 / total * root);
        }
    }
    Ok(curves)
}

impl LabelCurves {
    /// `∫ |f₀ − ratio·f₁|` over the scaled axis.
    pub fn l1_distance(&self, ratio: f64) -> f64 {
        self.density[0]
            .iter()
            .zip(&self.density[1])
            .map(|(a, b)| (a - ratio * b).abs() * self.bin_width)
            .sum()
    }
}

/// Row-normalized label transition frequencies; `None` marks an empty row.
pub fn empirical_alpha(counts: &[[u64; 2]; 2]) -> [Option<[f64; 2]>; 2] {
    let row = |r: &[u64; 2]| {
        let t = r[0] + r[1];
        (t > 0).then(|| [r[0] as f64 / t as f64, r[1] as f64 / t as f64])
    };
    [row(&counts[0]), row(&counts[1])]
}

/// Total variation distance between two distributions given as tile → mass.
pub fn total_variation<K: Ord + Copy>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = a.keys().chain(b.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Tile histogram normalized to relative frequencies.
pub fn normalized_histogram(summary: &EnsembleSummary) -> BTreeMap<TileKey, f64> {
    let total = summary.count.max(1) as f64;
    summary
        .tile_histogram
        .iter()
        .map(|(k, &c)| (*k, c as f64 / total))
        .collect()
}
