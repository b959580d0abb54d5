//! Per-cell streaming moments and the equilibrium reference fields.

use rayon::prelude::*;

use crate::error::StatsError;
use crate::fvm::DensityField;
use crate::geometry::MetricGrid;
use crate::potential::ExternalPotential;

/// Welford accumulator for one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMoments {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl CellMoments {
    pub fn new(cells: usize) -> Self {
        CellMoments {
            n: 0,
            mean: vec![0.0; cells],
            m2: vec![0.0; cells],
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.mean.len()
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<(), StatsError> {
        if sample.len() != self.mean.len() {
            return Err(StatsError::ShapeMismatch {
                expected: self.mean.len(),
                got: sample.len(),
            });
        }
        self.n += 1;
        let n = self.n as f64;
        for ((m, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(sample) {
            let delta = x - *m;
            *m += delta / n;
            *m2 += delta * (x - *m);
        }
        Ok(())
    }

    /// Combine with another accumulator over a disjoint stream (Chan et al.).
    pub fn merge(&mut self, other: &CellMoments) -> Result<(), StatsError> {
        if other.cells() != self.cells() {
            return Err(StatsError::ShapeMismatch {
                expected: self.cells(),
                got: other.cells(),
            });
        }
        if other.n == 0 {
            return Ok(());
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let total = na + nb;
        for k in 0..self.cells() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / total;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / total;
        }
        self.n += other.n;
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<Vec<f64>> {
        (self.n >= 2).then(|| self.m2.iter().map(|m2| m2 / (self.n - 1) as f64).collect())
    }
}

/// Moments of `rho` and of the per-cell counts `N_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    pub rho: CellMoments,
    pub counts: CellMoments,
}

impl RunningMoments {
    pub fn new(cells: usize) -> Self {
        RunningMoments {
            rho: CellMoments::new(cells),
            counts: CellMoments::new(cells),
        }
    }

    pub fn update(&mut self, rho: &[f64], counts: &[f64]) -> Result<(), StatsError> {
        if rho.len() != counts.len() {
            return Err(StatsError::ShapeMismatch {
                expected: rho.len(),
                got: counts.len(),
            });
        }
        self.rho.push(rho)?;
        self.counts.push(counts)
    }

    pub fn merge(&mut self, other: &RunningMoments) -> Result<(), StatsError> {
        self.rho.merge(&other.rho)?;
        self.counts.merge(&other.counts)
    }

    pub fn samples(&self) -> u64 {
        self.rho.count()
    }
}

/// Batch-means estimate of the standard error of a time average.
///
/// Consecutive samples are grouped into batches of `batch_len`; the spread of
/// the batch means absorbs the autocorrelation within a batch.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_len: u64,
    current: CellMoments,
    batches: CellMoments,
}

impl BatchMeans {
    pub fn new(cells: usize, batch_len: u64) -> Self {
        assert!(batch_len > 0);
        BatchMeans {
            batch_len,
            current: CellMoments::new(cells),
            batches: CellMoments::new(cells),
        }
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<(), StatsError> {
        self.current.push(sample)?;
        if self.current.count() == self.batch_len {
            self.batches.push(self.current.mean())?;
            self.current = CellMoments::new(self.current.cells());
        }
        Ok(())
    }

    pub fn batches(&self) -> u64 {
        self.batches.count()
    }

    /// Mean over completed batches.
    pub fn mean(&self) -> &[f64] {
        self.batches.mean()
    }

    /// Standard error of `mean()` per cell.
    pub fn standard_error(&self) -> Result<Vec<f64>, StatsError> {
        let var = self
            .batches
            .variance()
            .ok_or(StatsError::TooFewSamples(self.batches.count()))?;
        let nb = self.batches.count() as f64;
        Ok(var.into_iter().map(|v| (v / nb).sqrt()).collect())
    }
}

/// `N_ij = N rho_ij sqrt|G|_ij dx dy`.
pub fn rho_to_counts(rho: &[f64], grid: &MetricGrid, n: usize) -> Vec<f64> {
    let scale = n as f64 * grid.mesh().cell_area();
    rho.iter()
        .zip(grid.samples())
        .map(|(r, m)| scale * r * m.sqrt_det)
        .collect()
}

/// Inverse of `rho_to_counts`.
pub fn counts_to_rho(counts: &[f64], grid: &MetricGrid, n: usize) -> Vec<f64> {
    let scale = n as f64 * grid.mesh().cell_area();
    counts
        .iter()
        .zip(grid.samples())
        .map(|(c, m)| c / (scale * m.sqrt_det))
        .collect()
}

/// Equilibrium moments of the particle system, per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReference {
    pub mean_rho: f64,
    pub var_rho: Vec<f64>,
    pub mean_counts: Vec<f64>,
    pub var_counts: Vec<f64>,
}

/// Reference moments with `A_S` from the grid's midpoint sum:
/// `E rho = 1/A_S`, `Var rho = 1/(N A_S J dx dy)`, `E N_ij = Var N_ij = N J dx dy / A_S`.
pub fn theory_reference(grid: &MetricGrid, n: usize) -> TheoryReference {
    let area = grid.surface_area();
    let cell = grid.mesh().cell_area();
    let nf = n as f64;
    let mean_counts: Vec<f64> = grid
        .samples()
        .iter()
        .map(|m| nf * m.sqrt_det * cell / area)
        .collect();
    TheoryReference {
        mean_rho: 1.0 / area,
        var_rho: grid
            .samples()
            .iter()
            .map(|m| 1.0 / (nf * area * m.sqrt_det * cell))
            .collect(),
        var_counts: mean_counts.clone(),
        mean_counts,
    }
}

/// Mean particle counts under the Gibbs measure `e^-V nu / Z`, midpoint rule.
pub fn gibbs_mean_counts(grid: &MetricGrid, external: &ExternalPotential, n: usize) -> Vec<f64> {
    let weights: Vec<f64> = grid
        .cell_centers()
        .into_iter()
        .zip(grid.samples())
        .map(|(c, m)| m.sqrt_det * (-external.value(c)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| n as f64 * w / z).collect()
}

/// Mean counts with the Gibbs weight integrated over each cell by an
/// `sub x sub` midpoint rule, the occupancy particles actually sample.
///
/// Differs from [`gibbs_mean_counts`] by the `O(h^2)` error of the one-point rule.
pub fn cell_integrated_counts(
    grid: &MetricGrid,
    external: &ExternalPotential,
    n: usize,
    sub: usize,
) -> Vec<f64> {
    let mesh = *grid.mesh();
    let surface = grid.surface();
    let weights: Vec<f64> = (0..mesh.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % mesh.nx, k / mesh.nx);
            let mut w = 0.0;
            for b in 0..sub {
                for a in 0..sub {
                    let p = [
                        (i as f64 + (a as f64 + 0.5) / sub as f64) * mesh.dx,
                        (j as f64 + (b as f64 + 0.5) / sub as f64) * mesh.dy,
                    ];
                    let sqrt_det = surface.metric_only_at(p).map_or(f64::NAN, |m| m.sqrt_det);
                    w += sqrt_det * (-external.value(p)).exp();
                }
            }
            w
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| n as f64 * w / z).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub mean_rho: f64,
    pub var_rho: f64,
    pub mean_counts: f64,
    pub var_counts: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mean_rho: 0.02,
            var_rho: 0.10,
            mean_counts: 0.02,
            var_counts: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldComparison {
    pub name: &'static str,
    /// `estimate / reference - 1` per cell.
    pub relative_error: Vec<f64>,
    pub max_abs: f64,
    pub median_abs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl FieldComparison {
    fn new(name: &'static str, estimate: &[f64], reference: &[f64], tolerance: f64) -> Self {
        let relative_error: Vec<f64> = estimate
            .iter()
            .zip(reference)
            .map(|(e, r)| e / r - 1.0)
            .collect();
        let mut abs: Vec<f64> = relative_error.iter().map(|e| e.abs()).collect();
        abs.sort_by(|a, b| a.total_cmp(b));
        let max_abs = abs.last().copied().unwrap_or(0.0);
        let median_abs = if abs.is_empty() {
            0.0
        } else if abs.len() % 2 == 1 {
            abs[abs.len() / 2]
        } else {
            0.5 * (abs[abs.len() / 2 - 1] + abs[abs.len() / 2])
        };
        FieldComparison {
            name,
            relative_error,
            max_abs,
            median_abs,
            tolerance,
            pass: max_abs <= tolerance,
        }
    }
}

/// Moments against theory for the four equilibrium fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub samples: u64,
    pub fields: Vec<FieldComparison>,
}

impl ComparisonReport {
    pub fn pass(&self) -> bool {
        self.fields.iter().all(|f| f.pass)
    }

    pub fn field(&self, name: &str) -> Option<&FieldComparison> {
        self.fields.iter().find(|f| f.name == name)
    }
}

pub fn compare(
    acc: &RunningMoments,
    reference: &TheoryReference,
    tol: &Tolerances,
) -> Result<ComparisonReport, StatsError> {
    let var_rho = acc
        .rho
        .variance()
        .ok_or(StatsError::TooFewSamples(acc.samples()))?;
    let var_counts = acc
        .counts
        .variance()
        .ok_or(StatsError::TooFewSamples(acc.samples()))?;
    let cells = acc.rho.cells();
    if reference.var_rho.len() != cells {
        return Err(StatsError::ShapeMismatch {
            expected: cells,
            got: reference.var_rho.len(),
        });
    }
    let mean_ref = vec![reference.mean_rho; cells];
    let poisson: Vec<f64> = var_counts
        .iter()
        .zip(acc.counts.mean())
        .map(|(v, m)| v / m)
        .collect();
    Ok(ComparisonReport {
        samples: acc.samples(),
        fields: vec![
            FieldComparison::new("mean_rho", acc.rho.mean(), &mean_ref, tol.mean_rho),
            FieldComparison::new("var_rho", &var_rho, &reference.var_rho, tol.var_rho),
            FieldComparison::new(
                "mean_counts",
                acc.counts.mean(),
                &reference.mean_counts,
                tol.mean_counts,
            ),
            FieldComparison::new(
                "var_counts",
                &var_counts,
                &reference.var_counts,
                tol.var_counts,
            ),
            FieldComparison::new("poisson_ratio", &poisson, &vec![1.0; cells], tol.var_counts),
        ],
    })
}

/// One z-score comparison of two per-cell estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ZComparison {
    pub name: &'static str,
    /// `(a - b) / se` per cell.
    pub z: Vec<f64>,
    pub max_abs_z: f64,
    pub exceedances: usize,
    pub threshold: f64,
}

impl ZComparison {
    pub fn new(name: &'static str, a: &[f64], b: &[f64], se: &[f64], threshold: f64) -> Self {
        let z: Vec<f64> = a
            .iter()
            .zip(b)
            .zip(se)
            .map(|((a, b), s)| (a - b) / s)
            .collect();
        let max_abs_z = z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        let exceedances = z.iter().filter(|z| !(z.abs() <= threshold)).count();
        ZComparison {
            name,
            z,
            max_abs_z,
            exceedances,
            threshold,
        }
    }

    pub fn pass(&self) -> bool {
        self.exceedances == 0
    }

    /// Exceedances expected from Gaussian fluctuations alone.
    pub fn expected_exceedances(&self) -> f64 {
        self.z.len() as f64 * two_sided_tail(self.threshold)
    }
}

/// `P(|Z| > t)` for a standard normal.
pub fn two_sided_tail(t: f64) -> f64 {
    erfc(t / std::f64::consts::SQRT_2)
}

// Numerical Recipes erfc, relative error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Particle and grid mean counts against each other and against theory.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub particle_vs_theory: ZComparison,
    pub fvm_vs_theory: ZComparison,
    pub particle_vs_fvm: ZComparison,
}

impl CrossValidation {
    pub fn pass(&self) -> bool {
        self.comparisons().iter().all(|c| c.pass())
    }

    pub fn comparisons(&self) -> [&ZComparison; 3] {
        [
            &self.particle_vs_theory,
            &self.fvm_vs_theory,
            &self.particle_vs_fvm,
        ]
    }
}

/// Compare batch-mean count estimates within `k` standard errors.
pub fn cross_validate(
    particle: &BatchMeans,
    fvm: &BatchMeans,
    theory_counts: &[f64],
    k: f64,
) -> Result<CrossValidation, StatsError> {
    let (se_p, se_f) = (particle.standard_error()?, fvm.standard_error()?);
    if se_p.len() != theory_counts.len() || se_f.len() != theory_counts.len() {
        return Err(StatsError::ShapeMismatch {
            expected: theory_counts.len(),
            got: se_p.len().min(se_f.len()),
        });
    }
    let se_pf: Vec<f64> = se_p.iter().zip(&se_f).map(|(a, b)| a.hypot(*b)).collect();
    Ok(CrossValidation {
        particle_vs_theory: ZComparison::new(
            "particle_vs_theory",
            particle.mean(),
            theory_counts,
            &se_p,
            k,
        ),
        fvm_vs_theory: ZComparison::new("fvm_vs_theory", fvm.mean(), theory_counts, &se_f, k),
        particle_vs_fvm: ZComparison::new(
            "particle_vs_fvm",
            particle.mean(),
            fvm.mean(),
            &se_pf,
            k,
        ),
    })
}

/// Mass-weighted check that a density integrates to one.
pub fn total_probability(rho: &DensityField, grid: &MetricGrid) -> f64 {
    rho.mass(grid)
}
