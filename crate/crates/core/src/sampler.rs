//! Exact Gaussian sampling over mesh points: dense Cholesky with an
//! escalating jitter schedule, and replicate batches driven by per-replicate
//! counter-based streams so parallel runs are bit-reproducible.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::ManifoldMesh;

/// Relative jitter levels tried in order before giving up.
const JITTER_SCHEDULE: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

pub struct FactorizedCovariance {
    /// The points the covariance was built on (ambient coordinates).
    pub points: Vec<DVector<f64>>,
    /// Lower-triangular factor with `L L^T = Sigma + jitter I`.
    pub factor: DMatrix<f64>,
    /// Absolute diagonal shift that was needed; 0 for clean factorizations.
    pub jitter_used: f64,
}

/// Cholesky with jitter escalation relative to the mean diagonal.
pub fn factorize_matrix(sigma: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let k = sigma.nrows();
    assert_eq!(k, sigma.ncols(), "covariance must be square");
    let scale = sigma.diagonal().mean().max(f64::MIN_POSITIVE);
    for rel in JITTER_SCHEDULE {
        let jit = rel * scale;
        let mut shifted = sigma.clone();
        for i in 0..k {
            shifted[(i, i)] += jit;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            let l = chol.unpack();
            if l.iter().all(|x| x.is_finite()) {
                return Ok((l, jit));
            }
        }
    }
    Err(Error::NotPositiveDefinite {
        max_jitter: JITTER_SCHEDULE[JITTER_SCHEDULE.len() - 1] * scale,
    })
}

pub fn factorize(model: &CovarianceModel, h: f64, mesh: &ManifoldMesh) -> Result<FactorizedCovariance> {
    let pts: Vec<DVector<f64>> = mesh.points.iter().map(|p| p.position.clone()).collect();
    let k = pts.len();
    if k == 0 {
        return Err(Error::InvalidParameter("cannot factorize over an empty mesh".into()));
    }
    let sigma = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            model.cov_unchecked(h, &pts[i], &pts[j])
        }
    });
    let (factor, jitter_used) = factorize_matrix(&sigma)?;
    Ok(FactorizedCovariance {
        points: pts,
        factor,
        jitter_used,
    })
}

pub struct FieldBatch {
    /// Per-replicate field values (reps x points); empty when sampling was
    /// requested sup-only.
    pub realizations: Vec<Vec<f64>>,
    pub sup_abs: Vec<f64>,
    pub sup_pos: Vec<f64>,
    pub seed: u64,
}

/// The RNG stream for one replicate: a fixed cipher keyed by the master
/// seed, with the replicate index as the stream counter. Thread-schedule
/// independent by construction.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 + 1);
    rng
}

/// `x = L z` exploiting lower-triangular structure, column-major.
pub fn lower_tri_matvec(l: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let k = z.len();
    let mut x = vec![0.0; k];
    for j in 0..k {
        let zj = z[j];
        let col = l.column(j);
        for i in j..k {
            x[i] += col[i] * zj;
        }
    }
    x
}

fn draw_replicate(factor: &DMatrix<f64>, seed: u64, rep: usize) -> Vec<f64> {
    let mut rng = replicate_rng(seed, rep);
    let k = factor.nrows();
    let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    lower_tri_matvec(factor, &z)
}

fn sups(x: &[f64]) -> (f64, f64) {
    let mut abs: f64 = 0.0;
    let mut pos = f64::NEG_INFINITY;
    for &v in x {
        abs = abs.max(v.abs());
        pos = pos.max(v);
    }
    (abs, pos)
}

fn assemble(reps: usize, seed: u64, rows: Vec<(Vec<f64>, f64, f64)>, keep: bool) -> FieldBatch {
    let mut batch = FieldBatch {
        realizations: Vec::with_capacity(if keep { reps } else { 0 }),
        sup_abs: Vec::with_capacity(reps),
        sup_pos: Vec::with_capacity(reps),
        seed,
    };
    for (x, a, p) in rows {
        if keep {
            batch.realizations.push(x);
        }
        batch.sup_abs.push(a);
        batch.sup_pos.push(p);
    }
    batch
}

fn run_batch(fc: &FactorizedCovariance, reps: usize, seed: u64, keep: bool, sequential: bool) -> FieldBatch {
    let work = |rep: usize| {
        let x = draw_replicate(&fc.factor, seed, rep);
        let (a, p) = sups(&x);
        (if keep { x } else { Vec::new() }, a, p)
    };
    let rows = if sequential {
        exec::map_replicates_seq(reps, work)
    } else {
        exec::map_replicates(reps, work)
    };
    assemble(reps, seed, rows, keep)
}

/// Samples `reps` replicates, keeping full realizations.
pub fn sample_batch(fc: &FactorizedCovariance, reps: usize, seed: u64) -> FieldBatch {
    run_batch(fc, reps, seed, true, false)
}

/// Sequential twin of [`sample_batch`]; the benchmark suite compares them.
pub fn sample_batch_seq(fc: &FactorizedCovariance, reps: usize, seed: u64) -> FieldBatch {
    run_batch(fc, reps, seed, true, true)
}

/// Sup-statistics only; avoids storing reps x points values on large runs.
pub fn sample_sups(fc: &FactorizedCovariance, reps: usize, seed: u64) -> FieldBatch {
    run_batch(fc, reps, seed, false, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExceedanceMode {
    /// P(sup |X| <= theta), from `sup_abs`.
    Abs,
    /// P(sup X > theta), from `sup_pos`.
    Pos,
}

/// Empirical probabilities with binomial standard errors, one per threshold.
pub fn empirical_exceedance(
    batch: &FieldBatch,
    thresholds: &[f64],
    mode: ExceedanceMode,
) -> Vec<(f64, f64)> {
    let n = batch.sup_abs.len();
    thresholds
        .iter()
        .map(|&theta| {
            let hits = match mode {
                ExceedanceMode::Abs => batch.sup_abs.iter().filter(|&&s| s <= theta).count(),
                ExceedanceMode::Pos => batch.sup_pos.iter().filter(|&&s| s > theta).count(),
            };
            let p = hits as f64 / n as f64;
            (p, (p * (1.0 - p) / n as f64).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceModel;
    use crate::geometry::{build_mesh, make_builtin, BuiltinKind};

    fn two_point_factor(rho: f64) -> FactorizedCovariance {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let (factor, jitter_used) = factorize_matrix(&sigma).unwrap();
        FactorizedCovariance {
            points: vec![DVector::zeros(1), DVector::from_vec(vec![1.0])],
            factor,
            jitter_used,
        }
    }

    #[test]
    fn single_point_factor_is_one() {
        let (l, jit) = factorize_matrix(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(l[(0, 0)], 1.0);
        assert_eq!(jit, 0.0);
    }

    #[test]
    fn hand_cholesky_two_points() {
        let rho = (-1.0f64).exp();
        let fc = two_point_factor(rho);
        assert!((fc.factor[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((fc.factor[(1, 0)] - rho).abs() < 1e-14);
        assert!((fc.factor[(1, 1)] - (1.0 - rho * rho).sqrt()).abs() < 1e-14);
        assert_eq!(fc.factor[(0, 1)], 0.0);
    }

    #[test]
    fn duplicated_point_never_nan() {
        let sigma = DMatrix::from_element(2, 2, 1.0); // rank 1
        match factorize_matrix(&sigma) {
            Ok((l, jit)) => {
                assert!(jit <= 1e-6);
                assert!(l.iter().all(|x| x.is_finite()));
            }
            Err(Error::NotPositiveDefinite { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn reconstruction_bound() {
        let circle = make_builtin(BuiltinKind::Circle { radius: 1.0 }).unwrap();
        let mesh = build_mesh(&circle, 0.5, 0.2).unwrap();
        let model = CovarianceModel::powered_exponential(2.0, DMatrix::identity(2, 2)).unwrap();
        let fc = factorize(&model, 0.5, &mesh).unwrap();
        let k = fc.points.len();
        let sigma = DMatrix::from_fn(k, k, |i, j| {
            if i == j { 1.0 } else { model.cov_unchecked(0.5, &fc.points[i], &fc.points[j]) }
        });
        let resid = (&fc.factor * fc.factor.transpose() - &sigma).amax();
        assert!(resid <= fc.jitter_used + 1e-8 * sigma.amax());
        assert!(fc.jitter_used <= 1e-6);
    }

    #[test]
    fn determinism_same_seed() {
        let fc = two_point_factor(0.5);
        let a = sample_batch(&fc, 64, 99);
        let b = sample_batch(&fc, 64, 99);
        assert_eq!(a.realizations, b.realizations);
        assert_eq!(a.sup_abs, b.sup_abs);
        let c = sample_batch(&fc, 64, 100);
        assert_ne!(a.realizations, c.realizations);
    }

    #[test]
    fn parallel_matches_sequential() {
        let fc = two_point_factor(0.3);
        let a = sample_batch(&fc, 257, 5);
        let b = sample_batch_seq(&fc, 257, 5);
        assert_eq!(a.realizations, b.realizations);
        assert_eq!(a.sup_pos, b.sup_pos);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn thread_count_invariance() {
        let fc = two_point_factor(0.7);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| sample_batch(&fc, 500, 123).sup_abs)
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn empirical_correlation_two_points() {
        let rho = (-1.0f64).exp();
        let fc = two_point_factor(rho);
        let reps = 50_000;
        let b = sample_batch(&fc, reps, 2024);
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for row in &b.realizations {
            let (x, y) = (row[0], row[1]);
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let n = reps as f64;
        let corr = (sxy / n - sx / n * sy / n)
            / ((sxx / n - (sx / n).powi(2)).sqrt() * (syy / n - (sy / n).powi(2)).sqrt());
        let tol = 3.0 * (1.0 - rho * rho) / n.sqrt();
        assert!((corr - rho).abs() < tol, "corr {corr} vs {rho} (tol {tol})");
    }

    #[test]
    fn batch_moment_invariants() {
        let fc = two_point_factor(0.4);
        let reps = 20_000;
        let b = sample_batch(&fc, reps, 31);
        for j in 0..2 {
            let vals: Vec<f64> = b.realizations.iter().map(|r| r[j]).collect();
            let mean = vals.iter().sum::<f64>() / reps as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / reps as f64;
            assert!(mean.abs() <= 4.0 / (reps as f64).sqrt());
            assert!((var - 1.0).abs() <= 5.0 * (2.0 / reps as f64).sqrt());
        }
        for (row, (&a, &p)) in b.realizations.iter().zip(b.sup_abs.iter().zip(&b.sup_pos)) {
            for &v in row {
                assert!(a >= v.abs());
                assert!(p >= v);
            }
        }
    }

    #[test]
    fn exceedance_edge_cases() {
        let fc = two_point_factor(0.2);
        let b = sample_batch(&fc, 1000, 8);
        let out = empirical_exceedance(&b, &[f64::INFINITY, -1.0], ExceedanceMode::Abs);
        assert_eq!(out[0], (1.0, 0.0));
        assert_eq!(out[1], (0.0, 0.0));
    }

    #[test]
    fn exceedance_single_point_normal() {
        let (l, j) = factorize_matrix(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        let fc = FactorizedCovariance { points: vec![DVector::zeros(1)], factor: l, jitter_used: j };
        let reps = 100_000;
        let b = sample_batch(&fc, reps, 77);
        let out = empirical_exceedance(&b, &[1.96], ExceedanceMode::Abs);
        let expect = 0.9500; // 2 Phi(1.96) - 1
        assert!((out[0].0 - expect).abs() < 3.0 * out[0].1 + 1e-4);
    }

    #[test]
    fn exceedance_monotone_in_threshold() {
        let fc = two_point_factor(0.2);
        let b = sample_batch(&fc, 5000, 12);
        let thresholds: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
        let out = empirical_exceedance(&b, &thresholds, ExceedanceMode::Abs);
        for w in out.windows(2) {
            assert!(w[1].0 >= w[0].0);
        }
    }

    #[test]
    fn sups_only_batch_matches_full() {
        let fc = two_point_factor(0.6);
        let a = sample_batch(&fc, 128, 3);
        let b = sample_sups(&fc, 128, 3);
        assert!(b.realizations.is_empty());
        assert_eq!(a.sup_abs, b.sup_abs);
        assert_eq!(a.sup_pos, b.sup_pos);
    }
}
