//! Seeded random instances for property tests and the `gen` command.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Instance, MultiInstance, QualityGrid};
use crate::single_item::check_consistency;
use crate::Result;

const CONSISTENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub n: usize,
    pub m: usize,
    /// Resample until the instance passes [`check_consistency`].
    pub consistent: bool,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `len` distinct ascending points in `[0, 1]`.
fn random_grid<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let mut xs: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).all(|w| w[1] - w[0] > 1e-6) {
            return xs;
        }
    }
}

/// Positive weights with an occasional exact zero, never all zero.
fn random_weights<R: Rng>(rng: &mut R, len: usize, zero_chance: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| {
            if rng.gen_bool(zero_chance) {
                0.0
            } else {
                rng.gen_range(0.01..1.0)
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        let i = rng.gen_range(0..len);
        w[i] = 1.0;
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    w
}

/// An unstructured instance: random grids, prior, score rows and bar.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, m: usize) -> Result<Instance> {
    let grid = QualityGrid::new(random_grid(rng, n), random_grid(rng, m))?;
    let prior = random_weights(rng, n, 0.1);
    let rows: Vec<f64> = (0..n).flat_map(|_| random_weights(rng, m, 0.2)).collect();
    let model = Array2::from_shape_vec((n, m), rows).expect("n * m entries");
    Instance::new(grid, prior, model, rng.gen())
}

/// Noisy-appraiser instance: scores concentrate around the true quality,
/// resampled until consistent. Falls back to a bar below every grid point,
/// which is trivially consistent.
pub fn random_consistent_instance<R: Rng>(rng: &mut R, n: usize, m: usize) -> Result<Instance> {
    let mut last = None;
    for _ in 0..CONSISTENT_ATTEMPTS {
        let grid = QualityGrid::new(random_grid(rng, n), random_grid(rng, m))?;
        let width = rng.gen_range(0.05..0.5);
        let mut model = Array2::zeros((n, m));
        for (v, &value) in grid.values().iter().enumerate() {
            for (s, &score) in grid.scores().iter().enumerate() {
                let z = (score - value) / width;
                model[(v, s)] = (-0.5 * z * z).exp() * rng.gen_range(0.5..1.5) + 1e-6;
            }
        }
        let sums: Vec<f64> = model.rows().into_iter().map(|r| r.sum()).collect();
        for (mut row, sum) in model.rows_mut().into_iter().zip(sums) {
            row /= sum;
        }
        let prior = random_weights(rng, n, 0.0);
        let instance = Instance::new(grid, prior, model, rng.gen())?;
        if check_consistency(&instance).consistent {
            return Ok(instance);
        }
        last = Some(instance);
    }
    let instance = last.expect("at least one attempt");
    let low = instance.values()[0].min(instance.scores()[0]) - 1.0;
    Instance::new(
        instance.grid().clone(),
        instance.prior().to_vec(),
        instance.score_model().clone(),
        low,
    )
}

pub fn generate(rng: &mut ChaCha8Rng, options: &GenOptions) -> Result<Instance> {
    if options.consistent {
        random_consistent_instance(rng, options.n, options.m)
    } else {
        random_instance(rng, options.n, options.m)
    }
}

pub fn random_multi_instance<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    k: usize,
) -> Result<MultiInstance> {
    MultiInstance::new(random_instance(rng, n, m)?, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_valid() {
        let a = random_instance(&mut rng_from_seed(5), 4, 3).unwrap();
        let b = random_instance(&mut rng_from_seed(5), 4, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.m()), (4, 3));
        assert!((a.prior().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn consistent_instances_are_consistent() {
        let mut rng = rng_from_seed(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(1..=5);
            let inst = random_consistent_instance(&mut rng, n, m).unwrap();
            assert!(check_consistency(&inst).consistent);
        }
    }
}
