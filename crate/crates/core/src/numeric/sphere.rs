//! Multi-start projected gradient ascent on products of unit spheres in C^m.
//!
//! Used to take inf/sup of curvature forms over unit (1,0)-vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hermitian::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSearch {
    pub starts: usize,
    pub iterations: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for SphereSearch {
    fn default() -> Self {
        Self {
            starts: 16,
            iterations: 200,
            step: 0.1,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SphereOptimum {
    pub value: f64,
    pub point: Vec<Vec<C64>>,
    /// Norm of the projected (Riemannian) gradient at `point`.
    pub gradient_norm: f64,
}

const GRAD_STEP: f64 = 1e-6;

fn normalize(v: &mut [C64]) -> f64 {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Projected gradient of `f` at `x`, one block per sphere factor.
pub fn projected_gradient<F>(f: &F, x: &[Vec<C64>]) -> Vec<Vec<C64>>
where
    F: Fn(&[Vec<C64>]) -> f64 + ?Sized,
{
    let mut work = x.to_vec();
    let mut grad: Vec<Vec<C64>> = x.iter().map(|b| vec![C64::new(0.0, 0.0); b.len()]).collect();
    for b in 0..x.len() {
        for i in 0..x[b].len() {
            let mut parts = [0.0; 2];
            for (slot, unit) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].into_iter().enumerate() {
                work[b][i] = x[b][i] + unit * GRAD_STEP;
                let plus = f(&work);
                work[b][i] = x[b][i] - unit * GRAD_STEP;
                let minus = f(&work);
                work[b][i] = x[b][i];
                parts[slot] = (plus - minus) / (2.0 * GRAD_STEP);
            }
            grad[b][i] = C64::new(parts[0], parts[1]);
        }
        let radial: f64 = x[b].iter().zip(&grad[b]).map(|(u, g)| (u.conj() * g).re).sum();
        for (g, u) in grad[b].iter_mut().zip(&x[b]) {
            *g -= u * radial;
        }
    }
    grad
}

fn grad_norm(g: &[Vec<C64>]) -> f64 {
    g.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl SphereSearch {
    fn random_point(rng: &mut ChaCha8Rng, dims: &[usize]) -> Vec<Vec<C64>> {
        dims.iter()
            .map(|&m| loop {
                let mut v: Vec<C64> = (0..m)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                if normalize(&mut v) > 1e-3 {
                    break v;
                }
            })
            .collect()
    }

    fn ascend<F>(&self, f: &F, mut x: Vec<Vec<C64>>) -> (f64, Vec<Vec<C64>>)
    where
        F: Fn(&[Vec<C64>]) -> f64 + ?Sized,
    {
        let mut value = f(&x);
        let mut t = self.step;
        for _ in 0..self.iterations {
            let g = projected_gradient(f, &x);
            if grad_norm(&g) < 1e-11 {
                break;
            }
            // scan a geometric ladder of step lengths around the last accepted one
            let mut best: Option<(f64, f64, Vec<Vec<C64>>)> = None;
            for k in -12..=3 {
                let tk = (t * 2f64.powi(k)).min(100.0);
                let mut trial: Vec<Vec<C64>> = x
                    .iter()
                    .zip(&g)
                    .map(|(xb, gb)| xb.iter().zip(gb).map(|(u, d)| u + d * tk).collect())
                    .collect();
                for b in trial.iter_mut() {
                    normalize(b);
                }
                let tv = f(&trial);
                if tv.is_finite() && best.as_ref().is_none_or(|(bv, _, _)| tv > *bv) {
                    best = Some((tv, tk, trial));
                }
            }
            match best {
                Some((tv, tk, trial)) if tv > value => {
                    value = tv;
                    t = tk;
                    x = trial;
                }
                _ => break,
            }
        }
        (value, x)
    }

    /// Maximise `f` over the product of unit spheres of complex dimensions `dims`.
    pub fn maximize<F>(&self, dims: &[usize], f: F) -> SphereOptimum
    where
        F: Fn(&[Vec<C64>]) -> f64,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut best: Option<(f64, Vec<Vec<C64>>)> = None;
        for _ in 0..self.starts.max(1) {
            let start = Self::random_point(&mut rng, dims);
            let (v, x) = self.ascend(&f, start);
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, x));
            }
        }
        let (value, point) = best.expect("at least one start");
        let gradient_norm = grad_norm(&projected_gradient(&f, &point));
        SphereOptimum {
            value,
            point,
            gradient_norm,
        }
    }

    pub fn minimize<F>(&self, dims: &[usize], f: F) -> SphereOptimum
    where
        F: Fn(&[Vec<C64>]) -> f64,
    {
        let mut opt = self.maximize(dims, |x| -f(x));
        opt.value = -opt.value;
        opt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_top_eigenvalue_of_hermitian_form() {
        // Rayleigh quotient of diag(3, 1, -2) on the unit sphere of C^3
        let d = [3.0, 1.0, -2.0];
        let f = |x: &[Vec<C64>]| x[0].iter().zip(&d).map(|(z, w)| w * z.norm_sqr()).sum::<f64>();
        let s = SphereSearch::default();
        let max = s.maximize(&[3], f);
        let min = s.minimize(&[3], f);
        assert!((max.value - 3.0).abs() < 1e-9, "{} {}", max.value, max.gradient_norm);
        assert!((min.value + 2.0).abs() < 1e-9);
        assert!(max.gradient_norm < 1e-6 && min.gradient_norm < 1e-6);
    }

    #[test]
    fn deterministic_under_seed() {
        let f = |x: &[Vec<C64>]| (x[0][0] * x[1][1].conj()).re + x[0][1].norm_sqr();
        let s = SphereSearch::default();
        let a = s.maximize(&[2, 2], f);
        let b = s.maximize(&[2, 2], f);
        assert_eq!(a.value, b.value);
        assert_eq!(a.point, b.point);
    }
}
