//! The exhaustion `u = log(1 + r²)`, its numerical certificate, and penalised
//! maximisation producing Omori-Yau sequences.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::connection::ConnectionKind;
use crate::distance::{distance, DistanceField, CUT_MARGIN};
use crate::error::{GeometryError, Result};
use crate::growth::GrowthConstants;
use crate::identities::hessian_scalar;
use crate::manifold::ManifoldChart;
use crate::numeric::{scalar_gradient, DifferentiationScheme};

/// Maximiser and maximum of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_section_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

fn radial_ratio(r: f64) -> f64 {
    r * (1.0 + r) / (1.0 + r * r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TamedExhaustion {
    pub base: Vec<f64>,
    pub constants: GrowthConstants,
    pub m: usize,
    /// `[B + (4√m + 3)A₁² + 2A₂]^{1/2}`.
    pub c_const: f64,
    /// `sup r(1+r)/(1+r²)`.
    pub c_prime: f64,
    /// `3 + 2 C C′`.
    pub hessian_bound: f64,
}

impl TamedExhaustion {
    /// `u(x) = log(1 + r(x)²)`.
    pub fn value(&self, chart: &ManifoldChart, x: &[f64]) -> Result<f64> {
        let r = distance(chart, &self.base, x)?;
        Ok((r * r).ln_1p())
    }

    /// Right-hand side of the explicit Hessian chain at radius `r`.
    pub fn chain_bound(&self, r: f64) -> f64 {
        3.0 / (1.0 + r * r) + 2.0 * self.c_const * radial_ratio(r)
    }
}

pub fn build_tamed(chart: &ManifoldChart, x0: &[f64], constants: &GrowthConstants) -> Result<TamedExhaustion> {
    chart.check_point(x0)?;
    let m = chart.complex_dim();
    let c = constants;
    let c_const = (c.b + (4.0 * (m as f64).sqrt() + 3.0) * c.a1 * c.a1 + 2.0 * c.a2).sqrt();
    let (_, c_prime) = golden_section_max(&radial_ratio, 0.0, 100.0, 1e-10);
    Ok(TamedExhaustion {
        base: x0.to_vec(),
        constants: c.clone(),
        m,
        c_const,
        c_prime,
        hessian_bound: 3.0 + 2.0 * c_const * c_prime,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateSample {
    pub point: Vec<f64>,
    pub r: f64,
    #[serde(rename = "grad")]
    pub grad_norm: f64,
    #[serde(rename = "hess")]
    pub hess_max_eig: f64,
    /// The support function `log(1 + (r(x₁′) + d(x₁′, ·))²)` replaced `u` near a cut point.
    pub regularized: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExhaustionCertificate {
    #[serde(rename = "C")]
    pub c_const: f64,
    #[serde(rename = "C_prime")]
    pub c_prime: f64,
    pub bound: f64,
    pub samples: Vec<CertificateSample>,
    pub global_pass: bool,
    pub grad_tolerance: f64,
    pub hess_tolerance: f64,
    /// The constants are only witnessed on the sampled region of one chart.
    pub region_relative: bool,
}

impl ExhaustionCertificate {
    pub fn max_grad(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |acc, s| acc.max(s.grad_norm))
    }

    pub fn max_hess(&self) -> f64 {
        self.samples
            .iter()
            .fold(f64::NEG_INFINITY, |acc, s| acc.max(s.hess_max_eig))
    }
}

/// `sqrt(du · g⁻¹ · du)`.
pub fn gradient_norm(chart: &ManifoldChart, x: &[f64], du: &[f64]) -> Result<f64> {
    let g_inv = chart
        .metric_at(x)
        .try_inverse()
        .ok_or_else(|| GeometryError::DegenerateMetric { point: x.to_vec() })?;
    let d = DMatrix::from_column_slice(du.len(), 1, du);
    Ok((d.transpose() * g_inv * d)[(0, 0)].max(0.0).sqrt())
}

/// Gradient norm and top complex Hessian eigenvalue of `f` at `x`.
pub fn first_and_second(
    chart: &ManifoldChart,
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<(f64, f64)> {
    let fitted = chart.fitted_scheme(x, scheme);
    let du = scalar_gradient(f, x, &fitted, chart)?;
    let grad = gradient_norm(chart, x, &du)?;
    let hess = hessian_scalar(chart, f, x, ConnectionKind::Canonical, scheme)?;
    if hess.real.iter().any(|v| !v.is_finite()) || !grad.is_finite() {
        return Err(GeometryError::NonFiniteState { t: 0.0 });
    }
    Ok((grad, hess.complex.max_eigenvalue()))
}

/// Checks `‖∇u‖ ≤ 1` and `(u_{kl̄}) ≤ (3 + 2CC′)(g_{kl̄})` at each sample.
pub fn certify(
    exh: &TamedExhaustion,
    chart: &ManifoldChart,
    samples: &[Vec<f64>],
    scheme: &DifferentiationScheme,
) -> Result<ExhaustionCertificate> {
    if samples.is_empty() {
        return Err(GeometryError::EmptySampleSet);
    }
    let (grad_tol, hess_tol) = (1e-3, 1e-3);
    let cut = chart
        .closed_form_distance()
        .and_then(|c| c.cut_radius.zip(c.waypoint.clone()));
    let mut out = Vec::with_capacity(samples.len());
    for x in samples {
        let r = distance(chart, &exh.base, x)?;
        if r < 1e-9 {
            return Err(GeometryError::AtBasePoint);
        }
        let (grad, hess, regularized) = match &cut {
            Some((a, waypoint)) if r > a - CUT_MARGIN => {
                let s = 0.25 * a;
                let x1 = waypoint(&exh.base, x, s);
                let field = DistanceField::new(chart, &x1);
                let v = |z: &[f64]| match field.eval(z) {
                    Ok(d) => (s + d).powi(2).ln_1p(),
                    Err(_) => f64::NAN,
                };
                let (g, h) = first_and_second(chart, &v, x, scheme)?;
                (g, h, true)
            }
            _ => {
                let field = DistanceField::new(chart, &exh.base);
                let u = |z: &[f64]| field.eval(z).map(|d| (d * d).ln_1p()).unwrap_or(f64::NAN);
                let (g, h) = first_and_second(chart, &u, x, scheme)?;
                (g, h, false)
            }
        };
        out.push(CertificateSample {
            point: x.clone(),
            r,
            grad_norm: grad,
            hess_max_eig: hess,
            regularized,
            pass: grad <= 1.0 + grad_tol && hess <= exh.hessian_bound + hess_tol,
        });
    }
    Ok(ExhaustionCertificate {
        c_const: exh.c_const,
        c_prime: exh.c_prime,
        bound: exh.hessian_bound,
        global_pass: out.iter().all(|s| s.pass),
        samples: out,
        grad_tolerance: grad_tol,
        hess_tolerance: hess_tol,
        region_relative: true,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SublevelProbe {
    pub level: f64,
    /// Largest coordinate distance from the base reached inside `{u ≤ level}`.
    pub max_coordinate_radius: f64,
    /// Smallest chart-boundary distance reached inside `{u ≤ level}`.
    pub min_boundary_distance: f64,
    pub bounded: bool,
}

/// Marches along coordinate rays from the base point; the sublevel set counts as
/// bounded in the chart when every ray leaves it before reaching the chart boundary.
pub fn sublevel_probe(
    exh: &TamedExhaustion,
    chart: &ManifoldChart,
    level: f64,
    rays: usize,
    seed: u64,
) -> SublevelProbe {
    let n = chart.real_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for a in 0..n {
        for sgn in [1.0, -1.0] {
            dirs.push((0..n).map(|b| if a == b { sgn } else { 0.0 }).collect());
        }
    }
    for _ in 0..rays {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        dirs.push(v.into_iter().map(|x| x / s).collect());
    }
    let mut max_radius = 0.0f64;
    let mut min_boundary = f64::INFINITY;
    let mut bounded = true;
    let room = chart.distance_to_boundary(&exh.base);
    let dt = (room.min(1.0) * 1e-3).max(1e-6);
    for d in dirs {
        let mut t = 0.0;
        loop {
            let next = t + dt.max(1e-3 * t);
            let p: Vec<f64> = exh.base.iter().zip(&d).map(|(b, v)| b + next * v).collect();
            let edge = chart.distance_to_boundary(&p);
            if edge < 1e-9 {
                bounded = false;
                break;
            }
            match exh.value(chart, &p) {
                Ok(u) if u <= level => {
                    t = next;
                    max_radius = max_radius.max(t);
                    min_boundary = min_boundary.min(edge);
                }
                Ok(_) => break,
                Err(_) => {
                    bounded = false;
                    break;
                }
            }
        }
    }
    SublevelProbe {
        level,
        max_coordinate_radius: max_radius,
        min_boundary_distance: min_boundary,
        bounded,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WitnessSearch {
    pub starts: usize,
    pub iterations: usize,
    /// Points of the coarse boundedness probe.
    pub probe_points: usize,
    /// Values above this on the probe count as unbounded.
    pub unbounded_threshold: f64,
    pub seed: u64,
}

impl Default for WitnessSearch {
    fn default() -> Self {
        Self {
            starts: 16,
            iterations: 200,
            probe_points: 400,
            unbounded_threshold: 1e8,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OmoriYauWitness {
    pub epsilons: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub f_values: Vec<f64>,
    pub penalized_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub hess_top_eigs: Vec<f64>,
}

fn random_interior(chart: &ManifoldChart, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let p: Vec<f64> = chart.bounds().iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
        if chart.distance_to_boundary(&p) > 0.0 {
            return p;
        }
    }
}

/// Gradient ascent with a geometric step ladder, kept inside `feasible`.
fn local_ascent(
    obj: &dyn Fn(&[f64]) -> f64,
    feasible: &dyn Fn(&[f64]) -> bool,
    chart: &ManifoldChart,
    mut x: Vec<f64>,
    iterations: usize,
) -> (f64, Vec<f64>) {
    let mut fx = obj(&x);
    let scheme = DifferentiationScheme::default();
    for _ in 0..iterations {
        let fitted = chart.fitted_scheme(&x, &scheme);
        let Ok(grad) = scalar_gradient(obj, &x, &fitted, chart) else {
            break;
        };
        let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !gn.is_finite() || gn < 1e-14 {
            break;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in -40..=4 {
            let t = 2f64.powi(k);
            let y: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a + t * g / gn).collect();
            if !chart.contains(&y) || !feasible(&y) {
                continue;
            }
            let fy = obj(&y);
            if fy.is_finite() && fy > best.as_ref().map_or(fx, |b| b.0) {
                best = Some((fy, y));
            }
        }
        match best {
            Some((fy, y)) => {
                fx = fy;
                x = y;
            }
            None => break,
        }
    }
    (fx, x)
}

/// For each `ε`, maximises `f - ε u` over `{u < 1/ε}` in the chart and records
/// `f`, `‖∇f‖` and the top complex Hessian eigenvalue of `f` at the maximiser.
pub fn omori_yau_search(
    chart: &ManifoldChart,
    exh: &TamedExhaustion,
    f: &dyn Fn(&[f64]) -> f64,
    epsilons: &[f64],
    search: &WitnessSearch,
    scheme: &DifferentiationScheme,
) -> Result<OmoriYauWitness> {
    if epsilons.is_empty() {
        return Err(GeometryError::EmptySampleSet);
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GeometryError::InvalidInput(
            "epsilons must be positive and strictly decreasing".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut probe_best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..search.probe_points {
        let p = random_interior(chart, &mut rng);
        let v = f(&p);
        if !v.is_finite() || v > search.unbounded_threshold {
            return Err(GeometryError::UnboundedObjective { value: v, point: p });
        }
        if probe_best.as_ref().is_none_or(|b| v > b.0) {
            probe_best = Some((v, p));
        }
    }
    let u = |z: &[f64]| exh.value(chart, z).unwrap_or(f64::NAN);
    let mut starts: Vec<Vec<f64>> = vec![exh.base.clone()];
    if let Some((_, p)) = probe_best {
        starts.push(p);
    }
    while starts.len() < search.starts.max(2) {
        starts.push(random_interior(chart, &mut rng));
    }
    let mut witness = OmoriYauWitness {
        epsilons: epsilons.to_vec(),
        points: Vec::new(),
        f_values: Vec::new(),
        penalized_values: Vec::new(),
        grad_norms: Vec::new(),
        hess_top_eigs: Vec::new(),
    };
    let mut previous: Option<Vec<f64>> = None;
    for &eps in epsilons {
        let obj = |z: &[f64]| f(z) - eps * u(z);
        let feasible = |z: &[f64]| u(z) < 1.0 / eps;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let candidates = previous.iter().cloned().chain(starts.iter().cloned());
        for s in candidates {
            if !feasible(&s) {
                continue;
            }
            let (v, x) = local_ascent(&obj, &feasible, chart, s, search.iterations);
            if best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, x));
            }
        }
        let (value, x) = best.ok_or(GeometryError::EmptySampleSet)?;
        let (grad, hess) = first_and_second(chart, f, &x, scheme)?;
        witness.f_values.push(f(&x));
        witness.penalized_values.push(value);
        witness.grad_norms.push(grad);
        witness.hess_top_eigs.push(hess);
        witness.points.push(x.clone());
        previous = Some(x);
    }
    Ok(witness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::entry;
    use crate::growth::GrowthExponents;

    #[test]
    fn c_prime_is_closed_form() {
        let e = entry("poincare_disc_k1").unwrap();
        let t = build_tamed(
            &e.chart,
            &[0.0, 0.0],
            &GrowthConstants::manual(1.0, 0.0, 0.0, GrowthExponents::BOUNDED),
        )
        .unwrap();
        assert!((t.c_prime - (1.0 + 2f64.sqrt()) / 2.0).abs() < 1e-9);
        assert!((t.c_const - 1.0).abs() < 1e-8);
        assert!((t.hessian_bound - (4.0 + 2f64.sqrt())).abs() < 1e-8);
    }

    #[test]
    fn gradient_peaks_at_unit_radius() {
        let e = entry("flat_c1").unwrap();
        let t = build_tamed(
            &e.chart,
            &[0.0, 0.0],
            &GrowthConstants::manual(0.0, 0.0, 0.0, GrowthExponents::BOUNDED),
        )
        .unwrap();
        let c = certify(
            &t,
            &e.chart,
            &[vec![0.6, 0.8], vec![0.01, 0.0]],
            &DifferentiationScheme::default(),
        )
        .unwrap();
        assert!((c.samples[0].grad_norm - 1.0).abs() < 1e-4);
        assert!((c.samples[1].grad_norm - 0.02).abs() < 1e-4);
        assert!(c.global_pass);
    }

    #[test]
    fn disc_sublevels_are_bounded() {
        let e = entry("poincare_disc_k1").unwrap();
        let t = build_tamed(
            &e.chart,
            &[0.0, 0.0],
            &GrowthConstants::manual(1.0, 0.0, 0.0, GrowthExponents::BOUNDED),
        )
        .unwrap();
        let p = sublevel_probe(&t, &e.chart, 3.0, 4, 1);
        assert!(p.bounded && p.min_boundary_distance > 0.0);
    }
}
