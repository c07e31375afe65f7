//! Almost Hermitian charts `(g, J)`, unitary (1,0)-frames and the Nijenhuis tensor.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::numeric::{jacobian, DifferentiationScheme, Region, C64};

pub type MatrixField = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// `(x0, x, s)` ↦ the point at distance `s` from `x0` on a minimal geodesic towards `x`.
pub type WaypointFn = Arc<dyn Fn(&[f64], &[f64], f64) -> Vec<f64> + Send + Sync>;

/// Shape of the admissible coordinate region inside the bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    Box,
    /// Euclidean ball `|x| < radius` in all real coordinates.
    Ball {
        radius: f64,
    },
    /// Each complex coordinate `|z_k| < radius`.
    Polydisc {
        radius: f64,
    },
}

/// Closed-form Riemannian distance with optional cut-locus metadata.
#[derive(Clone)]
pub struct ClosedFormDistance {
    pub distance: DistanceFn,
    /// Every point at this distance from the base point is a cut point (sphere antipode).
    pub cut_radius: Option<f64>,
    pub waypoint: Option<WaypointFn>,
}

#[derive(Clone)]
pub struct ManifoldChart {
    name: String,
    complex_dim: usize,
    bounds: Vec<(f64, f64)>,
    domain: Domain,
    metric: MatrixField,
    acs: MatrixField,
    distance: Option<ClosedFormDistance>,
}

impl fmt::Debug for ManifoldChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldChart")
            .field("name", &self.name)
            .field("complex_dim", &self.complex_dim)
            .field("bounds", &self.bounds)
            .field("domain", &self.domain)
            .field("closed_form_distance", &self.distance.is_some())
            .finish()
    }
}

impl ManifoldChart {
    pub fn new(
        name: impl Into<String>,
        complex_dim: usize,
        bounds: Vec<(f64, f64)>,
        metric: MatrixField,
        acs: MatrixField,
    ) -> Result<Self> {
        if complex_dim == 0 {
            return Err(GeometryError::InvalidInput("complex dimension must be positive".into()));
        }
        if bounds.len() != 2 * complex_dim {
            return Err(GeometryError::DimensionMismatch {
                expected: 2 * complex_dim,
                found: bounds.len(),
            });
        }
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(GeometryError::InvalidInput("empty coordinate interval".into()));
        }
        Ok(Self {
            name: name.into(),
            complex_dim,
            bounds,
            domain: Domain::Box,
            metric,
            acs,
            distance: None,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_distance(mut self, distance: ClosedFormDistance) -> Self {
        self.distance = Some(distance);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn complex_dim(&self) -> usize {
        self.complex_dim
    }

    pub fn real_dim(&self) -> usize {
        2 * self.complex_dim
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn closed_form_distance(&self) -> Option<&ClosedFormDistance> {
        self.distance.as_ref()
    }

    pub fn metric_at(&self, p: &[f64]) -> DMatrix<f64> {
        (self.metric)(p)
    }

    pub fn acs_at(&self, p: &[f64]) -> DMatrix<f64> {
        (self.acs)(p)
    }

    pub fn metric_field(&self) -> &MatrixField {
        &self.metric
    }

    pub fn acs_field(&self) -> &MatrixField {
        &self.acs
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.real_dim() && self.distance_to_boundary(p) > 0.0
    }

    /// Coordinate distance to the boundary of the admissible region (negative outside).
    pub fn distance_to_boundary(&self, p: &[f64]) -> f64 {
        if p.len() != self.real_dim() || p.iter().any(|x| !x.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let mut d = f64::INFINITY;
        for (x, (lo, hi)) in p.iter().zip(&self.bounds) {
            d = d.min(x - lo).min(hi - x);
        }
        match self.domain {
            Domain::Box => d,
            Domain::Ball { radius } => d.min(radius - p.iter().map(|x| x * x).sum::<f64>().sqrt()),
            Domain::Polydisc { radius } => p
                .chunks(2)
                .fold(d, |acc, z| acc.min(radius - (z[0] * z[0] + z[1] * z[1]).sqrt())),
        }
    }

    /// `scheme` with its step shrunk so the stencil fits inside the domain at `p`.
    pub fn fitted_scheme(&self, p: &[f64], scheme: &DifferentiationScheme) -> DifferentiationScheme {
        let room = self.distance_to_boundary(p);
        let reach = scheme.reach() * scheme.step;
        if room.is_finite() && room > 0.0 && reach >= 0.5 * room {
            scheme.with_step(0.25 * room / scheme.reach())
        } else {
            *scheme
        }
    }

    /// Fails with `SampleOutOfDomain` unless `p` lies in the chart.
    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.real_dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.real_dim(),
                found: p.len(),
            });
        }
        if !self.contains(p) {
            return Err(GeometryError::SampleOutOfDomain { point: p.to_vec() });
        }
        Ok(())
    }

    /// `g(X, Y)` for real coordinate vectors at `p`.
    pub fn inner(&self, p: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let g = self.metric_at(p);
        let n = self.real_dim();
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += x[a] * g[(a, b)] * y[b];
            }
        }
        s
    }

    pub fn norm(&self, p: &[f64], x: &[f64]) -> f64 {
        self.inner(p, x, x).max(0.0).sqrt()
    }
}

impl Region for ManifoldChart {
    fn contains(&self, point: &[f64]) -> bool {
        ManifoldChart::contains(self, point)
    }
}

/// The standard complex structure on `R^{2m}`: `J d/dx_k = d/dy_k`.
pub fn standard_acs(m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// Maximum residuals of the pointwise chart invariants over a sample set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartValidation {
    pub samples: usize,
    pub min_metric_eigenvalue: f64,
    pub metric_symmetry_residual: f64,
    pub acs_square_residual: f64,
    pub compatibility_residual: f64,
    pub passes: bool,
}

pub const ALGEBRAIC_TOLERANCE: f64 = 1e-10;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn validate_chart(chart: &ManifoldChart, samples: &[Vec<f64>]) -> Result<ChartValidation> {
    if samples.is_empty() {
        return Err(GeometryError::EmptySampleSet);
    }
    let n = chart.real_dim();
    let mut report = ChartValidation {
        samples: samples.len(),
        min_metric_eigenvalue: f64::INFINITY,
        metric_symmetry_residual: 0.0,
        acs_square_residual: 0.0,
        compatibility_residual: 0.0,
        passes: false,
    };
    for p in samples {
        chart.check_point(p)?;
        let g = chart.metric_at(p);
        let j = chart.acs_at(p);
        report.metric_symmetry_residual = report.metric_symmetry_residual.max(max_abs(&(&g - g.transpose())));
        let sym = (&g + g.transpose()) * 0.5;
        let min_eig = sym.symmetric_eigenvalues().min();
        report.min_metric_eigenvalue = report.min_metric_eigenvalue.min(min_eig);
        report.acs_square_residual = report
            .acs_square_residual
            .max(max_abs(&(&j * &j + DMatrix::<f64>::identity(n, n))));
        report.compatibility_residual = report
            .compatibility_residual
            .max(max_abs(&(j.transpose() * &g * &j - &g)));
    }
    report.passes = report.min_metric_eigenvalue > 0.0
        && report.metric_symmetry_residual <= ALGEBRAIC_TOLERANCE
        && report.acs_square_residual <= ALGEBRAIC_TOLERANCE
        && report.compatibility_residual <= ALGEBRAIC_TOLERANCE;
    Ok(report)
}

/// A g-unitary frame `e_1..e_m` of `T^{1,0}` at a point together with its dual coframe.
///
/// `theta[(i, a)] = θ^i(∂_a) = g(∂_a, ē_i)`, so `g = 2 Re Σ θ^i ⊗ conj(θ^i)` and
/// `g(e_i, ē_j) = δ_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryCoframe {
    pub point: Vec<f64>,
    pub theta: DMatrix<C64>,
    pub frame_vectors: DMatrix<C64>,
}

fn hermitian_product(g: &DMatrix<f64>, u: &[C64], v: &[C64]) -> C64 {
    let n = u.len();
    let mut s = C64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            s += u[a] * g[(a, b)] * v[b].conj();
        }
    }
    s
}

impl UnitaryCoframe {
    pub fn complex_dim(&self) -> usize {
        self.frame_vectors.ncols()
    }

    /// Columns `e_1..e_m, ē_1..ē_m` in coordinates.
    pub fn basis(&self) -> DMatrix<C64> {
        let (n, m) = self.frame_vectors.shape();
        DMatrix::from_fn(n, 2 * m, |a, k| {
            if k < m {
                self.frame_vectors[(a, k)]
            } else {
                self.frame_vectors[(a, k - m)].conj()
            }
        })
    }

    /// Rows `θ^1..θ^m, θ̄^1..θ̄^m`; inverse of [`basis`](Self::basis).
    pub fn dual(&self) -> DMatrix<C64> {
        let (m, n) = self.theta.shape();
        DMatrix::from_fn(2 * m, n, |k, a| {
            if k < m {
                self.theta[(k, a)]
            } else {
                self.theta[(k - m, a)].conj()
            }
        })
    }

    /// `(θ^1(X), .., θ^m(X))` for a real coordinate vector `X`.
    pub fn components(&self, x: &[f64]) -> Vec<C64> {
        (0..self.theta.nrows())
            .map(|i| x.iter().enumerate().map(|(a, xa)| self.theta[(i, a)] * xa).sum())
            .collect()
    }

    /// The real vector `X = 2 Re Σ ξ^i e_i`, whose (1,0)-part is `Σ ξ^i e_i`.
    pub fn real_vector(&self, xi: &[C64]) -> Vec<f64> {
        (0..self.frame_vectors.nrows())
            .map(|a| {
                2.0 * xi
                    .iter()
                    .enumerate()
                    .map(|(i, z)| (z * self.frame_vectors[(a, i)]).re)
                    .sum::<f64>()
            })
            .collect()
    }

    /// The coframe of the frame `e'_j = Σ_i e_i U_ij` for unitary `U`.
    pub fn rotated(&self, u: &DMatrix<C64>) -> Result<Self> {
        let m = self.complex_dim();
        if u.shape() != (m, m) {
            return Err(GeometryError::DimensionMismatch {
                expected: m,
                found: u.nrows(),
            });
        }
        let defect = (u.adjoint() * u - DMatrix::<C64>::identity(m, m)).norm();
        if defect > 1e-10 {
            return Err(GeometryError::InvalidInput(format!(
                "rotation is not unitary (defect {defect:e})"
            )));
        }
        Ok(Self {
            point: self.point.clone(),
            theta: u.adjoint() * &self.theta,
            frame_vectors: &self.frame_vectors * u,
        })
    }

    /// Largest of the duality, type and metric-reconstruction residuals.
    pub fn residuals(&self, g: &DMatrix<f64>, j: &DMatrix<f64>) -> (f64, f64, f64) {
        let m = self.complex_dim();
        let n = 2 * m;
        let duality = (&self.theta * &self.frame_vectors - DMatrix::<C64>::identity(m, m))
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.norm()));
        let jc = j.map(|x| C64::new(x, 0.0));
        let typ = (&self.theta * jc - &self.theta * C64::new(0.0, 1.0))
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.norm()));
        let mut recon = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let v: f64 = (0..m)
                    .map(|i| 2.0 * (self.theta[(i, a)] * self.theta[(i, b)].conj()).re)
                    .sum();
                recon = recon.max((v - g[(a, b)]).abs());
            }
        }
        (duality, typ, recon)
    }
}

/// Unitary coframe in the deterministic gauge: project `∂_0, ∂_2, ..` onto
/// `T^{1,0}` by `(X - iJX)/2`, Gram-Schmidt in `g`, then make the first
/// non-negligible coordinate component of each `e_i` real positive.
pub fn unitary_coframe(chart: &ManifoldChart, point: &[f64]) -> Result<UnitaryCoframe> {
    chart.check_point(point)?;
    let g = chart.metric_at(point);
    let j = chart.acs_at(point);
    coframe_from_tensors(&g, &j, point)
}

pub fn coframe_from_tensors(g: &DMatrix<f64>, j: &DMatrix<f64>, point: &[f64]) -> Result<UnitaryCoframe> {
    let n = g.nrows();
    if !n.is_multiple_of(2) || g.shape() != j.shape() || g.ncols() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            found: j.nrows(),
        });
    }
    let m = n / 2;
    let sym = (g + g.transpose()) * 0.5;
    if sym.clone().cholesky().is_none() {
        return Err(GeometryError::DegenerateMetric { point: point.to_vec() });
    }
    let scale = (0..n).fold(0.0f64, |acc, a| acc.max(g[(a, a)]));
    let order: Vec<usize> = (0..n).step_by(2).chain((1..n).step_by(2)).collect();
    let mut frame: Vec<Vec<C64>> = Vec::with_capacity(m);
    for &a in &order {
        if frame.len() == m {
            break;
        }
        let mut v: Vec<C64> = (0..n)
            .map(|c| C64::new(if c == a { 0.5 } else { 0.0 }, -0.5 * j[(c, a)]))
            .collect();
        for e in &frame {
            let proj = hermitian_product(g, &v, e);
            for (vc, ec) in v.iter_mut().zip(e) {
                *vc -= proj * ec;
            }
        }
        let norm2 = hermitian_product(g, &v, &v).re;
        if !(norm2 > 1e-10 * scale) {
            continue;
        }
        let norm = norm2.sqrt();
        let pivot_tol = 1e-8 * v.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        let pivot = v
            .iter()
            .find(|z| z.norm() > pivot_tol)
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        frame.push(v.iter().map(|z| z * phase / norm).collect());
    }
    if frame.len() < m {
        return Err(GeometryError::FrameGaugeFailure { point: point.to_vec() });
    }
    let frame_vectors = DMatrix::from_fn(n, m, |a, i| frame[i][a]);
    let gc = g.map(|x| C64::new(x, 0.0));
    let theta = frame_vectors.adjoint() * gc;
    Ok(UnitaryCoframe {
        point: point.to_vec(),
        theta,
        frame_vectors,
    })
}

/// `J` and its first partials: `(J, [∂_0 J, ∂_1 J, ..])`.
pub fn acs_jet(
    chart: &ManifoldChart,
    point: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    matrix_jet(chart.acs_field(), chart, point, scheme)
}

/// `g` and its first partials.
pub fn metric_jet(
    chart: &ManifoldChart,
    point: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    matrix_jet(chart.metric_field(), chart, point, scheme)
}

fn matrix_jet(
    field: &MatrixField,
    chart: &ManifoldChart,
    point: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    chart.check_point(point)?;
    let n = chart.real_dim();
    let flat = |p: &[f64]| field(p).as_slice().to_vec();
    let d = jacobian(&flat, point, scheme, chart)?;
    let value = field(point);
    let derivs = d.into_iter().map(|v| DMatrix::from_vec(n, n, v)).collect();
    Ok((value, derivs))
}

/// Frame components `n[i][j][k] = θ^i(N(ē_j, ē_k)) / 4`, which equal the
/// (0,2)-torsion `τ^i_{j̄k̄}` of any almost Hermitian connection.
#[derive(Clone, Debug, PartialEq)]
pub struct NijenhuisComponents {
    pub point: Vec<f64>,
    pub m: usize,
    pub n: Vec<C64>,
}

impl NijenhuisComponents {
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.n[(i * self.m + j) * self.m + k]
    }

    /// `Σ |n[i][j][k]|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.n.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

/// Coordinate Nijenhuis tensor `N^c_{ab}` (flat index `(c*n + a)*n + b`) from the
/// Lie brackets of coordinate-extended fields.
pub fn nijenhuis_coordinates(j: &DMatrix<f64>, dj: &[DMatrix<f64>]) -> Vec<f64> {
    let n = j.nrows();
    let mut out = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += j[(d, a)] * dj[d][(c, b)] - j[(d, b)] * dj[d][(c, a)];
                    s += j[(c, d)] * (dj[b][(d, a)] - dj[a][(d, b)]);
                }
                out[(c * n + a) * n + b] = s;
            }
        }
    }
    out
}

pub fn nijenhuis(chart: &ManifoldChart, point: &[f64], scheme: &DifferentiationScheme) -> Result<NijenhuisComponents> {
    let frame = unitary_coframe(chart, point)?;
    nijenhuis_in_frame(chart, point, scheme, &frame)
}

pub fn nijenhuis_in_frame(
    chart: &ManifoldChart,
    point: &[f64],
    scheme: &DifferentiationScheme,
    frame: &UnitaryCoframe,
) -> Result<NijenhuisComponents> {
    let (j, dj) = acs_jet(chart, point, scheme)?;
    let n = chart.real_dim();
    let m = chart.complex_dim();
    let nc = nijenhuis_coordinates(&j, &dj);
    let e = &frame.frame_vectors;
    let mut raw = vec![C64::new(0.0, 0.0); m * m * m];
    for i in 0..m {
        for jj in 0..m {
            for k in 0..m {
                let mut s = C64::new(0.0, 0.0);
                for c in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            let v = nc[(c * n + a) * n + b];
                            if v != 0.0 {
                                s += frame.theta[(i, c)] * v * e[(a, jj)].conj() * e[(b, k)].conj();
                            }
                        }
                    }
                }
                raw[(i * m + jj) * m + k] = s * 0.25;
            }
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); m * m * m];
    for i in 0..m {
        for jj in 0..m {
            for k in 0..m {
                out[(i * m + jj) * m + k] = 0.5 * (raw[(i * m + jj) * m + k] - raw[(i * m + k) * m + jj]);
            }
        }
    }
    Ok(NijenhuisComponents {
        point: point.to_vec(),
        m,
        n: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(m: usize) -> ManifoldChart {
        let n = 2 * m;
        ManifoldChart::new(
            "flat",
            m,
            vec![(-5.0, 5.0); n],
            Arc::new(move |_| DMatrix::identity(n, n)),
            Arc::new(move |_| standard_acs(m)),
        )
        .unwrap()
    }

    fn disc() -> ManifoldChart {
        ManifoldChart::new(
            "disc",
            1,
            vec![(-1.0, 1.0); 2],
            Arc::new(|p: &[f64]| {
                let s = 1.0 - p[0] * p[0] - p[1] * p[1];
                DMatrix::identity(2, 2) * (4.0 / (s * s))
            }),
            Arc::new(|_| standard_acs(1)),
        )
        .unwrap()
        .with_domain(Domain::Ball { radius: 1.0 })
    }

    #[test]
    fn flat_chart_validates_exactly() {
        let r = validate_chart(&flat(1), &[vec![0.0, 0.0], vec![1.0, -2.0]]).unwrap();
        assert!(r.passes);
        assert_eq!(r.acs_square_residual, 0.0);
        assert_eq!(r.compatibility_residual, 0.0);
    }

    #[test]
    fn disc_validates() {
        let r = validate_chart(&disc(), &[vec![0.3, 0.4]]).unwrap();
        assert!(r.passes && r.compatibility_residual <= 1e-12);
    }

    #[test]
    fn incompatible_metric_fails() {
        let c = ManifoldChart::new(
            "bad",
            1,
            vec![(-1.0, 1.0); 2],
            Arc::new(|_| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]))),
            Arc::new(|_| standard_acs(1)),
        )
        .unwrap();
        let r = validate_chart(&c, &[vec![0.0, 0.0]]).unwrap();
        assert!(!r.passes);
        assert!((r.compatibility_residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sample_outside_is_rejected() {
        let err = validate_chart(&disc(), &[vec![0.9, 0.9]]).unwrap_err();
        assert!(matches!(err, GeometryError::SampleOutOfDomain { .. }));
    }

    #[test]
    fn flat_and_disc_frames() {
        let f = unitary_coframe(&flat(1), &[0.0, 0.0]).unwrap();
        assert!((f.theta[(0, 0)] - C64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-14);
        let d = unitary_coframe(&disc(), &[0.0, 0.0]).unwrap();
        assert!((d.theta[(0, 0)] - C64::new(2f64.sqrt(), 0.0)).norm() < 1e-14);
        let (dual, typ, rec) = d.residuals(&disc().metric_at(&[0.0, 0.0]), &standard_acs(1));
        assert!(dual < 1e-12 && typ < 1e-12 && rec < 1e-12);
    }

    #[test]
    fn frame_of_skewed_metric() {
        // hermitian metric with off-diagonal coupling between the two complex directions
        let g = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0, 0.0, 0.5, 0.3, //
                0.0, 2.0, -0.3, 0.5, //
                0.5, -0.3, 1.5, 0.0, //
                0.3, 0.5, 0.0, 1.5,
            ],
        );
        let j = standard_acs(2);
        assert!((j.transpose() * &g * &j - &g).norm() < 1e-14);
        let f = coframe_from_tensors(&g, &j, &[0.0; 4]).unwrap();
        let (dual, typ, rec) = f.residuals(&g, &j);
        assert!(dual < 1e-12 && typ < 1e-12 && rec < 1e-12, "{dual} {typ} {rec}");
        let basis = f.basis();
        let dual_rows = f.dual();
        assert!((dual_rows * basis - DMatrix::<C64>::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn real_vector_roundtrip() {
        let f = unitary_coframe(&disc(), &[0.1, -0.2]).unwrap();
        let x = [0.7, -1.3];
        let xi = f.components(&x);
        let back = f.real_vector(&xi);
        assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
    }

    #[test]
    fn integrable_structures_have_no_nijenhuis_tensor() {
        let s = DifferentiationScheme::default();
        assert!(nijenhuis(&flat(2), &[0.1, 0.2, 0.3, 0.4], &s).unwrap().norm() < 1e-12);
        assert!(nijenhuis(&disc(), &[0.2, -0.1], &s).unwrap().norm() < 1e-12);
    }

    #[test]
    fn rotation_preserves_duality() {
        let g = DMatrix::identity(4, 4);
        let j = standard_acs(2);
        let f = coframe_from_tensors(&g, &j, &[0.0; 4]).unwrap();
        let (c, s) = (0.6, 0.8);
        let u = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(c, 0.0), C64::new(0.0, s), C64::new(0.0, s), C64::new(c, 0.0)],
        );
        let r = f.rotated(&u).unwrap();
        let (dual, typ, rec) = r.residuals(&g, &j);
        assert!(dual < 1e-12 && typ < 1e-12 && rec < 1e-12);
    }
}
