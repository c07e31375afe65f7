//! Central finite-difference stencils on vector-valued fields.
//!
//! Every stencil node is checked against a [`Region`] before the field is
//! evaluated, so a derivative requested too close to a chart boundary fails
//! with [`GeometryError::StencilOutOfDomain`] instead of sampling garbage.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};

/// A set of admissible evaluation points.
pub trait Region {
    fn contains(&self, point: &[f64]) -> bool;
}

/// The whole coordinate space.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unbounded;

impl Region for Unbounded {
    fn contains(&self, point: &[f64]) -> bool {
        point.iter().all(|x| x.is_finite())
    }
}

impl<F: Fn(&[f64]) -> bool> Region for F {
    fn contains(&self, point: &[f64]) -> bool {
        self(point)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StencilOrder {
    Central2,
    Central4,
}

impl StencilOrder {
    pub fn accuracy(self) -> i32 {
        match self {
            StencilOrder::Central2 => 2,
            StencilOrder::Central4 => 4,
        }
    }

    fn first(self) -> &'static [(f64, f64)] {
        match self {
            StencilOrder::Central2 => &[(-1.0, -0.5), (1.0, 0.5)],
            StencilOrder::Central4 => &[
                (-2.0, 1.0 / 12.0),
                (-1.0, -8.0 / 12.0),
                (1.0, 8.0 / 12.0),
                (2.0, -1.0 / 12.0),
            ],
        }
    }

    fn second(self) -> &'static [(f64, f64)] {
        match self {
            StencilOrder::Central2 => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
            StencilOrder::Central4 => &[
                (-2.0, -1.0 / 12.0),
                (-1.0, 16.0 / 12.0),
                (0.0, -30.0 / 12.0),
                (1.0, 16.0 / 12.0),
                (2.0, -1.0 / 12.0),
            ],
        }
    }
}

/// Step size and stencil used for every derivative in the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentiationScheme {
    pub step: f64,
    pub order: StencilOrder,
    pub richardson: bool,
}

impl Default for DifferentiationScheme {
    fn default() -> Self {
        Self {
            step: 1e-4,
            order: StencilOrder::Central4,
            richardson: false,
        }
    }
}

impl DifferentiationScheme {
    pub fn new(step: f64, order: StencilOrder) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(GeometryError::InvalidInput(format!(
                "differentiation step must be positive, got {step}"
            )));
        }
        Ok(Self {
            step,
            order,
            richardson: false,
        })
    }

    pub fn with_richardson(mut self, on: bool) -> Self {
        self.richardson = on;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    /// Scheme for second derivatives of scalar fields. The larger step keeps the
    /// `eps / h^2` roundoff floor near 1e-10.
    pub fn second_order_default() -> Self {
        Self {
            step: 1e-3,
            ..Self::default()
        }
    }

    /// Largest stencil reach in units of the step.
    pub fn reach(&self) -> f64 {
        match self.order {
            StencilOrder::Central2 => 1.0,
            StencilOrder::Central4 => 2.0,
        }
    }
}

fn shifted(point: &[f64], shifts: &[(usize, f64)]) -> Vec<f64> {
    let mut p = point.to_vec();
    for &(dir, delta) in shifts {
        p[dir] += delta;
    }
    p
}

pub type FallibleField<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a;

fn eval_checked(field: &FallibleField<'_>, node: &[f64], direction: usize, region: &dyn Region) -> Result<Vec<f64>> {
    if !region.contains(node) {
        return Err(GeometryError::StencilOutOfDomain {
            point: node.to_vec(),
            direction,
        });
    }
    field(node)
}

fn axpy(acc: &mut Vec<f64>, w: f64, v: &[f64]) {
    if acc.is_empty() {
        acc.resize(v.len(), 0.0);
    }
    for (a, x) in acc.iter_mut().zip(v) {
        *a += w * x;
    }
}

fn raw_first(
    field: &FallibleField<'_>,
    point: &[f64],
    dir: usize,
    h: f64,
    order: StencilOrder,
    region: &dyn Region,
) -> Result<Vec<f64>> {
    let mut acc = Vec::new();
    for &(k, w) in order.first() {
        let node = shifted(point, &[(dir, k * h)]);
        let v = eval_checked(field, &node, dir, region)?;
        axpy(&mut acc, w / h, &v);
    }
    Ok(acc)
}

fn raw_second(
    field: &FallibleField<'_>,
    point: &[f64],
    a: usize,
    b: usize,
    h: f64,
    order: StencilOrder,
    region: &dyn Region,
) -> Result<Vec<f64>> {
    let mut acc = Vec::new();
    if a == b {
        for &(k, w) in order.second() {
            let node = shifted(point, &[(a, k * h)]);
            let v = eval_checked(field, &node, a, region)?;
            axpy(&mut acc, w / (h * h), &v);
        }
    } else {
        for &(ka, wa) in order.first() {
            for &(kb, wb) in order.first() {
                let node = shifted(point, &[(a, ka * h), (b, kb * h)]);
                let v = eval_checked(field, &node, a, region)?;
                axpy(&mut acc, wa * wb / (h * h), &v);
            }
        }
    }
    Ok(acc)
}

fn richardson_combine(coarse: Vec<f64>, fine: Vec<f64>, order: StencilOrder) -> Vec<f64> {
    let f = 2f64.powi(order.accuracy());
    coarse.iter().zip(&fine).map(|(c, d)| (f * d - c) / (f - 1.0)).collect()
}

/// Directional derivative of a vector-valued field along coordinate `direction`.
pub fn differentiate_field<F>(
    field: &F,
    point: &[f64],
    direction: usize,
    scheme: &DifferentiationScheme,
    region: &dyn Region,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    try_differentiate_field(&|p: &[f64]| Ok(field(p)), point, direction, scheme, region)
}

/// [`differentiate_field`] for fields whose evaluation can itself fail.
pub fn try_differentiate_field(
    field: &FallibleField<'_>,
    point: &[f64],
    direction: usize,
    scheme: &DifferentiationScheme,
    region: &dyn Region,
) -> Result<Vec<f64>> {
    if direction >= point.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: point.len(),
            found: direction,
        });
    }
    let h = scheme.step;
    let d = raw_first(field, point, direction, h, scheme.order, region)?;
    if scheme.richardson {
        let fine = raw_first(field, point, direction, h / 2.0, scheme.order, region)?;
        Ok(richardson_combine(d, fine, scheme.order))
    } else {
        Ok(d)
    }
}

/// All first partials: `out[a][k] = d field_k / d x_a`.
pub fn jacobian<F>(
    field: &F,
    point: &[f64],
    scheme: &DifferentiationScheme,
    region: &dyn Region,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    try_jacobian(&|p: &[f64]| Ok(field(p)), point, scheme, region)
}

pub fn try_jacobian(
    field: &FallibleField<'_>,
    point: &[f64],
    scheme: &DifferentiationScheme,
    region: &dyn Region,
) -> Result<Vec<Vec<f64>>> {
    (0..point.len())
        .map(|a| try_differentiate_field(field, point, a, scheme, region))
        .collect()
}

/// All second partials: `out[a][b][k] = d^2 field_k / d x_a d x_b` (symmetric in a, b).
pub fn second_partials<F>(
    field: &F,
    point: &[f64],
    scheme: &DifferentiationScheme,
    region: &dyn Region,
) -> Result<Vec<Vec<Vec<f64>>>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let field = |p: &[f64]| Ok(field(p));
    let n = point.len();
    let h = scheme.step;
    let mut out = vec![vec![Vec::new(); n]; n];
    for a in 0..n {
        for b in a..n {
            let mut d = raw_second(&field, point, a, b, h, scheme.order, region)?;
            if scheme.richardson {
                let fine = raw_second(&field, point, a, b, h / 2.0, scheme.order, region)?;
                d = richardson_combine(d, fine, scheme.order);
            }
            out[b][a] = d.clone();
            out[a][b] = d;
        }
    }
    Ok(out)
}

pub fn scalar_gradient<F>(f: &F, point: &[f64], scheme: &DifferentiationScheme, region: &dyn Region) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let field = |p: &[f64]| vec![f(p)];
    Ok(jacobian(&field, point, scheme, region)?
        .into_iter()
        .map(|v| v[0])
        .collect())
}

pub fn scalar_hessian<F>(
    f: &F,
    point: &[f64],
    scheme: &DifferentiationScheme,
    region: &dyn Region,
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let field = |p: &[f64]| vec![f(p)];
    let d2 = second_partials(&field, point, scheme, region)?;
    let n = point.len();
    Ok(DMatrix::from_fn(n, n, |a, b| d2[a][b][0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0]]
    }

    #[test]
    fn polynomial_first_derivative() {
        let s = DifferentiationScheme::new(1e-3, StencilOrder::Central4).unwrap();
        let d = differentiate_field(&line, &[1.0, 0.0], 0, &s, &Unbounded).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_field_has_zero_derivative() {
        let f = |_: &[f64]| vec![3.5, -1.0];
        let s = DifferentiationScheme::default();
        for dir in 0..3 {
            let d = differentiate_field(&f, &[0.2, -0.4, 1.0], dir, &s, &Unbounded).unwrap();
            assert!(d.iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn sine_derivative_at_origin() {
        let f = |x: &[f64]| vec![x[0].sin()];
        let s = DifferentiationScheme::default();
        let d = differentiate_field(&f, &[0.0, 0.0], 0, &s, &Unbounded).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stencil_leaving_region_is_reported() {
        let inside = |p: &[f64]| p[0] < 1.0;
        let s = DifferentiationScheme::default();
        let err = differentiate_field(&line, &[1.0 - 1e-4, 0.0], 0, &s, &inside).unwrap_err();
        assert!(matches!(err, GeometryError::StencilOutOfDomain { direction: 0, .. }));
    }

    #[test]
    fn halving_step_shrinks_central2_error() {
        let f = |x: &[f64]| vec![x[0].powi(3) + x[0].powi(4)];
        let exact = 3.0 * 0.7f64.powi(2) + 4.0 * 0.7f64.powi(3);
        let err = |h: f64| {
            let s = DifferentiationScheme::new(h, StencilOrder::Central2).unwrap();
            (differentiate_field(&f, &[0.7], 0, &s, &Unbounded).unwrap()[0] - exact).abs()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!(ratio >= 3.0, "ratio {ratio}");
    }

    #[test]
    fn richardson_improves_central2() {
        let f = |x: &[f64]| vec![x[0].exp()];
        let exact = 0.3f64.exp();
        let plain = DifferentiationScheme::new(1e-2, StencilOrder::Central2).unwrap();
        let extrap = plain.with_richardson(true);
        let e0 = (differentiate_field(&f, &[0.3], 0, &plain, &Unbounded).unwrap()[0] - exact).abs();
        let e1 = (differentiate_field(&f, &[0.3], 0, &extrap, &Unbounded).unwrap()[0] - exact).abs();
        assert!(e1 < e0 / 100.0);
    }

    #[test]
    fn mixed_second_partials() {
        let f = |x: &[f64]| x[0] * x[0] * x[1] + x[1].sin();
        let s = DifferentiationScheme::second_order_default();
        let h = scalar_hessian(&f, &[0.5, 0.25], &s, &Unbounded).unwrap();
        assert!((h[(0, 0)] - 0.5).abs() < 1e-8);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-8);
        assert!((h[(1, 1)] + 0.25f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(DifferentiationScheme::new(0.0, StencilOrder::Central2).is_err());
    }
}
