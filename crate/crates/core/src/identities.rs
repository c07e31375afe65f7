//! Hessians and Laplacians of scalar functions, and the pointwise identities
//! tying torsion to curvature and to the Levi-Civita connection.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::connection::{
    canonical_from_jet, i3, i4, levi_civita_from_jet, ConnectionKind, ConnectionTable, PointJet, RowOrder,
    TorsionComponents,
};
use crate::curvature::PointGeometry;
use crate::error::Result;
use crate::manifold::{unitary_coframe, ManifoldChart, UnitaryCoframe};
use crate::numeric::{scalar_gradient, scalar_hessian, DifferentiationScheme, HermitianMatrix, C64};

/// `(∇du)` of a scalar at a point, in coordinates and in the unitary frame.
#[derive(Clone, Debug)]
pub struct ScalarHessian {
    pub point: Vec<f64>,
    pub kind: ConnectionKind,
    pub gradient: Vec<f64>,
    /// `H_ab = (∇du)(∂_a, ∂_b) = ∂_b ∂_a u - Γ^c_{ba} ∂_c u`.
    pub real: DMatrix<f64>,
    /// `u_{kl̄} = (∇du)(e_k, ē_l)` before symmetrisation.
    pub raw_complex: DMatrix<C64>,
    pub complex: HermitianMatrix,
}

impl ScalarHessian {
    /// `max |u_{kl̄} - conj(u_{lk̄})|`.
    pub fn hermitian_residual(&self) -> f64 {
        let r = &self.raw_complex;
        let mut worst = 0.0f64;
        for k in 0..r.nrows() {
            for l in 0..r.ncols() {
                worst = worst.max((r[(k, l)] - r[(l, k)].conj()).norm());
            }
        }
        worst
    }

    /// `Δu = g^{ab} H_ab = 2 Σ_k u_{kk̄}` (for the canonical kind the trace sees only the Hermitian part).
    pub fn laplacian(&self, g_inv: &DMatrix<f64>) -> f64 {
        g_inv.component_mul(&self.real).sum()
    }
}

fn connection_gamma(jet: &PointJet, kind: ConnectionKind) -> Result<Vec<f64>> {
    Ok(match kind {
        ConnectionKind::LeviCivita => levi_civita_from_jet(jet).gamma,
        ConnectionKind::Canonical => canonical_from_jet(jet, RowOrder::Natural)?.0.gamma,
    })
}

pub(crate) fn hessian_from_parts(
    point: &[f64],
    kind: ConnectionKind,
    gradient: Vec<f64>,
    second: &DMatrix<f64>,
    gamma: &[f64],
    frame: &UnitaryCoframe,
) -> ScalarHessian {
    let n = gradient.len();
    let m = n / 2;
    let real = DMatrix::from_fn(n, n, |a, b| {
        let mut s = second[(a, b)];
        for c in 0..n {
            s -= gamma[i3(n, c, b, a)] * gradient[c];
        }
        s
    });
    let e = &frame.frame_vectors;
    let raw_complex = DMatrix::from_fn(m, m, |k, l| {
        let mut s = C64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                s += e[(a, k)] * e[(b, l)].conj() * real[(a, b)];
            }
        }
        s
    });
    ScalarHessian {
        point: point.to_vec(),
        kind,
        gradient,
        real,
        complex: HermitianMatrix::from_hermitian_part(raw_complex.clone()),
        raw_complex,
    }
}

pub fn hessian_scalar<F>(
    chart: &ManifoldChart,
    u: &F,
    point: &[f64],
    kind: ConnectionKind,
    scheme: &DifferentiationScheme,
) -> Result<ScalarHessian>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let jet = PointJet::compute(chart, point, scheme)?;
    let frame = unitary_coframe(chart, point)?;
    let gamma = connection_gamma(&jet, kind)?;
    hessian_with(chart, u, point, kind, &gamma, &frame, scheme)
}

/// [`hessian_scalar`] with the connection and frame supplied by the caller.
pub fn hessian_with<F>(
    chart: &ManifoldChart,
    u: &F,
    point: &[f64],
    kind: ConnectionKind,
    gamma: &[f64],
    frame: &UnitaryCoframe,
    scheme: &DifferentiationScheme,
) -> Result<ScalarHessian>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let first = chart.fitted_scheme(point, scheme);
    let second_scheme = chart.fitted_scheme(point, &DifferentiationScheme::second_order_default());
    let gradient = scalar_gradient(u, point, &first, chart)?;
    let second = scalar_hessian(u, point, &second_scheme, chart)?;
    Ok(hessian_from_parts(point, kind, gradient, &second, gamma, frame))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LaplacianGap {
    pub laplacian: f64,
    pub lc_laplacian: f64,
    pub gap: f64,
    /// `Σ_{i,k} (τ^k_{ki} u_ī + τ^k̄_{k̄ī} u_i) = 2 Re Σ τ^k_{ki} u_ī`.
    pub torsion_prediction: f64,
}

impl LaplacianGap {
    pub fn residual(&self) -> f64 {
        (self.gap - self.torsion_prediction).abs()
    }
}

pub fn laplacian_gap<F>(
    chart: &ManifoldChart,
    u: &F,
    point: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<LaplacianGap>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let jet = PointJet::compute(chart, point, scheme)?;
    let frame = unitary_coframe(chart, point)?;
    let (can, _) = canonical_from_jet(&jet, RowOrder::Natural)?;
    let torsion = TorsionComponents::from_coordinates(&can.torsion(), &frame);
    laplacian_gap_with(chart, u, point, scheme, &jet, &can.gamma, &torsion, &frame)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn laplacian_gap_with<F>(
    chart: &ManifoldChart,
    u: &F,
    point: &[f64],
    scheme: &DifferentiationScheme,
    jet: &PointJet,
    canonical: &[f64],
    torsion: &TorsionComponents,
    frame: &UnitaryCoframe,
) -> Result<LaplacianGap>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let lc = levi_civita_from_jet(jet);
    let first = chart.fitted_scheme(point, scheme);
    let second_scheme = chart.fitted_scheme(point, &DifferentiationScheme::second_order_default());
    let gradient = scalar_gradient(u, point, &first, chart)?;
    let second = scalar_hessian(u, point, &second_scheme, chart)?;
    let h_can = hessian_from_parts(
        point,
        ConnectionKind::Canonical,
        gradient.clone(),
        &second,
        canonical,
        frame,
    );
    let h_lc = hessian_from_parts(
        point,
        ConnectionKind::LeviCivita,
        gradient.clone(),
        &second,
        &lc.gamma,
        frame,
    );
    let laplacian = h_can.laplacian(&jet.g_inv);
    let lc_laplacian = h_lc.laplacian(&jet.g_inv);
    let gap = laplacian - lc_laplacian;
    let n = gradient.len();
    let m = frame.complex_dim();
    let e = &frame.frame_vectors;
    let mut prediction = C64::new(0.0, 0.0);
    for i in 0..m {
        let u_ibar: C64 = (0..n).map(|a| e[(a, i)].conj() * gradient[a]).sum();
        for k in 0..m {
            prediction += torsion.t20(k, k, i) * u_ibar;
        }
    }
    Ok(LaplacianGap {
        laplacian,
        lc_laplacian,
        gap,
        torsion_prediction: 2.0 * prediction.re,
    })
}

/// Largest violation of
/// `⟨∇^{LC}_Y X - ∇_Y X, Z⟩ = ½(⟨τ(X,Y),Z⟩ + ⟨τ(Y,Z),X⟩ - ⟨τ(Z,X),Y⟩)` over coordinate triples.
pub fn lc_relation_residual(g: &DMatrix<f64>, canonical: &ConnectionTable, lc: &ConnectionTable) -> f64 {
    let n = g.nrows();
    let t = canonical.torsion();
    let lower = |x: usize, y: usize, z: usize| -> f64 { (0..n).map(|d| g[(z, d)] * t[i3(n, d, x, y)]).sum() };
    let mut worst = 0.0f64;
    for y in 0..n {
        for x in 0..n {
            for z in 0..n {
                let lhs: f64 = (0..n)
                    .map(|d| g[(z, d)] * (lc.get(d, y, x) - canonical.get(d, y, x)))
                    .sum();
                let rhs = 0.5 * (lower(x, y, z) + lower(y, z, x) - lower(z, x, y));
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst
}

pub fn verify_lc_relation(chart: &ManifoldChart, point: &[f64], scheme: &DifferentiationScheme) -> Result<f64> {
    let jet = PointJet::compute(chart, point, scheme)?;
    let (can, _) = canonical_from_jet(&jet, RowOrder::Natural)?;
    Ok(lc_relation_residual(&jet.g, &can, &levi_civita_from_jet(&jet)))
}

/// Residual of one identity together with the sizes of its two sides.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub residual: f64,
    pub lhs_max: f64,
    pub rhs_max: f64,
}

impl IdentityCheck {
    pub(crate) fn record(&mut self, lhs: C64, rhs: C64) {
        self.residual = self.residual.max((lhs - rhs).norm());
        self.lhs_max = self.lhs_max.max(lhs.norm());
        self.rhs_max = self.rhs_max.max(rhs.norm());
    }

    pub(crate) fn merge(&mut self, other: &IdentityCheck) {
        self.residual = self.residual.max(other.residual);
        self.lhs_max = self.lhs_max.max(other.lhs_max);
        self.rhs_max = self.rhs_max.max(other.rhs_max);
    }
}

/// Conjugation symmetries and antisymmetries of the curvature components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CurvatureSymmetries {
    /// `R_{jīkl} = conj(R_{ij̄l̄k̄})`, `R_{jīkl̄} = conj(R_{ij̄lk̄})`.
    pub conjugation: f64,
    /// `R_{jīkl} = -R_{īj kl} = -R_{jīlk}` and the same with `l̄`.
    pub antisymmetry: f64,
    /// `|scalar - Σ R''_{kk̄}|`.
    pub trace: f64,
}

pub fn curvature_symmetries(geom: &PointGeometry) -> CurvatureSymmetries {
    let m = geom.m;
    let n = 2 * m;
    let rf = &geom.curvature.full;
    let at = |a: usize, b: usize, c: usize, d: usize| rf[i4(n, a, b, c, d)];
    let mut conj = 0.0f64;
    let mut anti = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    conj = conj.max((at(i, j, k, l) - at(j, i, m + l, m + k).conj()).norm());
                    conj = conj.max((at(i, j, k, m + l) - at(j, i, l, m + k).conj()).norm());
                    anti = anti.max((at(i, j, k, l) + at(m + j, m + i, k, l)).norm());
                    anti = anti.max((at(i, j, k, l) + at(i, j, l, k)).norm());
                    anti = anti.max((at(i, j, k, m + l) + at(m + j, m + i, k, m + l)).norm());
                    anti = anti.max((at(i, j, k, m + l) + at(i, j, m + l, k)).norm());
                }
            }
        }
    }
    CurvatureSymmetries {
        conjugation: conj,
        antisymmetry: anti,
        trace: geom.curvature.trace_residual(),
    }
}

/// The two identities expressing curvature through covariant derivatives of torsion:
///
/// `R_{ij̄kl̄} - R_{kj̄il̄} = τ^j_{ik;l̄} - τ^m̄_{ik} τ^j_{l̄m̄}` and
/// `R_{ij̄kl} = -τ^ī_{kl;j̄} + τ^ī_{j̄m̄} τ^m̄_{kl}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TorsionCurvatureReport {
    pub mixed: IdentityCheck,
    pub holomorphic: IdentityCheck,
}

impl TorsionCurvatureReport {
    pub fn residual(&self) -> f64 {
        self.mixed.residual.max(self.holomorphic.residual)
    }

    pub fn merge(&mut self, other: &TorsionCurvatureReport) {
        self.mixed.merge(&other.mixed);
        self.holomorphic.merge(&other.holomorphic);
    }
}

pub fn torsion_curvature_identities(geom: &PointGeometry) -> TorsionCurvatureReport {
    let m = geom.m;
    let n = 2 * m;
    let rf = &geom.curvature.full;
    let tf = &geom.torsion.full;
    let dt = &geom.torsion_derivative;
    let r = |a: usize, b: usize, c: usize, d: usize| rf[i4(n, a, b, c, d)];
    let t = |a: usize, b: usize, c: usize| tf[i3(n, a, b, c)];
    let mut report = TorsionCurvatureReport::default();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    // R_{ij̄kl̄} = Rf[j][i][k][m+l]
                    let lhs = r(j, i, k, m + l) - r(j, k, i, m + l);
                    let mut rhs = dt[i4(n, j, i, k, m + l)];
                    for p in 0..m {
                        rhs -= t(m + p, i, k) * t(j, m + l, m + p);
                    }
                    report.mixed.record(lhs, rhs);

                    // R_{ij̄kl} = Rf[j][i][k][l]
                    let lhs = r(j, i, k, l);
                    let mut rhs = -dt[i4(n, m + i, k, l, m + j)];
                    for p in 0..m {
                        rhs += t(m + i, m + j, m + p) * t(m + p, k, l);
                    }
                    report.holomorphic.record(lhs, rhs);
                }
            }
        }
    }
    report
}

pub fn verify_torsion_curvature_identities(
    chart: &ManifoldChart,
    point: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<TorsionCurvatureReport> {
    Ok(torsion_curvature_identities(&PointGeometry::compute(
        chart, point, scheme,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::entry;

    #[test]
    fn hessian_of_constant_vanishes() {
        let e = entry("poincare_disc_k1").unwrap();
        let h = hessian_scalar(
            &e.chart,
            &|_: &[f64]| 2.5,
            &[0.1, 0.2],
            ConnectionKind::Canonical,
            &DifferentiationScheme::default(),
        )
        .unwrap();
        assert!(h.complex.norm() < 1e-8);
    }

    #[test]
    fn flat_hessian_of_squared_modulus() {
        let e = entry("flat_c1").unwrap();
        let u = |p: &[f64]| p[0] * p[0] + p[1] * p[1];
        let h = hessian_scalar(
            &e.chart,
            &u,
            &[0.3, -0.2],
            ConnectionKind::Canonical,
            &DifferentiationScheme::default(),
        )
        .unwrap();
        assert!((h.complex.matrix()[(0, 0)].re - 2.0).abs() < 1e-7);
        assert!((h.laplacian(&DMatrix::identity(2, 2)) - 4.0).abs() < 1e-7);
    }

    #[test]
    fn disc_hessian_of_squared_distance_at_origin() {
        let e = entry("poincare_disc_k1").unwrap();
        let d = e.chart.closed_form_distance().unwrap().distance.clone();
        let u = move |p: &[f64]| d(&[0.0, 0.0], p).powi(2);
        let h = hessian_scalar(
            &e.chart,
            &u,
            &[0.0, 0.0],
            ConnectionKind::Canonical,
            &DifferentiationScheme::default(),
        )
        .unwrap();
        assert!((h.complex.matrix()[(0, 0)].re - 2.0).abs() < 1e-5);
    }

    #[test]
    fn kahler_gap_vanishes() {
        let e = entry("complex_hyperbolic_ball").unwrap();
        let u = |p: &[f64]| p[0] * p[3] + p[1].sin();
        let gap = laplacian_gap(&e.chart, &u, &[0.1, 0.2, 0.0, -0.3], &DifferentiationScheme::default()).unwrap();
        assert!(gap.gap.abs() < 1e-6 && gap.torsion_prediction.abs() < 1e-6);
    }
}
