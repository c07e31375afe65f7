//! Curvature of the canonical connection in the unitary frame.

use nalgebra::DMatrix;

use crate::connection::{
    canonical_from_jet, frame_components4, i3, i4, levi_civita_from_jet, ConnectionTable, PointJet, RowOrder,
    SolveDiagnostics, TorsionComponents,
};
use crate::error::{GeometryError, Result};
use crate::manifold::{unitary_coframe, ManifoldChart, UnitaryCoframe};
use crate::numeric::{try_jacobian, DifferentiationScheme, HermitianMatrix, C64};

/// Frame components of the curvature of the canonical connection.
///
/// With `E = (e_1..e_m, ē_1..ē_m)` and `Rf[A][B][C][D] = θ^A(R(E_C, E_D) E_B)`:
/// `R_{jīkl} = Rf[i][j][k][l]`, `R_{jīkl̄} = Rf[i][j][k][m+l]`, `R_{jīk̄l̄} = Rf[i][j][m+k][m+l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureComponents {
    pub point: Vec<f64>,
    pub m: usize,
    /// `R_{jīkl}` at `i4(m, j, i, k, l)`.
    pub r_20: Vec<C64>,
    /// `R_{jīkl̄}` at `i4(m, j, i, k, l)`.
    pub r_11: Vec<C64>,
    /// `R_{jīk̄l̄}` at `i4(m, j, i, k, l)`.
    pub r_02: Vec<C64>,
    /// `R'_{kl̄} = Σ_i R_{iīkl̄}`, row-major `m x m`.
    pub ricci1: Vec<C64>,
    /// `R''_{ij̄} = Σ_k R_{ij̄kk̄}`, row-major `m x m`.
    pub ricci2: Vec<C64>,
    pub scalar: f64,
    /// All `Rf[A][B][C][D]`.
    pub full: Vec<C64>,
}

impl CurvatureComponents {
    pub fn from_frame_tensor(full: Vec<C64>, m: usize, point: &[f64]) -> Self {
        let n = 2 * m;
        let zero = C64::new(0.0, 0.0);
        let mut r_20 = vec![zero; m * m * m * m];
        let mut r_11 = r_20.clone();
        let mut r_02 = r_20.clone();
        for j in 0..m {
            for i in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let at = i4(m, j, i, k, l);
                        r_20[at] = full[i4(n, i, j, k, l)];
                        r_11[at] = full[i4(n, i, j, k, m + l)];
                        r_02[at] = full[i4(n, i, j, m + k, m + l)];
                    }
                }
            }
        }
        let mut ricci1 = vec![zero; m * m];
        let mut ricci2 = vec![zero; m * m];
        for a in 0..m {
            for b in 0..m {
                ricci1[a * m + b] = (0..m).map(|i| r_11[i4(m, i, i, a, b)]).sum();
                ricci2[a * m + b] = (0..m).map(|k| r_11[i4(m, a, b, k, k)]).sum();
            }
        }
        let scalar = (0..m).map(|k| ricci1[k * m + k].re).sum();
        Self {
            point: point.to_vec(),
            m,
            r_20,
            r_11,
            r_02,
            ricci1,
            ricci2,
            scalar,
            full,
        }
    }

    /// `R_{ij̄kl̄}`.
    pub fn r11(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.r_11[i4(self.m, i, j, k, l)]
    }

    pub fn max_abs_20_02(&self) -> f64 {
        self.r_20
            .iter()
            .chain(&self.r_02)
            .fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.full.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    /// `|scalar - Σ_k R''_{kk̄}|`.
    pub fn trace_residual(&self) -> f64 {
        let t: C64 = (0..self.m).map(|k| self.ricci2[k * self.m + k]).sum();
        (t - C64::new(self.scalar, 0.0)).norm()
    }

    pub fn ricci1_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::from_hermitian_part(DMatrix::from_row_slice(self.m, self.m, &self.ricci1))
    }
}

fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Holomorphic bisectional curvature `Σ R_{ij̄kl̄} X^i X̄^j Y^k Ȳ^l / (|X|^2 |Y|^2)`.
pub fn hbc(curv: &CurvatureComponents, x: &[C64], y: &[C64]) -> Result<f64> {
    let m = curv.m;
    if x.len() != m || y.len() != m {
        return Err(GeometryError::DimensionMismatch {
            expected: m,
            found: x.len().min(y.len()),
        });
    }
    let (nx, ny) = (norm_sqr(x), norm_sqr(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(GeometryError::ZeroVector);
    }
    Ok(bisectional_form(curv, x, y) / (nx * ny))
}

/// Holomorphic sectional curvature `hbc(X, X)`.
pub fn hsc(curv: &CurvatureComponents, x: &[C64]) -> Result<f64> {
    hbc(curv, x, x)
}

pub(crate) fn bisectional_form(curv: &CurvatureComponents, x: &[C64], y: &[C64]) -> f64 {
    let m = curv.m;
    let mut s = C64::new(0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            let xij = x[i] * x[j].conj();
            if xij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..m {
                for l in 0..m {
                    s += curv.r11(i, j, k, l) * xij * y[k] * y[l].conj();
                }
            }
        }
    }
    s.re
}

/// `R(X̄, Y, Y, X) = g(R(Y, X) X̄, Y)` for (1,0)-vectors, from the (2,0)-curvature.
pub fn mixed_curvature_term(curv: &CurvatureComponents, x: &[C64], y: &[C64]) -> C64 {
    let m = curv.m;
    let n = 2 * m;
    let mut s = C64::new(0.0, 0.0);
    for j in 0..m {
        for k in 0..m {
            for l in 0..m {
                for p in 0..m {
                    s += x[j].conj() * y[k] * x[l] * y[p] * curv.full[i4(n, m + p, m + j, k, l)];
                }
            }
        }
    }
    s
}

/// Everything the identity checks need at one point, computed once.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub point: Vec<f64>,
    pub m: usize,
    pub frame: UnitaryCoframe,
    pub jet: PointJet,
    pub canonical: ConnectionTable,
    pub levi_civita: ConnectionTable,
    pub solve: SolveDiagnostics,
    pub torsion: TorsionComponents,
    /// `∂_e Γ^c_{ab}` at `[e][i3(n, c, a, b)]`.
    pub dgamma: Vec<Vec<f64>>,
    pub curvature: CurvatureComponents,
    /// `θ^A((∇_{E_D} τ)(E_B, E_C))` at `i4(n, A, B, C, D)`.
    pub torsion_derivative: Vec<C64>,
}

impl PointGeometry {
    pub fn compute(chart: &ManifoldChart, point: &[f64], scheme: &DifferentiationScheme) -> Result<Self> {
        let frame = unitary_coframe(chart, point)?;
        Self::compute_in_frame(chart, point, scheme, frame)
    }

    pub fn compute_in_frame(
        chart: &ManifoldChart,
        point: &[f64],
        scheme: &DifferentiationScheme,
        frame: UnitaryCoframe,
    ) -> Result<Self> {
        let n = chart.real_dim();
        let m = chart.complex_dim();
        let outer = chart.fitted_scheme(point, scheme);
        let jet = PointJet::compute(chart, point, scheme)?;
        let (canonical, solve) = canonical_from_jet(&jet, RowOrder::Natural)?;
        let levi_civita = levi_civita_from_jet(&jet);
        let gamma_field = |p: &[f64]| -> Result<Vec<f64>> {
            let jet = PointJet::compute(chart, p, scheme)?;
            Ok(canonical_from_jet(&jet, RowOrder::Natural)?.0.gamma)
        };
        let dgamma = try_jacobian(&gamma_field, point, &outer, chart)?;
        let gamma = &canonical.gamma;

        let mut r = vec![0.0; n * n * n * n];
        for d in 0..n {
            for c in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let mut s = dgamma[a][i3(n, d, b, c)] - dgamma[b][i3(n, d, a, c)];
                        for e in 0..n {
                            s += gamma[i3(n, d, a, e)] * gamma[i3(n, e, b, c)]
                                - gamma[i3(n, d, b, e)] * gamma[i3(n, e, a, c)];
                        }
                        r[i4(n, d, c, a, b)] = s;
                    }
                }
            }
        }

        let t = canonical.torsion();
        let mut dt = vec![0.0; n * n * n * n];
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    for e in 0..n {
                        let mut s = dgamma[e][i3(n, c, a, b)] - dgamma[e][i3(n, c, b, a)];
                        for d in 0..n {
                            s += gamma[i3(n, c, e, d)] * t[i3(n, d, a, b)]
                                - gamma[i3(n, d, e, a)] * t[i3(n, c, d, b)]
                                - gamma[i3(n, d, e, b)] * t[i3(n, c, a, d)];
                        }
                        dt[i4(n, c, a, b, e)] = s;
                    }
                }
            }
        }

        let basis = frame.basis();
        let dual = frame.dual();
        let torsion = TorsionComponents::from_coordinates(&t, &frame);
        let curvature = CurvatureComponents::from_frame_tensor(frame_components4(&r, &basis, &dual), m, point);
        let torsion_derivative = frame_components4(&dt, &basis, &dual);
        Ok(Self {
            point: point.to_vec(),
            m,
            frame,
            jet,
            canonical,
            levi_civita,
            solve,
            torsion,
            dgamma,
            curvature,
            torsion_derivative,
        })
    }
}

pub fn curvature(chart: &ManifoldChart, point: &[f64], scheme: &DifferentiationScheme) -> Result<CurvatureComponents> {
    Ok(PointGeometry::compute(chart, point, scheme)?.curvature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::entry;

    fn unit(m: usize, k: usize) -> Vec<C64> {
        (0..m).map(|i| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0)).collect()
    }

    #[test]
    fn disc_has_constant_holomorphic_curvature() {
        let e = entry("poincare_disc_k1").unwrap();
        let s = DifferentiationScheme::default();
        for p in [[0.0, 0.0], [0.3, -0.4], [-0.6, 0.1]] {
            let c = curvature(&e.chart, &p, &s).unwrap();
            let k = hsc(&c, &unit(1, 0)).unwrap();
            assert!((k + 1.0).abs() < 1e-5, "{k}");
            assert!((c.scalar + 1.0).abs() < 1e-5);
            assert!(c.max_abs_20_02() < 1e-6);
        }
    }

    #[test]
    fn hsc_is_phase_invariant() {
        let e = entry("complex_hyperbolic_ball").unwrap();
        let c = curvature(&e.chart, &[0.2, 0.1, -0.3, 0.2], &DifferentiationScheme::default()).unwrap();
        let x = vec![C64::new(0.6, 0.1), C64::new(-0.2, 0.7)];
        let phase = C64::from_polar(1.0, 0.9);
        let y: Vec<C64> = x.iter().map(|z| z * phase).collect();
        let (a, b) = (hsc(&c, &x).unwrap(), hsc(&c, &y).unwrap());
        assert!((a - b).abs() < 1e-10);
        assert!((a + 1.0).abs() < 1e-4, "{a}");
    }

    #[test]
    fn zero_vector_is_rejected() {
        let e = entry("flat_c1").unwrap();
        let c = curvature(&e.chart, &[0.0, 0.0], &DifferentiationScheme::default()).unwrap();
        assert_eq!(hsc(&c, &[C64::new(0.0, 0.0)]), Err(GeometryError::ZeroVector));
        assert!(hsc(&c, &unit(1, 0)).unwrap().abs() < 1e-12);
    }
}
