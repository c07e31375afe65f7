//! Levi-Civita and canonical connections in the coordinate frame, and the
//! passage of coordinate tensors to unitary-frame components.
//!
//! Index conventions: `∇_{∂_a} ∂_b = Γ^c_{ab} ∂_c` is stored at `(c*n + a)*n + b`,
//! and the torsion `T^c_{ab} = Γ^c_{ab} - Γ^c_{ba}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::manifold::{acs_jet, metric_jet, unitary_coframe, ManifoldChart, UnitaryCoframe};
use crate::numeric::{DifferentiationScheme, C64};

#[inline]
pub(crate) fn i3(n: usize, c: usize, a: usize, b: usize) -> usize {
    (c * n + a) * n + b
}

#[inline]
pub(crate) fn i4(n: usize, d: usize, c: usize, a: usize, b: usize) -> usize {
    ((d * n + c) * n + a) * n + b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    Canonical,
    LeviCivita,
}

/// Metric, complex structure and their first partials at a point.
#[derive(Clone, Debug)]
pub struct PointJet {
    pub point: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub j: DMatrix<f64>,
    pub dj: Vec<DMatrix<f64>>,
}

impl PointJet {
    pub fn compute(chart: &ManifoldChart, point: &[f64], scheme: &DifferentiationScheme) -> Result<Self> {
        let scheme = chart.fitted_scheme(point, scheme);
        let (g, dg) = metric_jet(chart, point, &scheme)?;
        let (j, dj) = acs_jet(chart, point, &scheme)?;
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| GeometryError::DegenerateMetric { point: point.to_vec() })?;
        Ok(Self {
            point: point.to_vec(),
            g,
            g_inv,
            dg,
            j,
            dj,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// Connection coefficients at a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConnectionTable {
    pub point: Vec<f64>,
    pub kind: ConnectionKind,
    pub n: usize,
    pub gamma: Vec<f64>,
}

impl ConnectionTable {
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.gamma[i3(self.n, c, a, b)]
    }

    pub fn torsion(&self) -> Vec<f64> {
        torsion_of(&self.gamma, self.n)
    }

    pub fn max_abs_diff(&self, other: &ConnectionTable) -> f64 {
        self.gamma
            .iter()
            .zip(&other.gamma)
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
    }

    /// `max |∂_a g_{bc} - Γ^d_{ab} g_{dc} - Γ^d_{ac} g_{bd}|`.
    pub fn metric_residual(&self, jet: &PointJet) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = jet.dg[a][(b, c)];
                    for d in 0..n {
                        s -= self.get(d, a, b) * jet.g[(d, c)] + self.get(d, a, c) * jet.g[(b, d)];
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }

    /// `max |(∇_a J)^c_b|`.
    pub fn acs_residual(&self, jet: &PointJet) -> f64 {
        nabla_j(&self.gamma, jet).iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }
}

pub(crate) fn torsion_of(gamma: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                t[i3(n, c, a, b)] = gamma[i3(n, c, a, b)] - gamma[i3(n, c, b, a)];
            }
        }
    }
    t
}

/// `(∇_a J)^c_b = ∂_a J^c_b + Γ^c_{ad} J^d_b - Γ^d_{ab} J^c_d`, stored at `(a*n + c)*n + b`.
fn nabla_j(gamma: &[f64], jet: &PointJet) -> Vec<f64> {
    let n = jet.dim();
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for c in 0..n {
            for b in 0..n {
                let mut s = jet.dj[a][(c, b)];
                for d in 0..n {
                    s += gamma[i3(n, c, a, d)] * jet.j[(d, b)] - gamma[i3(n, d, a, b)] * jet.j[(c, d)];
                }
                out[i3(n, a, c, b)] = s;
            }
        }
    }
    out
}

pub fn levi_civita_from_jet(jet: &PointJet) -> ConnectionTable {
    let n = jet.dim();
    let mut gamma = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += jet.g_inv[(c, d)] * (jet.dg[a][(d, b)] + jet.dg[b][(d, a)] - jet.dg[d][(a, b)]);
                }
                gamma[i3(n, c, a, b)] = 0.5 * s;
                gamma[i3(n, c, b, a)] = 0.5 * s;
            }
        }
    }
    ConnectionTable {
        point: jet.point.clone(),
        kind: ConnectionKind::LeviCivita,
        n,
        gamma,
    }
}

/// Order in which the linear equations are stacked before the least-squares solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RowOrder {
    #[default]
    Natural,
    Reversed,
}

/// Diagnostics of the canonical-connection solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub unknowns: usize,
    pub equations: usize,
    pub rank: usize,
    pub residual: f64,
}

const RANK_TOLERANCE: f64 = 1e-10;

/// Canonical connection `Γ = Γ_LC + K` with `g(K(X,Y),Z)` skew in `(Y, Z)`,
/// fixed by `∇J = 0` and vanishing (1,1)-torsion.
pub fn canonical_from_jet(jet: &PointJet, order: RowOrder) -> Result<(ConnectionTable, SolveDiagnostics)> {
    let n = jet.dim();
    let lc = levi_civita_from_jet(jet);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|b| (b + 1..n).map(move |c| (b, c))).collect();
    let unknowns = n * pairs.len();
    let equations = 2 * n * n * n;

    let rhs_lc = nabla_j(&lc.gamma, jet);
    let mut a_mat = DMatrix::<f64>::zeros(equations, unknowns);
    let mut k = vec![0.0; n * n * n];
    for (col, (a, (b, c))) in (0..n).flat_map(|a| pairs.iter().map(move |&p| (a, p))).enumerate() {
        // L[a][b][c] = 1 = -L[a][c][b]  ->  K^d_{ab} = g^{dc}, K^d_{ac} = -g^{db}
        k.iter_mut().for_each(|x| *x = 0.0);
        for d in 0..n {
            k[i3(n, d, a, b)] += jet.g_inv[(d, c)];
            k[i3(n, d, a, c)] -= jet.g_inv[(d, b)];
        }
        let rows = linear_rows(&k, jet);
        for (r, v) in rows.into_iter().enumerate() {
            a_mat[(r, col)] = v;
        }
    }
    let mut rhs = DVector::<f64>::zeros(equations);
    for (r, v) in rhs_lc.iter().enumerate() {
        rhs[r] = -v;
    }
    if order == RowOrder::Reversed {
        let flipped = DMatrix::from_fn(equations, unknowns, |r, c| a_mat[(equations - 1 - r, c)]);
        a_mat = flipped;
        rhs = DVector::from_fn(equations, |r, _| rhs[equations - 1 - r]);
    }

    let qr = a_mat.clone().qr();
    let r = qr.r();
    let diag_max = (0..unknowns).fold(0.0f64, |acc, i| acc.max(r[(i, i)].abs()));
    let rank = (0..unknowns)
        .filter(|&i| r[(i, i)].abs() > RANK_TOLERANCE * diag_max)
        .count();
    if rank < unknowns {
        return Err(GeometryError::SingularSystem { rank, unknowns });
    }
    let qtb = qr.q().transpose() * &rhs;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or(GeometryError::SingularSystem { rank, unknowns })?;
    let residual = (&a_mat * &x - &rhs).amax();

    let mut gamma = lc.gamma.clone();
    for (col, (a, (b, c))) in (0..n).flat_map(|a| pairs.iter().map(move |&p| (a, p))).enumerate() {
        for d in 0..n {
            gamma[i3(n, d, a, b)] += x[col] * jet.g_inv[(d, c)];
            gamma[i3(n, d, a, c)] -= x[col] * jet.g_inv[(d, b)];
        }
    }
    Ok((
        ConnectionTable {
            point: jet.point.clone(),
            kind: ConnectionKind::Canonical,
            n,
            gamma,
        },
        SolveDiagnostics {
            unknowns,
            equations,
            rank,
            residual,
        },
    ))
}

/// Linear part of the defining equations in the contorsion `K`:
/// `K^c_{ad} J^d_b - J^c_d K^d_{ab}` followed by `T^c_{ab} + J^d_a J^e_b T^c_{de}`.
fn linear_rows(k: &[f64], jet: &PointJet) -> Vec<f64> {
    let n = jet.dim();
    let j = &jet.j;
    let mut out = vec![0.0; 2 * n * n * n];
    for a in 0..n {
        for c in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += k[i3(n, c, a, d)] * j[(d, b)] - j[(c, d)] * k[i3(n, d, a, b)];
                }
                out[i3(n, a, c, b)] = s;
            }
        }
    }
    let t = torsion_of(k, n);
    let off = n * n * n;
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut s = t[i3(n, c, a, b)];
                for d in 0..n {
                    if j[(d, a)] == 0.0 {
                        continue;
                    }
                    for e in 0..n {
                        s += j[(d, a)] * j[(e, b)] * t[i3(n, c, d, e)];
                    }
                }
                out[off + i3(n, c, a, b)] = s;
            }
        }
    }
    out
}

/// `out[A][B][C] = dual[A][c] t^c_{ab} basis[a][B] basis[b][C]`.
pub fn frame_components3(t: &[f64], basis: &DMatrix<C64>, dual: &DMatrix<C64>) -> Vec<C64> {
    let n = basis.nrows();
    let zero = C64::new(0.0, 0.0);
    // contract the last index first, then the middle, then the first
    let mut s1 = vec![zero; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for cc in 0..n {
                let mut s = zero;
                for b in 0..n {
                    s += basis[(b, cc)] * t[i3(n, c, a, b)];
                }
                s1[i3(n, c, a, cc)] = s;
            }
        }
    }
    let mut s2 = vec![zero; n * n * n];
    for c in 0..n {
        for bb in 0..n {
            for cc in 0..n {
                let mut s = zero;
                for a in 0..n {
                    s += basis[(a, bb)] * s1[i3(n, c, a, cc)];
                }
                s2[i3(n, c, bb, cc)] = s;
            }
        }
    }
    let mut out = vec![zero; n * n * n];
    for aa in 0..n {
        for bb in 0..n {
            for cc in 0..n {
                let mut s = zero;
                for c in 0..n {
                    s += dual[(aa, c)] * s2[i3(n, c, bb, cc)];
                }
                out[i3(n, aa, bb, cc)] = s;
            }
        }
    }
    out
}

/// `out[A][B][C][D] = dual[A][d] t^d_{cab} basis[c][B] basis[a][C] basis[b][D]`.
pub fn frame_components4(t: &[f64], basis: &DMatrix<C64>, dual: &DMatrix<C64>) -> Vec<C64> {
    let n = basis.nrows();
    let zero = C64::new(0.0, 0.0);
    let mut cur: Vec<C64> = t.iter().map(|&x| C64::new(x, 0.0)).collect();
    // lower slots 3, 2, 1 in turn
    for slot in (1..4).rev() {
        let mut next = vec![zero; n * n * n * n];
        for idx in 0..n * n * n * n {
            let mut digits = [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n];
            let target = digits[slot];
            let mut s = zero;
            for x in 0..n {
                digits[slot] = x;
                let src = i4(n, digits[0], digits[1], digits[2], digits[3]);
                s += basis[(x, target)] * cur[src];
            }
            next[idx] = s;
        }
        cur = next;
    }
    let mut out = vec![zero; n * n * n * n];
    for aa in 0..n {
        for rest in 0..n * n * n {
            let mut s = zero;
            for d in 0..n {
                s += dual[(aa, d)] * cur[d * n * n * n + rest];
            }
            out[aa * n * n * n + rest] = s;
        }
    }
    out
}

/// Torsion in the unitary frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TorsionComponents {
    pub point: Vec<f64>,
    pub m: usize,
    /// `τ^i_{jk}` at `(i*m + j)*m + k`.
    pub t20: Vec<C64>,
    /// `τ^i_{j̄k̄}` at `(i*m + j)*m + k`.
    pub t02: Vec<C64>,
    /// Largest frame component of the torsion with one (1,0) and one (0,1) argument.
    pub t11_residual: f64,
    /// All frame components `θ^A(τ(E_B, E_C))`, `E = (e, ē)`.
    pub full: Vec<C64>,
}

fn antisymmetrized(raw: &[C64], m: usize) -> Vec<C64> {
    let mut out = raw.to_vec();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                out[i3(m, i, j, k)] = 0.5 * (raw[i3(m, i, j, k)] - raw[i3(m, i, k, j)]);
            }
        }
    }
    out
}

impl TorsionComponents {
    pub fn from_coordinates(torsion: &[f64], frame: &UnitaryCoframe) -> Self {
        let m = frame.complex_dim();
        let n = 2 * m;
        let full = frame_components3(torsion, &frame.basis(), &frame.dual());
        let mut t20 = vec![C64::new(0.0, 0.0); m * m * m];
        let mut t02 = t20.clone();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    t20[i3(m, i, j, k)] = full[i3(n, i, j, k)];
                    t02[i3(m, i, j, k)] = full[i3(n, i, m + j, m + k)];
                }
            }
        }
        let mut t11_residual = 0.0f64;
        for a in 0..n {
            for j in 0..m {
                for k in 0..m {
                    t11_residual = t11_residual.max(full[i3(n, a, j, m + k)].norm());
                }
            }
        }
        Self {
            point: frame.point.clone(),
            m,
            t20: antisymmetrized(&t20, m),
            t02: antisymmetrized(&t02, m),
            t11_residual,
            full,
        }
    }

    pub fn t20(&self, i: usize, j: usize, k: usize) -> C64 {
        self.t20[i3(self.m, i, j, k)]
    }

    pub fn t02(&self, i: usize, j: usize, k: usize) -> C64 {
        self.t02[i3(self.m, i, j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.t20
            .iter()
            .chain(&self.t02)
            .fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn t02_norm(&self) -> f64 {
        self.t02.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// g-norm of `τ(X, Y)` for (1,0)-vectors with frame components `x`, `y`.
    pub fn value_norm(&self, x: &[C64], y: &[C64]) -> f64 {
        let m = self.m;
        let mut s = 0.0;
        for i in 0..m {
            let mut hol = C64::new(0.0, 0.0);
            let mut anti = C64::new(0.0, 0.0);
            for j in 0..m {
                for k in 0..m {
                    hol += self.t20(i, j, k) * x[j] * y[k];
                    anti += self.t02(i, j, k).conj() * x[j] * y[k];
                }
            }
            s += hol.norm_sqr() + anti.norm_sqr();
        }
        s.sqrt()
    }
}

pub fn levi_civita_connection(
    chart: &ManifoldChart,
    point: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<ConnectionTable> {
    let jet = PointJet::compute(chart, point, scheme)?;
    Ok(levi_civita_from_jet(&jet))
}

pub fn canonical_connection(
    chart: &ManifoldChart,
    point: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<(ConnectionTable, TorsionComponents)> {
    let jet = PointJet::compute(chart, point, scheme)?;
    let (table, _) = canonical_from_jet(&jet, RowOrder::Natural)?;
    let frame = unitary_coframe(chart, point)?;
    let torsion = TorsionComponents::from_coordinates(&table.torsion(), &frame);
    Ok((table, torsion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{standard_acs, Domain};
    use std::sync::Arc;

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
    fn flat_connections_vanish() {
        let c = ManifoldChart::new(
            "flat",
            2,
            vec![(-1.0, 1.0); 4],
            Arc::new(|_| DMatrix::identity(4, 4)),
            Arc::new(|_| standard_acs(2)),
        )
        .unwrap();
        let s = DifferentiationScheme::default();
        let (can, tor) = canonical_connection(&c, &[0.1, 0.2, -0.3, 0.0], &s).unwrap();
        assert!(can.gamma.iter().all(|x| x.abs() < 1e-12));
        assert!(tor.max_abs() < 1e-12);
    }

    #[test]
    fn kahler_disc_canonical_is_levi_civita() {
        let s = DifferentiationScheme::default();
        let p = [0.3, -0.2];
        let (can, tor) = canonical_connection(&disc(), &p, &s).unwrap();
        let lc = levi_civita_connection(&disc(), &p, &s).unwrap();
        assert!(can.max_abs_diff(&lc) < 1e-8);
        assert!(tor.max_abs() < 1e-8 && tor.t11_residual < 1e-8);
        let lc0 = levi_civita_connection(&disc(), &[0.0, 0.0], &s).unwrap();
        assert!(lc0.gamma.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn residuals_of_solved_connection() {
        let s = DifferentiationScheme::default();
        let jet = PointJet::compute(&disc(), &[0.1, 0.5], &s).unwrap();
        let (can, diag) = canonical_from_jet(&jet, RowOrder::Natural).unwrap();
        assert_eq!(diag.rank, diag.unknowns);
        assert!(can.metric_residual(&jet) < 1e-8);
        assert!(can.acs_residual(&jet) < 1e-8);
        let (rev, _) = canonical_from_jet(&jet, RowOrder::Reversed).unwrap();
        assert!(can.max_abs_diff(&rev) < 1e-10);
    }

    #[test]
    fn frame_transform_of_identity_tensor() {
        // t^c_{ab} = δ^c_a x_b style tensors map to the same pattern in any frame
        let g = DMatrix::identity(2, 2);
        let f = crate::manifold::coframe_from_tensors(&g, &standard_acs(1), &[0.0, 0.0]).unwrap();
        let n = 2;
        let w = [0.3, -0.7];
        let mut t = vec![0.0; 8];
        for c in 0..n {
            for b in 0..n {
                t[i3(n, c, c, b)] = w[b];
            }
        }
        let out = frame_components3(&t, &f.basis(), &f.dual());
        let wf: Vec<C64> = (0..n)
            .map(|bb| (0..n).map(|b| f.basis()[(b, bb)] * w[b]).sum())
            .collect();
        for aa in 0..n {
            for bb in 0..n {
                for cc in 0..n {
                    let expect = if aa == bb { wf[cc] } else { C64::new(0.0, 0.0) };
                    assert!((out[i3(n, aa, bb, cc)] - expect).norm() < 1e-14);
                }
            }
        }
    }
}
