//! Built-in almost Hermitian manifolds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeometryError, Result};
use crate::manifold::{standard_acs, ClosedFormDistance, Domain, ManifoldChart};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogFlags {
    pub integrable: bool,
    pub kahler: bool,
    pub closed_form_distance: bool,
    pub cut_points: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KnownCurvature {
    pub hsc: f64,
    pub scalar: f64,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: String,
    pub chart: ManifoldChart,
    pub flags: CatalogFlags,
    pub known: Option<KnownCurvature>,
    /// Radius (in chart coordinates) of a ball around the center from which random
    /// interior test points are drawn.
    pub sample_radius: f64,
}

pub const CATALOG_NAMES: [&str; 8] = [
    "flat_c1",
    "flat_c2",
    "poincare_disc_k1",
    "poincare_disc_k4",
    "complex_hyperbolic_ball",
    "product_disc_disc",
    "s6_nearly_kahler",
    "perturbed_r4",
];

pub fn catalog() -> Vec<CatalogEntry> {
    CATALOG_NAMES
        .iter()
        .map(|n| entry(n).expect("built-in entry"))
        .collect()
}

pub fn entry(name: &str) -> Result<CatalogEntry> {
    let e = match name {
        "flat_c1" => flat(1),
        "flat_c2" => flat(2),
        "poincare_disc_k1" => disc(name, 2.0),
        "poincare_disc_k4" => disc(name, 1.0),
        "complex_hyperbolic_ball" => ball(),
        "product_disc_disc" => product_disc(),
        "s6_nearly_kahler" => s6(),
        "perturbed_r4" => perturbed_r4(),
        other => return Err(GeometryError::InvalidInput(format!("unknown catalog entry `{other}`"))),
    };
    Ok(e)
}

fn kahler_flags(cut: Option<&str>) -> CatalogFlags {
    CatalogFlags {
        integrable: true,
        kahler: true,
        closed_form_distance: true,
        cut_points: cut.map(str::to_string),
    }
}

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn flat(m: usize) -> CatalogEntry {
    let n = 2 * m;
    let chart = ManifoldChart::new(
        format!("flat_c{m}"),
        m,
        vec![(-10.0, 10.0); n],
        Arc::new(move |_| DMatrix::identity(n, n)),
        Arc::new(move |_| standard_acs(m)),
    )
    .expect("valid chart")
    .with_distance(ClosedFormDistance {
        distance: Arc::new(euclid),
        cut_radius: None,
        waypoint: None,
    });
    CatalogEntry {
        name: format!("flat_c{m}"),
        chart,
        flags: kahler_flags(None),
        known: Some(KnownCurvature { hsc: 0.0, scalar: 0.0 }),
        sample_radius: 5.0,
    }
}

/// Hyperbolic distance of the unit disc with metric `c^2 |dz|^2 / (1-|z|^2)^2`.
fn disc_distance(c: f64, z: &[f64], w: &[f64]) -> f64 {
    let num = euclid(z, w);
    // |1 - conj(z) w|
    let re = 1.0 - (z[0] * w[0] + z[1] * w[1]);
    let im = -(z[0] * w[1] - z[1] * w[0]);
    let t = (num / (re * re + im * im).sqrt()).min(1.0);
    c * t.atanh()
}

fn disc(name: &str, c: f64) -> CatalogEntry {
    let chart = ManifoldChart::new(
        name,
        1,
        vec![(-1.0, 1.0); 2],
        Arc::new(move |p: &[f64]| {
            let s = 1.0 - p[0] * p[0] - p[1] * p[1];
            DMatrix::identity(2, 2) * (c * c / (s * s))
        }),
        Arc::new(|_| standard_acs(1)),
    )
    .expect("valid chart")
    .with_domain(Domain::Ball { radius: 1.0 })
    .with_distance(ClosedFormDistance {
        distance: Arc::new(move |z, w| disc_distance(c, z, w)),
        cut_radius: None,
        waypoint: None,
    });
    let k = -4.0 / (c * c);
    CatalogEntry {
        name: name.to_string(),
        chart,
        flags: kahler_flags(None),
        known: Some(KnownCurvature { hsc: k, scalar: k }),
        sample_radius: 0.9,
    }
}

/// Real form of the Hermitian metric `h_{ij̄} = 4[δ_ij/(1-|z|^2) + z̄_i z_j/(1-|z|^2)^2]`.
pub fn ball_metric(p: &[f64]) -> DMatrix<f64> {
    let m = p.len() / 2;
    let s = 1.0 - p.iter().map(|x| x * x).sum::<f64>();
    let mut g = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            // z̄_i z_j
            let (xi, yi, xj, yj) = (p[2 * i], p[2 * i + 1], p[2 * j], p[2 * j + 1]);
            let re = xi * xj + yi * yj;
            let im = xi * yj - yi * xj;
            let d = if i == j { 1.0 } else { 0.0 };
            let hr = 4.0 * (d / s + re / (s * s));
            let hi = 4.0 * im / (s * s);
            g[(2 * i, 2 * j)] = hr;
            g[(2 * i + 1, 2 * j + 1)] = hr;
            g[(2 * i, 2 * j + 1)] = hi;
            g[(2 * i + 1, 2 * j)] = -hi;
        }
    }
    g
}

pub fn ball_distance(z: &[f64], w: &[f64]) -> f64 {
    let m = z.len() / 2;
    let (mut re, mut im) = (1.0, 0.0);
    for k in 0..m {
        // <z, w> = Σ z_k conj(w_k)
        let (a, b, c, d) = (z[2 * k], z[2 * k + 1], w[2 * k], w[2 * k + 1]);
        re -= a * c + b * d;
        im -= b * c - a * d;
    }
    let nz = 1.0 - z.iter().map(|x| x * x).sum::<f64>();
    let nw = 1.0 - w.iter().map(|x| x * x).sum::<f64>();
    let ch2 = ((re * re + im * im) / (nz * nw)).max(1.0);
    2.0 * ch2.sqrt().acosh()
}

fn ball() -> CatalogEntry {
    let chart = ManifoldChart::new(
        "complex_hyperbolic_ball",
        2,
        vec![(-1.0, 1.0); 4],
        Arc::new(ball_metric),
        Arc::new(|_| standard_acs(2)),
    )
    .expect("valid chart")
    .with_domain(Domain::Ball { radius: 1.0 })
    .with_distance(ClosedFormDistance {
        distance: Arc::new(ball_distance),
        cut_radius: None,
        waypoint: None,
    });
    CatalogEntry {
        name: "complex_hyperbolic_ball".into(),
        chart,
        flags: kahler_flags(None),
        known: Some(KnownCurvature {
            hsc: -1.0,
            scalar: -3.0,
        }),
        sample_radius: 0.8,
    }
}

fn product_disc() -> CatalogEntry {
    let chart = ManifoldChart::new(
        "product_disc_disc",
        2,
        vec![(-1.0, 1.0); 4],
        Arc::new(|p: &[f64]| {
            let mut g = DMatrix::zeros(4, 4);
            for k in 0..2 {
                let s = 1.0 - p[2 * k] * p[2 * k] - p[2 * k + 1] * p[2 * k + 1];
                g[(2 * k, 2 * k)] = 4.0 / (s * s);
                g[(2 * k + 1, 2 * k + 1)] = 4.0 / (s * s);
            }
            g
        }),
        Arc::new(|_| standard_acs(2)),
    )
    .expect("valid chart")
    .with_domain(Domain::Polydisc { radius: 1.0 })
    .with_distance(ClosedFormDistance {
        distance: Arc::new(|z, w| {
            let a = disc_distance(2.0, &z[0..2], &w[0..2]);
            let b = disc_distance(2.0, &z[2..4], &w[2..4]);
            (a * a + b * b).sqrt()
        }),
        cut_radius: None,
        waypoint: None,
    });
    CatalogEntry {
        name: "product_disc_disc".into(),
        chart,
        flags: kahler_flags(None),
        known: None,
        sample_radius: 0.6,
    }
}

/// Octonionic cross product on `R^7`: `e_i × e_{i+1} = e_{i+3}` (indices mod 7).
pub fn cross7(u: &[f64], v: &[f64]) -> [f64; 7] {
    let mut w = [0.0; 7];
    for i in 0..7 {
        let (a, b, c) = (i, (i + 1) % 7, (i + 3) % 7);
        w[c] += u[a] * v[b] - u[b] * v[a];
        w[a] += u[b] * v[c] - u[c] * v[b];
        w[b] += u[c] * v[a] - u[a] * v[c];
    }
    w
}

/// Inverse stereographic projection from `e_7`: `p = (2y, |y|^2 - 1) / (|y|^2 + 1)`.
pub fn s6_embedding(y: &[f64]) -> [f64; 7] {
    let s: f64 = y.iter().map(|x| x * x).sum();
    let mut p = [0.0; 7];
    for k in 0..6 {
        p[k] = 2.0 * y[k] / (1.0 + s);
    }
    p[6] = (s - 1.0) / (s + 1.0);
    p
}

/// Differential of [`s6_embedding`] as a 7x6 matrix.
pub fn s6_embedding_jacobian(y: &[f64]) -> DMatrix<f64> {
    let s: f64 = y.iter().map(|x| x * x).sum();
    let q = 1.0 + s;
    DMatrix::from_fn(7, 6, |k, a| {
        if k < 6 {
            let d = if k == a { 2.0 / q } else { 0.0 };
            d - 4.0 * y[k] * y[a] / (q * q)
        } else {
            4.0 * y[a] / (q * q)
        }
    })
}

pub fn s6_metric(y: &[f64]) -> DMatrix<f64> {
    let s: f64 = y.iter().map(|x| x * x).sum();
    DMatrix::identity(6, 6) * (4.0 / ((1.0 + s) * (1.0 + s)))
}

/// `J v = p × v` on `T_p S^6`, pulled back to the chart.
pub fn s6_acs(y: &[f64]) -> DMatrix<f64> {
    let p = s6_embedding(y);
    let d = s6_embedding_jacobian(y);
    let s: f64 = y.iter().map(|x| x * x).sum();
    let rho2 = 4.0 / ((1.0 + s) * (1.0 + s));
    let mut img = DMatrix::zeros(7, 6);
    for a in 0..6 {
        let col: Vec<f64> = d.column(a).iter().copied().collect();
        let w = cross7(&p, &col);
        for k in 0..7 {
            img[(k, a)] = w[k];
        }
    }
    d.transpose() * img / rho2
}

/// Stereographic coordinates of a point of `S^6 ⊂ R^7` other than `e_7`.
pub fn s6_chart_point(p: &[f64]) -> Vec<f64> {
    (0..6).map(|k| p[k] / (1.0 - p[6])).collect()
}

fn s6_waypoint(y: &[f64], z: &[f64], s: f64) -> Vec<f64> {
    let (p, q) = (s6_embedding(y), s6_embedding(z));
    let c: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
    let mut d: Vec<f64> = q.iter().zip(&p).map(|(b, a)| b - c * a).collect();
    let mut len = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len < 1e-12 {
        // antipodal: every great circle through p is minimal
        let k = (0..7)
            .min_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs()))
            .expect("seven components");
        d = (0..7).map(|i| if i == k { 1.0 } else { 0.0 } - p[k] * p[i]).collect();
        len = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let w: Vec<f64> = (0..7).map(|i| s.cos() * p[i] + s.sin() * d[i] / len).collect();
    s6_chart_point(&w)
}

fn s6() -> CatalogEntry {
    let chart = ManifoldChart::new(
        "s6_nearly_kahler",
        3,
        vec![(-3.0, 3.0); 6],
        Arc::new(s6_metric),
        Arc::new(s6_acs),
    )
    .expect("valid chart")
    .with_domain(Domain::Ball { radius: 3.0 })
    .with_distance(ClosedFormDistance {
        distance: Arc::new(|y, z| {
            let (p, q) = (s6_embedding(y), s6_embedding(z));
            let c: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
            c.clamp(-1.0, 1.0).acos()
        }),
        cut_radius: Some(std::f64::consts::PI),
        waypoint: Some(Arc::new(s6_waypoint)),
    });
    CatalogEntry {
        name: "s6_nearly_kahler".into(),
        chart,
        flags: CatalogFlags {
            integrable: false,
            kahler: false,
            closed_form_distance: true,
            cut_points: Some("antipode of the base point (distance pi)".into()),
        },
        known: None,
        sample_radius: 1.5,
    }
}

const PERTURBATION: f64 = 0.3;

fn perturbation_frame(x: &[f64]) -> DMatrix<f64> {
    let bump = (-x.iter().map(|v| v * v).sum::<f64>()).exp();
    let s = DMatrix::from_fn(4, 4, |a, b| {
        let (af, bf) = (a as f64, b as f64);
        (af - bf + 0.5) * x[0] + (af * bf - 1.0) * x[1] * 0.5 + ((a + 2 * b) % 3) as f64 * x[2] * 0.3
            - (af + bf) * x[3] * 0.2
            + if a == (b + 1) % 4 { 0.4 } else { 0.0 }
    });
    DMatrix::identity(4, 4) + s * (PERTURBATION * bump)
}

pub fn perturbed_metric(x: &[f64]) -> DMatrix<f64> {
    let p_inv = perturbation_frame(x)
        .try_inverse()
        .expect("perturbation stays invertible");
    p_inv.transpose() * p_inv
}

pub fn perturbed_acs(x: &[f64]) -> DMatrix<f64> {
    let p = perturbation_frame(x);
    let p_inv = p.clone().try_inverse().expect("perturbation stays invertible");
    &p * standard_acs(2) * p_inv
}

fn perturbed_r4() -> CatalogEntry {
    let chart = ManifoldChart::new(
        "perturbed_r4",
        2,
        vec![(-2.0, 2.0); 4],
        Arc::new(perturbed_metric),
        Arc::new(perturbed_acs),
    )
    .expect("valid chart");
    CatalogEntry {
        name: "perturbed_r4".into(),
        chart,
        flags: CatalogFlags {
            integrable: false,
            kahler: false,
            closed_form_distance: false,
            cut_points: None,
        },
        known: None,
        sample_radius: 1.0,
    }
}

/// Deterministic interior sample points of a catalog entry.
pub fn sample_points(entry: &CatalogEntry, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = entry.chart.real_dim();
    let center = entry.chart.center();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = DVector::from_vec(v.clone()).norm();
        if norm > 1.0 || norm == 0.0 {
            continue;
        }
        let p: Vec<f64> = v
            .iter()
            .zip(&center)
            .map(|(x, c)| c + entry.sample_radius * x)
            .collect();
        if entry.chart.distance_to_boundary(&p) > 0.05 {
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::validate_chart;

    #[test]
    fn every_entry_is_a_valid_chart() {
        for e in catalog() {
            assert!(!e.flags.kahler || e.flags.integrable);
            let pts = sample_points(&e, 10, 7);
            let r = validate_chart(&e.chart, &pts).unwrap();
            assert!(r.passes, "{}: {:?}", e.name, r);
        }
    }

    #[test]
    fn cross_product_identities() {
        let u = [0.3, -0.1, 0.7, 0.2, -0.5, 0.4, 0.1];
        let v = [-0.2, 0.6, 0.1, -0.3, 0.2, 0.5, -0.4];
        let w = cross7(&u, &v);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!(dot(&w, &u).abs() < 1e-14 && dot(&w, &v).abs() < 1e-14);
        let lhs = dot(&w, &w);
        let rhs = dot(&u, &u) * dot(&v, &v) - dot(&u, &v).powi(2);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn closed_form_distances() {
        let d = entry("poincare_disc_k1").unwrap();
        let f = d.chart.closed_form_distance().unwrap();
        assert!(((f.distance)(&[0.0, 0.0], &[0.5, 0.0]) - 3f64.ln()).abs() < 1e-12);
        let b = entry("complex_hyperbolic_ball").unwrap();
        let f = b.chart.closed_form_distance().unwrap();
        assert!(((f.distance)(&[0.0; 4], &[0.0, 0.0, 0.5, 0.0]) - 3f64.ln()).abs() < 1e-12);
        let z = [0.1, 0.2, -0.3, 0.1];
        let w = [0.4, -0.1, 0.0, 0.2];
        assert!(((f.distance)(&z, &w) - (f.distance)(&w, &z)).abs() < 1e-12);
        let s = entry("s6_nearly_kahler").unwrap();
        let f = s.chart.closed_form_distance().unwrap();
        let y = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(((f.distance)(&[0.0; 6], &y) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(entry("nope").is_err());
    }
}
