//! Almost holomorphic maps between charts: jets, the pullback eigenvalue `λ`,
//! Schwarz, Bochner and jet-commutation checks.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::connection::ConnectionKind;
use crate::connection::{canonical_from_jet, i3, i4, PointJet, RowOrder};
use crate::curvature::PointGeometry;
use crate::error::{GeometryError, Result};
use crate::identities::{hessian_scalar, IdentityCheck};
use crate::manifold::{unitary_coframe, ManifoldChart, MatrixField, UnitaryCoframe};
use crate::numeric::{jacobian, second_partials, DifferentiationScheme, HermitianMatrix, C64};
use crate::output::fmt_f64;

pub type PointMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A coordinate map between two charts, expected to satisfy `df∘J = J̃∘df`.
#[derive(Clone)]
pub struct AlmostHolomorphicMap {
    pub name: String,
    pub source: ManifoldChart,
    pub target: ManifoldChart,
    pub f: PointMap,
    pub declared_holomorphic: bool,
}

impl fmt::Debug for AlmostHolomorphicMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlmostHolomorphicMap")
            .field("name", &self.name)
            .field("source", &self.source.name())
            .field("target", &self.target.name())
            .field("declared_holomorphic", &self.declared_holomorphic)
            .finish()
    }
}

impl AlmostHolomorphicMap {
    pub fn new(
        name: impl Into<String>,
        source: ManifoldChart,
        target: ManifoldChart,
        f: PointMap,
        declared_holomorphic: bool,
    ) -> Self {
        Self {
            name: name.into(),
            source,
            target,
            f,
            declared_holomorphic,
        }
    }

    /// `f(p)`, checked to lie in the target chart.
    pub fn image(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.source.check_point(p)?;
        let q = (self.f)(p);
        if q.len() != self.target.real_dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.target.real_dim(),
                found: q.len(),
            });
        }
        if !self.target.contains(&q) {
            return Err(GeometryError::ImageOutOfTargetChart { point: q });
        }
        Ok(q)
    }

    /// `outer ∘ self`.
    pub fn then(&self, outer: &AlmostHolomorphicMap) -> Self {
        let (inner, outer_f) = (self.f.clone(), outer.f.clone());
        Self {
            name: format!("{}.{}", outer.name, self.name),
            source: self.source.clone(),
            target: outer.target.clone(),
            f: Arc::new(move |p| outer_f(&inner(p))),
            declared_holomorphic: self.declared_holomorphic && outer.declared_holomorphic,
        }
    }
}

/// The chart with metric `e^{2σ} g`, same `J` and domain; no closed-form distance.
pub fn conformal_rescaling<S>(chart: &ManifoldChart, name: impl Into<String>, sigma: S) -> Result<ManifoldChart>
where
    S: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    let metric = chart.metric_field().clone();
    let scaled: MatrixField = Arc::new(move |p: &[f64]| metric(p) * (2.0 * sigma(p)).exp());
    Ok(ManifoldChart::new(
        name,
        chart.complex_dim(),
        chart.bounds().to_vec(),
        scaled,
        chart.acs_field().clone(),
    )?
    .with_domain(chart.domain()))
}

fn to_c(p: &[f64], k: usize) -> C64 {
    C64::new(p[2 * k], p[2 * k + 1])
}

/// Map of complex dimension one given by a function of `z = x_0 + i x_1`.
pub fn complex_map<G>(
    name: impl Into<String>,
    source: &ManifoldChart,
    target: &ManifoldChart,
    g: G,
    declared_holomorphic: bool,
) -> Result<AlmostHolomorphicMap>
where
    G: Fn(C64) -> C64 + Send + Sync + 'static,
{
    if source.complex_dim() != 1 || target.complex_dim() != 1 {
        return Err(GeometryError::InvalidInput(
            "complex_map needs charts of complex dimension one".into(),
        ));
    }
    let f: PointMap = Arc::new(move |p: &[f64]| {
        let w = g(to_c(p, 0));
        vec![w.re, w.im]
    });
    Ok(AlmostHolomorphicMap::new(
        name,
        source.clone(),
        target.clone(),
        f,
        declared_holomorphic,
    ))
}

/// `z ↦ e^{iφ}(z - a)/(1 - ā z)`.
pub fn mobius(a: C64, rotation: f64) -> impl Fn(C64) -> C64 + Clone + Send + Sync + 'static {
    let phase = C64::from_polar(1.0, rotation);
    move |z| phase * (z - a) / (C64::new(1.0, 0.0) - a.conj() * z)
}

/// Finite Blaschke product `e^{iφ} Π (z - a_k)/(1 - ā_k z)`.
pub fn blaschke(zeros: Vec<C64>, rotation: f64) -> impl Fn(C64) -> C64 + Clone + Send + Sync + 'static {
    let phase = C64::from_polar(1.0, rotation);
    move |z| {
        zeros
            .iter()
            .fold(phase, |acc, a| acc * (z - a) / (C64::new(1.0, 0.0) - a.conj() * z))
    }
}

/// Zeros (modulus below 0.9) and rotation of a random Blaschke product with 1..=3 factors.
pub fn random_blaschke_data<R: Rng>(rng: &mut R) -> (Vec<C64>, f64) {
    let k = rng.gen_range(1..=3);
    let zeros = (0..k)
        .map(|_| C64::from_polar(0.9 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    (zeros, rng.gen_range(0.0..std::f64::consts::TAU))
}

pub const MAP_NAMES: [&str; 8] = [
    "identity",
    "constant",
    "half",
    "square",
    "mobius",
    "blaschke",
    "conjugate",
    "ball_square",
];

/// Built-in maps between two charts.
pub fn map_by_name(name: &str, source: &ManifoldChart, target: &ManifoldChart) -> Result<AlmostHolomorphicMap> {
    let one = C64::new(1.0, 0.0);
    match name {
        "identity" => {
            if source.real_dim() != target.real_dim() {
                return Err(GeometryError::DimensionMismatch {
                    expected: source.real_dim(),
                    found: target.real_dim(),
                });
            }
            Ok(AlmostHolomorphicMap::new(
                name,
                source.clone(),
                target.clone(),
                Arc::new(|p: &[f64]| p.to_vec()),
                true,
            ))
        }
        "constant" => {
            let c = target.center();
            Ok(AlmostHolomorphicMap::new(
                name,
                source.clone(),
                target.clone(),
                Arc::new(move |_| c.clone()),
                true,
            ))
        }
        "half" => complex_map(name, source, target, |z| z * 0.5, true),
        "square" => complex_map(name, source, target, |z| z * z, true),
        "mobius" => complex_map(name, source, target, mobius(C64::new(0.3, 0.0), 0.0), true),
        "blaschke" => complex_map(
            name,
            source,
            target,
            blaschke(vec![C64::new(0.3, 0.0), C64::new(0.0, -0.5)], 0.0),
            true,
        ),
        "conjugate" => complex_map(name, source, target, |z| z.conj(), false),
        "ball_square" => {
            if source.complex_dim() != 2 || target.complex_dim() != 2 {
                return Err(GeometryError::InvalidInput("ball_square maps C^2 charts".into()));
            }
            Ok(AlmostHolomorphicMap::new(
                name,
                source.clone(),
                target.clone(),
                Arc::new(move |p: &[f64]| {
                    let (z1, z2) = (to_c(p, 0), to_c(p, 1));
                    let (w1, w2) = (z1 * z1 * one, z1 * z2);
                    vec![w1.re, w1.im, w2.re, w2.im]
                }),
                true,
            ))
        }
        other => Err(GeometryError::InvalidInput(format!("unknown map `{other}`"))),
    }
}

struct MapDerivatives {
    image: Vec<f64>,
    /// `d1[a][γ] = ∂_a f^γ`.
    d1: Vec<Vec<f64>>,
    /// `d2[a][b][γ]`.
    d2: Vec<Vec<Vec<f64>>>,
}

fn map_derivatives(
    map: &AlmostHolomorphicMap,
    p: &[f64],
    scheme: &DifferentiationScheme,
    second: bool,
) -> Result<MapDerivatives> {
    let image = map.image(p)?;
    let f = map.f.as_ref();
    let d1 = jacobian(f, p, &map.source.fitted_scheme(p, scheme), &map.source)?;
    let d2 = if second {
        let s2 = map
            .source
            .fitted_scheme(p, &DifferentiationScheme::second_order_default());
        second_partials(f, p, &s2, &map.source)?
    } else {
        Vec::new()
    };
    Ok(MapDerivatives { image, d1, d2 })
}

fn frame_at(chart: &ManifoldChart, p: &[f64]) -> Result<UnitaryCoframe> {
    unitary_coframe(chart, p).map_err(|e| match e {
        GeometryError::SampleOutOfDomain { .. } | GeometryError::DimensionMismatch { .. } => e,
        _ => GeometryError::FrameGaugeFailure { point: p.to_vec() },
    })
}

/// `f^α_i = θ̃^α(df(e_i))`.
fn first_jet(d1: &[Vec<f64>], src: &UnitaryCoframe, tgt: &UnitaryCoframe) -> DMatrix<C64> {
    let (ms, mt) = (src.complex_dim(), tgt.complex_dim());
    let (ns, nt) = (2 * ms, 2 * mt);
    DMatrix::from_fn(mt, ms, |alpha, i| {
        let mut s = C64::new(0.0, 0.0);
        for g in 0..nt {
            for a in 0..ns {
                s += tgt.theta[(alpha, g)] * d1[a][g] * src.frame_vectors[(a, i)];
            }
        }
        s
    })
}

/// `Q_ij = Σ_α conj(f^α_i) f^α_j`, so `‖df(ξ)‖² = ξ* Q ξ`.
fn pullback_form(f1: &DMatrix<C64>) -> HermitianMatrix {
    HermitianMatrix::from_hermitian_part(f1.adjoint() * f1)
}

/// Eigenvalues of the pulled-back target metric relative to the source metric, descending.
pub fn pullback_spectrum(map: &AlmostHolomorphicMap, p: &[f64], scheme: &DifferentiationScheme) -> Result<Vec<f64>> {
    let d = map_derivatives(map, p, scheme, false)?;
    let src = frame_at(&map.source, p)?;
    let tgt = frame_at(&map.target, &d.image)?;
    Ok(pullback_form(&first_jet(&d.d1, &src, &tgt)).eigen().values)
}

/// Operator norm of `df∘J - J̃∘df` from `(T_pM, g)` to `(T_{f(p)}M̃, g̃)`.
pub fn holomorphy_residual(map: &AlmostHolomorphicMap, p: &[f64], scheme: &DifferentiationScheme) -> Result<f64> {
    let d = map_derivatives(map, p, scheme, false)?;
    let (ns, nt) = (map.source.real_dim(), map.target.real_dim());
    let df = DMatrix::from_fn(nt, ns, |g, a| d.d1[a][g]);
    let a = &df * map.source.acs_at(p) - map.target.acs_at(&d.image) * &df;
    let chol = |g: DMatrix<f64>, q: &[f64]| {
        g.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| GeometryError::DegenerateMetric { point: q.to_vec() })
    };
    let ls = chol(map.source.metric_at(p), p)?;
    let lt = chol(map.target.metric_at(&d.image), &d.image)?;
    let ls_inv_t = ls
        .transpose()
        .try_inverse()
        .ok_or_else(|| GeometryError::DegenerateMetric { point: p.to_vec() })?;
    let m = lt.transpose() * a * ls_inv_t;
    Ok(m.singular_values().max())
}

/// First and second jets of a map at a point, in unitary frames of both charts.
#[derive(Clone, Debug, PartialEq)]
pub struct MapJet {
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    pub source_dim: usize,
    pub target_dim: usize,
    /// `f^α_i` at `(α, i)`.
    pub f1: DMatrix<C64>,
    /// `f^α_{ik}` at `(α*m + i)*m + k`.
    pub f2: Vec<C64>,
    /// `f^α_{ik̄}` at `(α*m + i)*m + k`.
    pub f2_bar: Vec<C64>,
    pub lambda_spectrum: Vec<f64>,
}

impl MapJet {
    pub fn f2(&self, alpha: usize, i: usize, k: usize) -> C64 {
        self.f2[(alpha * self.source_dim + i) * self.source_dim + k]
    }

    pub fn f2_bar(&self, alpha: usize, i: usize, k: usize) -> C64 {
        self.f2_bar[(alpha * self.source_dim + i) * self.source_dim + k]
    }

    pub fn f2_bar_max(&self) -> f64 {
        self.f2_bar.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_spectrum[0]
    }
}

/// `(∇df)(∂_a, ∂_b)^γ = ∂_a∂_b f^γ + Γ̃^γ_{αβ}(f(p)) ∂_a f^α ∂_b f^β - Γ^c_{ab} ∂_c f^γ`
/// at `(γ*ns + a)*ns + b`, with `a` the differentiation slot.
fn second_fundamental(d: &MapDerivatives, gamma: &[f64], gamma_t: &[f64], ns: usize, nt: usize) -> Vec<f64> {
    let mut out = vec![0.0; nt * ns * ns];
    for g in 0..nt {
        for a in 0..ns {
            for b in 0..ns {
                let mut s = d.d2[a][b][g];
                for al in 0..nt {
                    for be in 0..nt {
                        s += gamma_t[i3(nt, g, al, be)] * d.d1[a][al] * d.d1[b][be];
                    }
                }
                for c in 0..ns {
                    s -= gamma[i3(ns, c, a, b)] * d.d1[c][g];
                }
                out[(g * ns + a) * ns + b] = s;
            }
        }
    }
    out
}

/// `Σ θ̃^α_γ T^γ_{ab} X^a Y^b`.
fn contract2(t: &[f64], tgt: &UnitaryCoframe, alpha: usize, x: &[C64], y: &[C64], ns: usize, nt: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for g in 0..nt {
        let th = tgt.theta[(alpha, g)];
        let mut inner = C64::new(0.0, 0.0);
        for a in 0..ns {
            for b in 0..ns {
                inner += t[(g * ns + a) * ns + b] * x[a] * y[b];
            }
        }
        s += th * inner;
    }
    s
}

fn column(frame: &UnitaryCoframe, i: usize, conj: bool) -> Vec<C64> {
    frame
        .frame_vectors
        .column(i)
        .iter()
        .map(|z| if conj { z.conj() } else { *z })
        .collect()
}

fn canonical_gamma(chart: &ManifoldChart, p: &[f64], scheme: &DifferentiationScheme) -> Result<Vec<f64>> {
    let jet = PointJet::compute(chart, p, scheme)?;
    Ok(canonical_from_jet(&jet, RowOrder::Natural)?.0.gamma)
}

fn assemble_jet(
    d: &MapDerivatives,
    p: &[f64],
    src: &UnitaryCoframe,
    tgt: &UnitaryCoframe,
    gamma: &[f64],
    gamma_t: &[f64],
) -> (MapJet, Vec<f64>) {
    let (ms, mt) = (src.complex_dim(), tgt.complex_dim());
    let (ns, nt) = (2 * ms, 2 * mt);
    let f1 = first_jet(&d.d1, src, tgt);
    let sf = second_fundamental(d, gamma, gamma_t, ns, nt);
    let zero = C64::new(0.0, 0.0);
    let mut f2 = vec![zero; mt * ms * ms];
    let mut f2_bar = f2.clone();
    for alpha in 0..mt {
        for i in 0..ms {
            let ei = column(src, i, false);
            for k in 0..ms {
                let idx = (alpha * ms + i) * ms + k;
                f2[idx] = contract2(&sf, tgt, alpha, &column(src, k, false), &ei, ns, nt);
                f2_bar[idx] = contract2(&sf, tgt, alpha, &column(src, k, true), &ei, ns, nt);
            }
        }
    }
    let lambda_spectrum = pullback_form(&f1).eigen().values;
    let jet = MapJet {
        point: p.to_vec(),
        image: d.image.clone(),
        source_dim: ms,
        target_dim: mt,
        f1,
        f2,
        f2_bar,
        lambda_spectrum,
    };
    (jet, sf)
}

/// Jets of `map` at `p` in the given source and target frames.
pub fn map_jet_in_frames(
    map: &AlmostHolomorphicMap,
    p: &[f64],
    src: &UnitaryCoframe,
    tgt: &UnitaryCoframe,
    scheme: &DifferentiationScheme,
) -> Result<MapJet> {
    let d = map_derivatives(map, p, scheme, true)?;
    let gamma = canonical_gamma(&map.source, p, scheme)?;
    let gamma_t = canonical_gamma(&map.target, &d.image, scheme)?;
    Ok(assemble_jet(&d, p, src, tgt, &gamma, &gamma_t).0)
}

pub fn map_jet(map: &AlmostHolomorphicMap, p: &[f64], scheme: &DifferentiationScheme) -> Result<MapJet> {
    let src = frame_at(&map.source, p)?;
    let q = map.image(p)?;
    let tgt = frame_at(&map.target, &q)?;
    map_jet_in_frames(map, p, &src, &tgt, scheme)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchwarzSample {
    pub point: Vec<f64>,
    pub lambda_max: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchwarzReport {
    pub map: String,
    pub k1: f64,
    pub k2: f64,
    pub bound: f64,
    pub samples: Vec<SchwarzSample>,
    pub verdict: bool,
    pub liouville_flag: bool,
}

impl SchwarzReport {
    pub fn max_lambda(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |acc, s| acc.max(s.lambda_max))
    }

    pub fn min_margin(&self) -> f64 {
        self.samples.iter().fold(f64::INFINITY, |acc, s| acc.min(s.margin))
    }

    /// CSV with columns `point, lambda_max, margin`; coordinates separated by spaces.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| GeometryError::InvalidInput(format!("CSV output failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["point", "lambda_max", "margin"]).map_err(io)?;
        for s in &self.samples {
            let point = s.point.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
            w.write_record([point, fmt_f64(s.lambda_max), fmt_f64(s.margin)])
                .map_err(io)?;
        }
        w.flush()
            .map_err(|e| GeometryError::InvalidInput(format!("CSV output failed: {e}")))
    }
}

/// Threshold below which `k₁` counts as zero.
pub const LIOUVILLE_K1: f64 = 1e-9;

/// Checks `λ ≤ k₁/k₂` at each sample; with `k₁ = 0` additionally requires `λ ≈ 0`.
pub fn schwarz_check(
    map: &AlmostHolomorphicMap,
    k1: f64,
    k2: f64,
    samples: &[Vec<f64>],
    scheme: &DifferentiationScheme,
) -> Result<SchwarzReport> {
    if !(k2 > 0.0) {
        return Err(GeometryError::InvalidInput(format!("k2 must be positive, got {k2}")));
    }
    if samples.is_empty() {
        return Err(GeometryError::EmptySampleSet);
    }
    let bound = k1 / k2;
    let mut out = Vec::with_capacity(samples.len());
    for p in samples {
        let lambda_max = pullback_spectrum(map, p, scheme)?[0];
        out.push(SchwarzSample {
            point: p.clone(),
            lambda_max,
            margin: bound - lambda_max,
        });
    }
    let liouville_flag = k1 <= LIOUVILLE_K1;
    let mut verdict = out.iter().all(|s| s.margin >= -1e-3);
    if liouville_flag {
        verdict &= out.iter().all(|s| s.lambda_max <= 1e-6);
    }
    Ok(SchwarzReport {
        map: map.name.clone(),
        k1,
        k2,
        bound,
        samples: out,
        verdict,
        liouville_flag,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BochnerReport {
    pub point: Vec<f64>,
    /// `λ̃` at the point (the top eigenvalue of the pullback form).
    pub lambda: f64,
    /// `λ̃_{11̄}` as the canonical complex Hessian of the scalar `λ̃`.
    pub lhs: f64,
    /// `k₂λ̃² - k₁λ̃`.
    pub rhs: f64,
    pub holds: bool,
    /// `Σ f^α_{111̄} conj(f^α_1) + Σ |f^α_{11}|²` with `f_{111̄}` from the curvature expression.
    pub chain_value: f64,
    /// The chain without `Σ |f^α_{11}|²`.
    pub curvature_bound: f64,
    pub chain_residual: f64,
}

/// `λ̃ = ‖df(η₁)‖²` for the frame `η = e·U` whose first vector is the top eigenvector
/// of the pullback form at `p`, compared against `k₂λ̃² - k₁λ̃`.
pub fn bochner_check(
    map: &AlmostHolomorphicMap,
    k1: f64,
    k2: f64,
    p: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<BochnerReport> {
    let d = map_derivatives(map, p, scheme, true)?;
    let src = frame_at(&map.source, p)?;
    let tgt = frame_at(&map.target, &d.image)?;
    let f1 = first_jet(&d.d1, &src, &tgt);
    let eig = pullback_form(&f1).eigen();
    if eig.values.len() > 1 && eig.values[0] - eig.values[1] < 1e-8 {
        return Err(GeometryError::EigenvectorDegenerate {
            gap: eig.values[0] - eig.values[1],
        });
    }
    let u = eig.vectors.clone();
    let xi: Vec<C64> = u.column(0).iter().copied().collect();
    let lambda_field = |x: &[f64]| -> f64 {
        let eval = || -> Result<f64> {
            let dx = map_derivatives(map, x, scheme, false)?;
            let s = frame_at(&map.source, x)?;
            let t = frame_at(&map.target, &dx.image)?;
            let v = first_jet(&dx.d1, &s, &t) * DMatrix::from_column_slice(xi.len(), 1, &xi);
            Ok(v.iter().map(|z| z.norm_sqr()).sum())
        };
        eval().unwrap_or(f64::NAN)
    };
    let hess = hessian_scalar(&map.source, &lambda_field, p, ConnectionKind::Canonical, scheme)?;
    let h = hess.complex.matrix();
    let mut lhs = C64::new(0.0, 0.0);
    for k in 0..xi.len() {
        for l in 0..xi.len() {
            lhs += xi[k] * xi[l].conj() * h[(k, l)];
        }
    }
    if !lhs.re.is_finite() {
        return Err(GeometryError::NonFiniteState { t: 0.0 });
    }
    let lambda = eig.values[0];
    let rhs = k2 * lambda * lambda - k1 * lambda;

    let rotated = src.rotated(&u)?;
    let gs = PointGeometry::compute_in_frame(&map.source, p, scheme, rotated.clone())?;
    let gt = PointGeometry::compute_in_frame(&map.target, &d.image, scheme, tgt.clone())?;
    let (jet, _) = assemble_jet(&d, p, &rotated, &tgt, &gs.canonical.gamma, &gt.canonical.gamma);
    let (ms, mt) = (jet.source_dim, jet.target_dim);
    let (ns, nt) = (2 * ms, 2 * mt);
    let mut third = C64::new(0.0, 0.0);
    let mut f11_sq = 0.0;
    for alpha in 0..mt {
        let mut f111 = C64::new(0.0, 0.0);
        for j in 0..ms {
            f111 += jet.f1[(alpha, j)] * gs.curvature.full[i4(ns, j, 0, 0, ms)];
        }
        for be in 0..mt {
            for ga in 0..mt {
                for de in 0..mt {
                    f111 -= gt.curvature.full[i4(nt, alpha, be, ga, mt + de)]
                        * jet.f1[(be, 0)]
                        * jet.f1[(ga, 0)]
                        * jet.f1[(de, 0)].conj();
                }
            }
        }
        third += f111 * jet.f1[(alpha, 0)].conj();
        f11_sq += jet.f2(alpha, 0, 0).norm_sqr();
    }
    let chain_value = third.re + f11_sq;
    Ok(BochnerReport {
        point: p.to_vec(),
        lambda,
        lhs: lhs.re,
        rhs,
        holds: lhs.re >= rhs - 1e-3,
        chain_value,
        curvature_bound: third.re,
        chain_residual: (lhs.re - chain_value).abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JetCommutationReport {
    pub point: Vec<f64>,
    /// `f^α_{kl} - f^α_{lk}` against `Σ f^α_i τ^i_{kl} - Σ f^β_k f^γ_l τ̂^α_{βγ}`.
    pub symmetry: IdentityCheck,
    /// `f^α_{lmn̄}` against `Σ f^α_j R^j_{lmn̄} - Σ R̂^α_{βγδ̄} f^β_l f^γ_m conj(f^δ_n)`.
    pub third_order: IdentityCheck,
    /// Largest `|f^α_{kl̄}|`.
    pub f2_bar_max: f64,
    /// Largest `|Σ f^α_i τ^i_{kl}|`.
    pub source_torsion_term: f64,
    /// Largest `|Σ f^β_k f^γ_l τ̂^α_{βγ}|`.
    pub target_torsion_term: f64,
}

impl JetCommutationReport {
    pub fn residual(&self) -> f64 {
        self.symmetry.residual.max(self.third_order.residual)
    }
}

/// Evaluates both commutation relations for the jets of `map` at `p`, every term
/// computed on its own (third derivatives of `f` by a second finite-difference layer).
pub fn jet_commutation_check(
    map: &AlmostHolomorphicMap,
    p: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<JetCommutationReport> {
    let d = map_derivatives(map, p, scheme, true)?;
    let gs = PointGeometry::compute(&map.source, p, scheme)?;
    let gt = PointGeometry::compute(&map.target, &d.image, scheme)?;
    let (src, tgt) = (&gs.frame, &gt.frame);
    let (ms, mt) = (gs.m, gt.m);
    let (ns, nt) = (2 * ms, 2 * mt);
    let (gamma, gamma_t) = (&gs.canonical.gamma, &gt.canonical.gamma);
    let (jet, sf) = assemble_jet(&d, p, src, tgt, gamma, gamma_t);
    let f1 = &jet.f1;

    let mut symmetry = IdentityCheck::default();
    let (mut src_term, mut tgt_term) = (0.0f64, 0.0f64);
    for alpha in 0..mt {
        for k in 0..ms {
            for l in 0..ms {
                let lhs = jet.f2(alpha, k, l) - jet.f2(alpha, l, k);
                let s: C64 = (0..ms).map(|i| f1[(alpha, i)] * gs.torsion.t20(i, k, l)).sum();
                let mut t = C64::new(0.0, 0.0);
                for be in 0..mt {
                    for ga in 0..mt {
                        t += f1[(be, k)] * f1[(ga, l)] * gt.torsion.t20(alpha, be, ga);
                    }
                }
                src_term = src_term.max(s.norm());
                tgt_term = tgt_term.max(t.norm());
                symmetry.record(lhs, s - t);
            }
        }
    }

    // third partials d3[c][a][b][γ]
    let s2 = map
        .source
        .fitted_scheme(p, &DifferentiationScheme::second_order_default());
    let f = map.f.as_ref();
    let flat_second = |x: &[f64]| -> Vec<f64> {
        match second_partials(f, x, &s2, &map.source) {
            Ok(v) => v.into_iter().flatten().flatten().collect(),
            Err(_) => vec![f64::NAN; ns * ns * nt],
        }
    };
    let d3 = jacobian(&flat_second, p, &s2, &map.source)?;
    let third = |c: usize, a: usize, b: usize, g: usize| d3[c][(a * ns + b) * nt + g];
    let dgt = |e: usize, idx: usize| gt.dgamma[e][idx];

    // ∇_c of the second fundamental form, at [c][(γ*ns + a)*ns + b]
    let mut nabla = vec![vec![0.0; nt * ns * ns]; ns];
    for c in 0..ns {
        for g in 0..nt {
            for a in 0..ns {
                for b in 0..ns {
                    let mut s = third(c, a, b, g);
                    for al in 0..nt {
                        for be in 0..nt {
                            let gt_idx = i3(nt, g, al, be);
                            let mut dg = 0.0;
                            for e in 0..nt {
                                dg += dgt(e, gt_idx) * d.d1[c][e];
                            }
                            s += dg * d.d1[a][al] * d.d1[b][be];
                            s += gamma_t[gt_idx] * (d.d2[c][a][al] * d.d1[b][be] + d.d1[a][al] * d.d2[c][b][be]);
                            s += gamma_t[gt_idx] * d.d1[c][al] * sf[(be * ns + a) * ns + b];
                        }
                    }
                    for dd in 0..ns {
                        s -= gs.dgamma[c][i3(ns, dd, a, b)] * d.d1[dd][g];
                        s -= gamma[i3(ns, dd, a, b)] * d.d2[c][dd][g];
                        s -= gamma[i3(ns, dd, c, a)] * sf[(g * ns + dd) * ns + b];
                        s -= gamma[i3(ns, dd, c, b)] * sf[(g * ns + a) * ns + dd];
                    }
                    nabla[c][(g * ns + a) * ns + b] = s;
                }
            }
        }
    }

    let mut third_order = IdentityCheck::default();
    for alpha in 0..mt {
        for l in 0..ms {
            let el = column(src, l, false);
            for mm in 0..ms {
                let em = column(src, mm, false);
                for n in 0..ms {
                    let en_bar = column(src, n, true);
                    let mut lhs = C64::new(0.0, 0.0);
                    for c in 0..ns {
                        lhs += en_bar[c] * contract2(&nabla[c], tgt, alpha, &em, &el, ns, nt);
                    }
                    let mut rhs = C64::new(0.0, 0.0);
                    for j in 0..ms {
                        rhs += f1[(alpha, j)] * gs.curvature.full[i4(ns, j, l, mm, ms + n)];
                    }
                    for be in 0..mt {
                        for ga in 0..mt {
                            for de in 0..mt {
                                rhs -= gt.curvature.full[i4(nt, alpha, be, ga, mt + de)]
                                    * f1[(be, l)]
                                    * f1[(ga, mm)]
                                    * f1[(de, n)].conj();
                            }
                        }
                    }
                    third_order.record(lhs, rhs);
                }
            }
        }
    }

    Ok(JetCommutationReport {
        point: p.to_vec(),
        symmetry,
        third_order,
        f2_bar_max: jet.f2_bar_max(),
        source_torsion_term: src_term,
        target_torsion_term: tgt_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::entry;

    fn disc() -> ManifoldChart {
        entry("poincare_disc_k1").unwrap().chart
    }

    #[test]
    fn half_map_at_origin() {
        let d = disc();
        let m = map_by_name("half", &d, &d).unwrap();
        let jet = map_jet(&m, &[0.0, 0.0], &DifferentiationScheme::default()).unwrap();
        assert!((jet.lambda_max() - 0.25).abs() < 1e-8);
        assert!(jet.f2_bar_max() < 1e-6);
    }

    #[test]
    fn conjugation_is_maximally_non_holomorphic() {
        let d = disc();
        let s = DifferentiationScheme::default();
        let c = map_by_name("conjugate", &d, &d).unwrap();
        assert!((holomorphy_residual(&c, &[0.0, 0.0], &s).unwrap() - 2.0).abs() < 1e-8);
        let sq = map_by_name("square", &d, &d).unwrap();
        assert!(holomorphy_residual(&sq, &[0.3, -0.2], &s).unwrap() < 1e-8);
    }

    #[test]
    fn image_outside_target_is_reported() {
        let flat = entry("flat_c1").unwrap().chart;
        let m = map_by_name("identity", &flat, &disc()).unwrap();
        assert!(matches!(
            m.image(&[3.0, 0.0]),
            Err(GeometryError::ImageOutOfTargetChart { .. })
        ));
    }

    #[test]
    fn bochner_equality_for_half_map() {
        let d = disc();
        let m = map_by_name("half", &d, &d).unwrap();
        let b = bochner_check(&m, 1.0, 1.0, &[0.0, 0.0], &DifferentiationScheme::default()).unwrap();
        assert!((b.lhs + 3.0 / 16.0).abs() < 1e-6, "{}", b.lhs);
        assert!((b.rhs + 3.0 / 16.0).abs() < 1e-12);
        assert!(b.holds && b.chain_residual < 1e-6);
    }

    #[test]
    fn ball_square_jets_commute() {
        let b = entry("complex_hyperbolic_ball").unwrap().chart;
        let m = map_by_name("ball_square", &b, &b).unwrap();
        let r = jet_commutation_check(&m, &[0.2, 0.1, -0.1, 0.3], &DifferentiationScheme::default()).unwrap();
        assert!(r.symmetry.residual < 1e-5);
        assert!(r.third_order.residual < 1e-5 && r.third_order.lhs_max > 0.1);
        assert!(r.f2_bar_max < 1e-6);
    }

    #[test]
    fn rescaled_target_picks_up_torsion() {
        let s6 = entry("s6_nearly_kahler").unwrap().chart;
        let tgt = conformal_rescaling(&s6, "s6_rescaled", |y: &[f64]| 0.3 * y[0] - 0.2 * y[3] * y[3]).unwrap();
        let m = AlmostHolomorphicMap::new("identity", s6, tgt, Arc::new(|p: &[f64]| p.to_vec()), true);
        let p = [0.3, -0.2, 0.1, 0.25, 0.05, -0.15];
        let s = DifferentiationScheme::default();
        assert!(holomorphy_residual(&m, &p, &s).unwrap() < 1e-8);
        let r = jet_commutation_check(&m, &p, &s).unwrap();
        assert!(r.symmetry.lhs_max > 0.1 && r.symmetry.residual < 1e-6);
        assert!(r.third_order.lhs_max > 0.1 && r.third_order.residual < 1e-5);
    }

    #[test]
    fn schwarz_flags_liouville_case() {
        let d = disc();
        let s = DifferentiationScheme::default();
        let pts = vec![vec![0.0, 0.0], vec![0.3, 0.4]];
        let half = map_by_name("half", &d, &d).unwrap();
        let rep = schwarz_check(&half, 1.0, 1.0, &pts, &s).unwrap();
        assert!(rep.verdict && !rep.liouville_flag);
        let rep = schwarz_check(&half, 0.0, 1.0, &pts, &s).unwrap();
        assert!(rep.liouville_flag && !rep.verdict);
        assert!(matches!(
            schwarz_check(&half, 1.0, 0.0, &pts, &s),
            Err(GeometryError::InvalidInput(_))
        ));
    }
}
