//! Geodesics, distance functions, distance Hessians and the Riccati comparison
//! machinery behind the Hessian comparison theorem.

use std::io::Write;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::connection::{i3, levi_civita_from_jet, ConnectionKind, PointJet};
use crate::error::{GeometryError, Result};
use crate::growth::GrowthConstants;
use crate::identities::{hessian_scalar, ScalarHessian};
use crate::manifold::ManifoldChart;
use crate::numeric::{psd_order, rk4_step, DifferentiationScheme, HermitianMatrix, OdeState, C64};
use crate::output::fmt_f64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicRay {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    pub trajectory: Vec<GeodesicSample>,
    /// The integration stopped early because the next step left the chart.
    pub left_domain: bool,
}

impl GeodesicRay {
    pub fn endpoint(&self) -> &[f64] {
        &self.trajectory.last().expect("trajectory holds the base point").point
    }

    pub fn length(&self) -> f64 {
        self.trajectory.last().map_or(0.0, |s| s.t)
    }

    /// `max |‖σ'(t)‖_g - ‖σ'(0)‖_g|` along the trajectory.
    pub fn speed_drift(&self, chart: &ManifoldChart) -> f64 {
        let speed = |s: &GeodesicSample| chart.norm(&s.point, &s.velocity);
        let v0 = speed(&self.trajectory[0]);
        self.trajectory
            .iter()
            .fold(0.0f64, |acc, s| acc.max((speed(s) - v0).abs()))
    }
}

fn lc_gamma(chart: &ManifoldChart, x: &[f64]) -> Result<Vec<f64>> {
    let jet = PointJet::compute(chart, x, &DifferentiationScheme::default())?;
    Ok(levi_civita_from_jet(&jet).gamma)
}

/// `(x, v) ↦ (v, -Γ^c_{ab} v^a v^b)`; NaN when the stencil does not fit.
fn geodesic_rhs(chart: &ManifoldChart, state: &[f64]) -> Vec<f64> {
    let n = state.len() / 2;
    let (x, v) = state.split_at(n);
    let mut out = vec![f64::NAN; 2 * n];
    if !chart.contains(x) {
        return out;
    }
    let Ok(gamma) = lc_gamma(chart, x) else {
        return out;
    };
    out[..n].copy_from_slice(v);
    for c in 0..n {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += gamma[i3(n, c, a, b)] * v[a] * v[b];
            }
        }
        out[n + c] = -s;
    }
    out
}

fn integrate_geodesic(chart: &ManifoldChart, x0: &[f64], v: &[f64], length: f64, step: f64) -> Result<GeodesicRay> {
    if !(step > 0.0) || !(length >= 0.0) {
        return Err(GeometryError::InvalidInput(format!(
            "geodesic needs step > 0 and length >= 0, got {step}, {length}"
        )));
    }
    chart.check_point(x0)?;
    if v.len() != x0.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: x0.len(),
            found: v.len(),
        });
    }
    let n = x0.len();
    let rhs = |_t: f64, y: &[f64]| geodesic_rhs(chart, y);
    let mut state = OdeState::new(0.0, [x0, v].concat());
    let mut trajectory = vec![GeodesicSample {
        t: 0.0,
        point: x0.to_vec(),
        velocity: v.to_vec(),
    }];
    let mut left_domain = false;
    let steps = (length / step).ceil() as usize;
    for k in 0..steps {
        let h = if k + 1 == steps { length - state.t } else { step };
        match rk4_step(&rhs, &state, h) {
            Ok(next) if chart.contains(&next.value[..n]) => state = next,
            _ => {
                left_domain = true;
                break;
            }
        }
        trajectory.push(GeodesicSample {
            t: state.t,
            point: state.value[..n].to_vec(),
            velocity: state.value[n..].to_vec(),
        });
    }
    Ok(GeodesicRay {
        base: x0.to_vec(),
        direction: v.to_vec(),
        trajectory,
        left_domain,
    })
}

/// Unit-speed Levi-Civita geodesic from `x0` with initial velocity `v`, integrated
/// by RK4 up to arc length `length`. A ray that would leave the chart is returned
/// truncated with `left_domain` set.
pub fn geodesic(chart: &ManifoldChart, x0: &[f64], v: &[f64], length: f64, step: f64) -> Result<GeodesicRay> {
    chart.check_point(x0)?;
    let speed = chart.norm(x0, v);
    if (speed - 1.0).abs() > 1e-8 {
        return Err(GeometryError::InvalidInput(format!(
            "geodesic direction must have unit length, got {speed}"
        )));
    }
    integrate_geodesic(chart, x0, v, length, step)
}

/// Scale a coordinate vector at `p` to unit g-length.
pub fn unit_direction(chart: &ManifoldChart, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let s = chart.norm(p, v);
    if s == 0.0 || !s.is_finite() {
        return Err(GeometryError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / s).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShootingOptions {
    pub max_iterations: usize,
    /// Coordinate residual of the endpoint at which the solve is accepted.
    pub tolerance: f64,
    pub steps: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-11,
            steps: 100,
        }
    }
}

fn shoot_endpoint(chart: &ManifoldChart, x0: &[f64], v: &[f64], steps: usize) -> Option<Vec<f64>> {
    let ray = integrate_geodesic(chart, x0, v, 1.0, 1.0 / steps as f64).ok()?;
    (!ray.left_domain).then(|| ray.endpoint().to_vec())
}

fn residual_norm(end: &[f64], target: &[f64]) -> f64 {
    end.iter()
        .zip(target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn endpoint_jacobian(chart: &ManifoldChart, x0: &[f64], v: &[f64], steps: usize) -> Option<DMatrix<f64>> {
    let n = v.len();
    let scale = v.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let h = 1e-7 * scale;
    let mut jac = DMatrix::zeros(n, n);
    for a in 0..n {
        let mut vp = v.to_vec();
        vp[a] += h;
        let mut vm = v.to_vec();
        vm[a] -= h;
        let ep = shoot_endpoint(chart, x0, &vp, steps)?;
        let em = shoot_endpoint(chart, x0, &vm, steps)?;
        for c in 0..n {
            jac[(c, a)] = (ep[c] - em[c]) / (2.0 * h);
        }
    }
    Some(jac)
}

/// Damped Newton on the endpoint map. A supplied Jacobian is reused (chord steps) for as
/// long as it keeps halving the residual.
fn newton_shoot(
    chart: &ManifoldChart,
    x0: &[f64],
    target: &[f64],
    mut v: Vec<f64>,
    jac0: Option<DMatrix<f64>>,
    opts: &ShootingOptions,
) -> std::result::Result<(Vec<f64>, DMatrix<f64>), f64> {
    let n = x0.len();
    let mut end = shoot_endpoint(chart, x0, &v, opts.steps).ok_or(f64::INFINITY)?;
    let mut res = residual_norm(&end, target);
    let mut stale = jac0.is_some();
    let mut jac = match jac0 {
        Some(j) => j,
        None => endpoint_jacobian(chart, x0, &v, opts.steps).ok_or(res)?,
    };
    for _ in 0..opts.max_iterations {
        if res <= opts.tolerance {
            return Ok((v, jac));
        }
        let f = DVector::from_iterator(n, end.iter().zip(target).map(|(e, t)| e - t));
        let delta = jac.clone().lu().solve(&f).ok_or(res)?;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(x, d)| x - t * d).collect();
            if let Some(e) = shoot_endpoint(chart, x0, &trial, opts.steps) {
                let r = residual_norm(&e, target);
                if r < res {
                    improved = !stale || r < 0.5 * res;
                    v = trial;
                    end = e;
                    res = r;
                    break;
                }
            }
            if stale {
                break;
            }
            t *= 0.5;
        }
        if !improved {
            if !stale {
                break;
            }
            stale = false;
            jac = endpoint_jacobian(chart, x0, &v, opts.steps).ok_or(res)?;
        }
    }
    if res <= opts.tolerance {
        Ok((v, jac))
    } else {
        Err(res)
    }
}

/// Initial velocity `v` at `x0` with `exp_{x0}(v) = x`, by damped Newton on the
/// endpoint map started from several initial directions.
pub fn shoot(chart: &ManifoldChart, x0: &[f64], x: &[f64], opts: &ShootingOptions) -> Result<Vec<f64>> {
    Ok(shoot_warm(chart, x0, x, None, opts)?.0)
}

/// As [`shoot`], first trying a previous solution `(v, ∂exp/∂v)` as the starting point.
fn shoot_warm(
    chart: &ManifoldChart,
    x0: &[f64],
    x: &[f64],
    warm: Option<&(Vec<f64>, DMatrix<f64>)>,
    opts: &ShootingOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    chart.check_point(x0)?;
    chart.check_point(x)?;
    let n = x0.len();
    let chord: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    if chord.iter().all(|c| *c == 0.0) {
        return Ok((vec![0.0; n], DMatrix::identity(n, n)));
    }
    let mut best = f64::INFINITY;
    if let Some((v, jac)) = warm {
        match newton_shoot(chart, x0, x, v.clone(), Some(jac.clone()), opts) {
            Ok(out) => return Ok(out),
            Err(r) => best = r,
        }
    }
    let j = chart.acs_at(x0);
    let turned: Vec<f64> = (0..n).map(|a| (0..n).map(|b| j[(a, b)] * chord[b]).sum()).collect();
    let guesses = [
        chord.clone(),
        chord.iter().map(|c| 0.5 * c).collect(),
        chord.iter().zip(&turned).map(|(c, t)| c + 0.2 * t).collect(),
        chord.iter().zip(&turned).map(|(c, t)| c - 0.2 * t).collect(),
    ];
    for g in guesses {
        match newton_shoot(chart, x0, x, g, None, opts) {
            Ok(out) => return Ok(out),
            Err(r) => best = best.min(r),
        }
    }
    Err(GeometryError::ShootingFailed { residual: best })
}

/// Riemannian distance: the chart's closed form when it has one, geodesic shooting otherwise.
pub fn distance(chart: &ManifoldChart, x0: &[f64], x: &[f64]) -> Result<f64> {
    DistanceField::new(chart, x0).eval(x)
}

/// `r(·) = d(x0, ·)` that warm-starts each shooting solve from the previous velocity,
/// which makes finite-difference stencils around one point cheap.
pub struct DistanceField<'a> {
    chart: &'a ManifoldChart,
    base: Vec<f64>,
    last: Mutex<Option<(Vec<f64>, DMatrix<f64>)>>,
}

impl<'a> DistanceField<'a> {
    pub fn new(chart: &'a ManifoldChart, x0: &[f64]) -> Self {
        Self {
            chart,
            base: x0.to_vec(),
            last: Mutex::new(None),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.chart.check_point(&self.base)?;
        self.chart.check_point(x)?;
        if let Some(cf) = self.chart.closed_form_distance() {
            return Ok((cf.distance)(&self.base, x));
        }
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        let solved = shoot_warm(self.chart, &self.base, x, last.as_ref(), &ShootingOptions::default())?;
        let d = self.chart.norm(&self.base, &solved.0);
        *last = Some(solved);
        Ok(d)
    }
}

/// The function `r(·) = d(x0, ·)` with non-finite values where the distance fails.
pub fn distance_function<'a>(chart: &'a ManifoldChart, x0: &[f64]) -> impl Fn(&[f64]) -> f64 + 'a {
    let field = DistanceField::new(chart, x0);
    move |p: &[f64]| field.eval(p).unwrap_or(f64::NAN)
}

/// Smallest admissible gap between `r` and a declared cut radius.
pub const CUT_MARGIN: f64 = 1e-2;

#[derive(Clone, Debug)]
pub struct DistanceHessian {
    pub r: f64,
    pub hessian: ScalarHessian,
}

impl DistanceHessian {
    /// `X = (r_{kl̄})`.
    pub fn complex(&self) -> &HermitianMatrix {
        &self.hessian.complex
    }
}

/// Canonical complex Hessian of `r = d(x0, ·)` at `x`.
pub fn distance_hessian(
    chart: &ManifoldChart,
    x0: &[f64],
    x: &[f64],
    scheme: &DifferentiationScheme,
) -> Result<DistanceHessian> {
    let r = distance(chart, x0, x)?;
    if r < 1e-9 {
        return Err(GeometryError::AtBasePoint);
    }
    if let Some(cut) = chart.closed_form_distance().and_then(|c| c.cut_radius) {
        if cut - r < CUT_MARGIN {
            return Err(GeometryError::NearCutLocus { distance: cut - r });
        }
    }
    let rf = distance_function(chart, x0);
    let hessian = hessian_scalar(chart, &rf, x, ConnectionKind::Canonical, scheme)?;
    if hessian.real.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteState { t: r });
    }
    Ok(DistanceHessian { r, hessian })
}

/// The comparison function `h(r)` and bound `Y(r) = (1/r + √h(r)) I` built from growth constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonProfile {
    pub constants: GrowthConstants,
    pub m: usize,
}

impl ComparisonProfile {
    pub fn new(constants: GrowthConstants, m: usize) -> Self {
        Self { constants, m }
    }

    /// `h(r) = B(1+r)^α + (4√m + 3) A₁² (1+r)^{2β} + 2 A₂ (1+r)^γ`.
    pub fn h(&self, r: f64) -> f64 {
        let c = &self.constants;
        let w = 1.0 + r;
        c.b * w.powf(c.alpha)
            + (4.0 * (self.m as f64).sqrt() + 3.0) * c.a1 * c.a1 * w.powf(2.0 * c.beta)
            + 2.0 * c.a2 * w.powf(c.gamma_exp)
    }

    /// Diagonal entry `1/r + √h(r)` of `Y(r)`.
    pub fn y_value(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(GeometryError::NonpositiveRadius(r));
        }
        Ok(1.0 / r + self.h(r).sqrt())
    }

    pub fn y(&self, r: f64) -> Result<HermitianMatrix> {
        Ok(HermitianMatrix::scaled_identity(self.m, self.y_value(r)?))
    }
}

pub fn comparison_bound(profile: &ComparisonProfile, r: f64) -> Result<HermitianMatrix> {
    profile.y(r)
}

/// Solution of `dX/dr = -X² - AX - XA* + S` sampled on a grid.
#[derive(Clone, Debug)]
pub struct RiccatiFlow {
    pub r: Vec<f64>,
    pub x: Vec<HermitianMatrix>,
    pub a: Vec<DMatrix<C64>>,
    pub s: Vec<DMatrix<C64>>,
}

impl RiccatiFlow {
    pub fn last(&self) -> &HermitianMatrix {
        self.x.last().expect("flow holds the initial value")
    }
}

/// Largest blow-up norm tolerated before the flow is declared singular.
pub const BLOW_UP_NORM: f64 = 1e8;

const SUBSTEP_SCALE: f64 = 0.01;

fn riccati_rhs(x: &DMatrix<C64>, a: &DMatrix<C64>, s: &DMatrix<C64>) -> DMatrix<C64> {
    -(x * x) - a * x - x * a.adjoint() + s
}

fn symmetrize(x: DMatrix<C64>) -> DMatrix<C64> {
    let xa = x.adjoint();
    (x + xa) * C64::new(0.5, 0.0)
}

/// RK4 for the matrix Riccati equation from `r0` to `r_end`. Each grid step is split
/// into substeps no longer than `SUBSTEP_SCALE / ‖X‖` so that a blow-up is caught before it is
/// stepped over; `X` is symmetrised after every substep.
pub fn riccati_integrate(
    a: &dyn Fn(f64) -> DMatrix<C64>,
    s: &dyn Fn(f64) -> DMatrix<C64>,
    r0: f64,
    x0: &HermitianMatrix,
    r_end: f64,
    step: f64,
) -> Result<RiccatiFlow> {
    if !(r0 > 0.0) {
        return Err(GeometryError::NonpositiveRadius(r0));
    }
    if !(step > 0.0) || r_end < r0 {
        return Err(GeometryError::InvalidInput(format!(
            "Riccati integration needs step > 0 and r_end >= r0, got step {step}, [{r0}, {r_end}]"
        )));
    }
    let dim = x0.dim();
    for (name, mat) in [("A", a(r0)), ("S", s(r0))] {
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(GeometryError::InvalidInput(format!("{name}(r) must be {dim}x{dim}")));
        }
    }
    let mut flow = RiccatiFlow {
        r: vec![r0],
        x: vec![x0.clone()],
        a: vec![a(r0)],
        s: vec![s(r0)],
    };
    let mut r = r0;
    let mut x = x0.matrix().clone();
    let steps = ((r_end - r0) / step).ceil() as usize;
    for k in 0..steps {
        let target = if k + 1 == steps {
            r_end
        } else {
            r0 + (k + 1) as f64 * step
        };
        while target - r > 1e-14 * step {
            let norm = x.norm();
            let h = (target - r).min(SUBSTEP_SCALE / norm.max(1e-300));
            let (am, sm) = (a(r + 0.5 * h), s(r + 0.5 * h));
            let k1 = riccati_rhs(&x, &a(r), &s(r));
            let x2 = &x + &k1 * C64::new(0.5 * h, 0.0);
            let k2 = riccati_rhs(&x2, &am, &sm);
            let x3 = &x + &k2 * C64::new(0.5 * h, 0.0);
            let k3 = riccati_rhs(&x3, &am, &sm);
            let x4 = &x + &k3 * C64::new(h, 0.0);
            let k4 = riccati_rhs(&x4, &a(r + h), &s(r + h));
            let incr = (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
            x = symmetrize(x + incr);
            r += h;
            let norm = x.norm();
            if !norm.is_finite() || norm > BLOW_UP_NORM {
                return Err(GeometryError::BlowUp { r, norm });
            }
        }
        r = target;
        flow.r.push(r);
        flow.x.push(HermitianMatrix::from_hermitian_part(x.clone()));
        flow.a.push(a(r));
        flow.s.push(s(r));
    }
    Ok(flow)
}

/// One row of a Hessian comparison sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub ray_id: usize,
    pub r: f64,
    pub point: Vec<f64>,
    pub x_min_eig: f64,
    pub x_max_eig: f64,
    pub y_value: f64,
    /// Smallest eigenvalue of `Y(r) - scale·X(r)`.
    pub gap: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// Factor applied to the distance Hessian before comparing with `Y(r)`.
    pub scale: f64,
    pub tolerance: f64,
    pub rows: Vec<ComparisonRow>,
    pub all_hold: bool,
}

impl ComparisonReport {
    pub fn min_gap(&self) -> f64 {
        self.rows.iter().fold(f64::INFINITY, |acc, r| acc.min(r.gap))
    }

    /// CSV with columns `ray_id, r, x_min_eig, x_max_eig, y_value, gap, holds`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| GeometryError::InvalidInput(format!("CSV output failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ray_id", "r", "x_min_eig", "x_max_eig", "y_value", "gap", "holds"])
            .map_err(io)?;
        for row in &self.rows {
            w.write_record([
                row.ray_id.to_string(),
                fmt_f64(row.r),
                fmt_f64(row.x_min_eig),
                fmt_f64(row.x_max_eig),
                fmt_f64(row.y_value),
                fmt_f64(row.gap),
                row.holds.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| GeometryError::InvalidInput(format!("CSV output failed: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonOptions {
    /// The module's Hessian already uses the frame normalisation of `Y(r)`, so 1.
    pub scale: f64,
    pub tolerance: f64,
    /// RK4 step for the geodesic rays.
    pub step: f64,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            tolerance: 1e-3,
            step: 1e-3,
        }
    }
}

/// Compare `scale·X(r)` with `Y(r)` at the points at arc length `r` along unit rays from `x0`.
pub fn hessian_comparison_check(
    chart: &ManifoldChart,
    profile: &ComparisonProfile,
    x0: &[f64],
    rays: &[Vec<f64>],
    radii: &[f64],
    opts: &ComparisonOptions,
    scheme: &DifferentiationScheme,
) -> Result<ComparisonReport> {
    let mut rows = Vec::with_capacity(rays.len() * radii.len());
    for (ray_id, v) in rays.iter().enumerate() {
        let v = unit_direction(chart, x0, v)?;
        for &r in radii {
            let y = profile.y(r)?;
            let ray = geodesic(chart, x0, &v, r, opts.step)?;
            if ray.left_domain {
                return Err(GeometryError::SampleOutOfDomain {
                    point: ray.endpoint().to_vec(),
                });
            }
            let p = ray.endpoint().to_vec();
            let dh = distance_hessian(chart, x0, &p, scheme)?;
            let x = dh.complex().scale(opts.scale);
            let eig = x.eigen();
            let cmp = psd_order(&x, &y, opts.tolerance)?;
            rows.push(ComparisonRow {
                ray_id,
                r,
                point: p,
                x_min_eig: *eig.values.last().expect("non-empty"),
                x_max_eig: eig.values[0],
                y_value: profile.y_value(r)?,
                gap: cmp.min_gap,
                holds: cmp.holds,
            });
        }
    }
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(ComparisonReport {
        scale: opts.scale,
        tolerance: opts.tolerance,
        rows,
        all_hold,
    })
}
