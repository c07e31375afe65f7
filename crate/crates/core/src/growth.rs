//! Curvature and torsion growth constants fitted over a sample region.

use serde::{Deserialize, Serialize};

use crate::curvature::{bisectional_form, hsc, mixed_curvature_term, PointGeometry};
use crate::distance::distance;
use crate::error::{GeometryError, Result};
use crate::manifold::ManifoldChart;
use crate::numeric::{DifferentiationScheme, SphereSearch};

/// Lower clamp applied to `B`, `A₁`, `A₂`.
pub const GROWTH_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthExponents {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl GrowthExponents {
    pub const BOUNDED: GrowthExponents = GrowthExponents {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };
    /// `α = γ = 2`, `β = 1`.
    pub const QUADRATIC: GrowthExponents = GrowthExponents {
        alpha: 2.0,
        beta: 1.0,
        gamma: 2.0,
    };
}

impl Default for GrowthExponents {
    fn default() -> Self {
        Self::BOUNDED
    }
}

/// Where a set of constants was fitted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitRegion {
    pub base: Vec<f64>,
    pub samples: usize,
    pub max_radius: f64,
    pub search: SphereSearch,
}

/// Per-sample extrema found by the sphere search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleExtrema {
    pub point: Vec<f64>,
    pub r: f64,
    pub hbc_min: f64,
    pub torsion_max: f64,
    pub mixed_max: f64,
    pub hsc_min: f64,
    pub hsc_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthConstants {
    pub b: f64,
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_exp: f64,
    /// `max(0, -inf HSC)` over the samples.
    pub k1: f64,
    /// `-sup HSC` over the samples.
    pub k2: f64,
    pub fit_region: Option<FitRegion>,
    pub extrema: Vec<SampleExtrema>,
}

impl GrowthConstants {
    /// Constants given by hand; each of `b`, `a1`, `a2` is clamped at [`GROWTH_FLOOR`].
    pub fn manual(b: f64, a1: f64, a2: f64, exponents: GrowthExponents) -> Self {
        Self {
            b: b.max(GROWTH_FLOOR),
            a1: a1.max(GROWTH_FLOOR),
            a2: a2.max(GROWTH_FLOOR),
            alpha: exponents.alpha,
            beta: exponents.beta,
            gamma_exp: exponents.gamma,
            k1: 0.0,
            k2: 0.0,
            fit_region: None,
            extrema: Vec::new(),
        }
    }

    pub fn exponents(&self) -> GrowthExponents {
        GrowthExponents {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma_exp,
        }
    }

    /// Smallest slack of the three growth inequalities over the recorded samples.
    pub fn min_slack(&self) -> f64 {
        self.extrema.iter().fold(f64::INFINITY, |acc, s| {
            let w = 1.0 + s.r;
            let hb = s.hbc_min + self.b * w.powf(self.alpha);
            let tor = self.a1 * w.powf(self.beta) - s.torsion_max;
            let mix = self.a2 * w.powf(self.gamma_exp) - s.mixed_max;
            acc.min(hb).min(tor).min(mix)
        })
    }
}

/// Extrema of the curvature and torsion forms at one point.
pub fn sample_extrema(geom: &PointGeometry, r: f64, search: &SphereSearch) -> Result<SampleExtrema> {
    let m = geom.m;
    let curv = &geom.curvature;
    let tor = &geom.torsion;
    let hbc_min = search.minimize(&[m, m], |v| bisectional_form(curv, &v[0], &v[1])).value;
    let torsion_max = search.maximize(&[m, m], |v| tor.value_norm(&v[0], &v[1])).value;
    let mixed_max = search
        .maximize(&[m, m], |v| mixed_curvature_term(curv, &v[0], &v[1]).norm())
        .value;
    let hsc_of = |v: &[Vec<_>]| hsc(curv, &v[0]).unwrap_or(f64::NAN);
    let hsc_min = search.minimize(&[m], hsc_of).value;
    let hsc_max = search.maximize(&[m], hsc_of).value;
    Ok(SampleExtrema {
        point: geom.point.clone(),
        r,
        hbc_min,
        torsion_max,
        mixed_max,
        hsc_min,
        hsc_max,
    })
}

/// Fits `B, A₁, A₂, k₁, k₂` so that on every sample
/// `HBC ≥ -B(1+r)^α`, `‖τ(X,Y)‖ ≤ A₁(1+r)^β` and `|R(X̄,Y,Y,X)| ≤ A₂(1+r)^γ`.
pub fn extract_growth_constants(
    chart: &ManifoldChart,
    base: &[f64],
    samples: &[Vec<f64>],
    exponents: GrowthExponents,
    search: &SphereSearch,
    scheme: &DifferentiationScheme,
) -> Result<GrowthConstants> {
    if samples.is_empty() {
        return Err(GeometryError::EmptySampleSet);
    }
    chart.check_point(base)?;
    let mut extrema = Vec::with_capacity(samples.len());
    for p in samples {
        let r = distance(chart, base, p)?;
        let geom = PointGeometry::compute(chart, p, scheme)?;
        extrema.push(sample_extrema(&geom, r, search)?);
    }
    let mut out = GrowthConstants::manual(0.0, 0.0, 0.0, exponents);
    let mut hsc_min = f64::INFINITY;
    let mut hsc_max = f64::NEG_INFINITY;
    let mut max_radius = 0.0f64;
    for s in &extrema {
        let w = 1.0 + s.r;
        out.b = out.b.max(-s.hbc_min / w.powf(exponents.alpha));
        out.a1 = out.a1.max(s.torsion_max / w.powf(exponents.beta));
        out.a2 = out.a2.max(s.mixed_max / w.powf(exponents.gamma));
        hsc_min = hsc_min.min(s.hsc_min);
        hsc_max = hsc_max.max(s.hsc_max);
        max_radius = max_radius.max(s.r);
    }
    out.k1 = (-hsc_min).max(0.0);
    out.k2 = -hsc_max;
    out.fit_region = Some(FitRegion {
        base: base.to_vec(),
        samples: samples.len(),
        max_radius,
        search: *search,
    });
    out.extrema = extrema;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{entry, sample_points};

    #[test]
    fn disc_constants() {
        let e = entry("poincare_disc_k1").unwrap();
        let pts = sample_points(&e, 4, 3);
        let c = extract_growth_constants(
            &e.chart,
            &[0.0, 0.0],
            &pts,
            GrowthExponents::BOUNDED,
            &SphereSearch::default(),
            &DifferentiationScheme::default(),
        )
        .unwrap();
        assert!((c.b - 1.0).abs() < 1e-3, "{}", c.b);
        assert!((c.k1 - 1.0).abs() < 1e-3 && (c.k2 - 1.0).abs() < 1e-3);
        assert_eq!(c.a1, GROWTH_FLOOR);
        assert!(c.min_slack() >= 0.0);
    }

    #[test]
    fn empty_samples_rejected() {
        let e = entry("flat_c1").unwrap();
        let r = extract_growth_constants(
            &e.chart,
            &[0.0, 0.0],
            &[],
            GrowthExponents::BOUNDED,
            &SphereSearch::default(),
            &DifferentiationScheme::default(),
        );
        assert_eq!(r.unwrap_err(), GeometryError::EmptySampleSet);
    }
}
