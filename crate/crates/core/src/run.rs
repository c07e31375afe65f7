//! Command pipelines behind the `ahm` binary.

use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{catalog, sample_points, CatalogEntry, CatalogFlags, KnownCurvature};
use crate::config::{resolve_manifold, Command, RunConfig, Tolerances};
use crate::curvature::PointGeometry;
use crate::distance::{hessian_comparison_check, ComparisonOptions, ComparisonProfile, ComparisonReport};
use crate::error::GeometryError;
use crate::exhaustion::{build_tamed, certify};
use crate::growth::{extract_growth_constants, GrowthConstants, GrowthExponents};
use crate::identities::{curvature_symmetries, laplacian_gap_with, lc_relation_residual, torsion_curvature_identities};
use crate::manifold::nijenhuis_in_frame;
use crate::maps::{
    blaschke, complex_map, map_by_name, random_blaschke_data, schwarz_check, AlmostHolomorphicMap, SchwarzReport,
};
use crate::numeric::{DifferentiationScheme, SphereSearch};
use crate::output::to_json;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] GeometryError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

/// Artifacts of one command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub verdict: bool,
    pub json: String,
    pub csv: Option<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.verdict {
            0
        } else {
            1
        }
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    passed: bool,
    #[serde(flatten)]
    result: &'a T,
}

fn artifact<T: Serialize>(config: &RunConfig, verdict: bool, result: &T) -> Result<String, RunError> {
    let timestamp = if config.no_timestamp {
        None
    } else {
        Some(
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        )
    };
    Ok(to_json(&Artifact {
        command: config.command.as_str(),
        seed: config.seed,
        timestamp,
        passed: verdict,
        result,
    })?)
}

fn scheme(config: &RunConfig) -> Result<DifferentiationScheme, RunError> {
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(RunError::Config(format!("step must be positive, got {}", config.step)));
    }
    Ok(DifferentiationScheme::default().with_step(config.step))
}

fn manifold(spec: &Option<String>, flag: &str) -> Result<CatalogEntry, RunError> {
    let name = spec
        .as_deref()
        .ok_or_else(|| RunError::Config(format!("--{flag} is required")))?;
    resolve_manifold(name).map_err(RunError::Config)
}

fn manifolds(config: &RunConfig) -> Result<Vec<CatalogEntry>, RunError> {
    match &config.manifold {
        Some(_) => Ok(vec![manifold(&config.manifold, "manifold")?]),
        None => Ok(catalog()),
    }
}

/// Executes the pipeline for `config.command` and writes the requested files.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let outcome = match config.command {
        Command::Verify => run_verify(config)?,
        Command::Report => run_report(config)?,
        Command::Schwarz => run_schwarz(config)?,
        Command::HessianCompare => run_hessian_compare(config)?,
        Command::ExhaustionCertify => run_certify(config)?,
    };
    if let Some(path) = &config.output {
        std::fs::write(path, &outcome.json)
            .map_err(|e| RunError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    if let (Some(path), Some(csv)) = (&config.csv, &outcome.csv) {
        std::fs::write(path, csv).map_err(|e| RunError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(outcome)
}

/// Smooth non-radial test function for the Laplacian gap.
fn probe_function(x: &[f64]) -> f64 {
    let n = x.len();
    x.iter()
        .enumerate()
        .map(|(a, v)| (0.7 * v + 0.3 * a as f64).sin())
        .sum::<f64>()
        + 0.5 * x[0] * x[n - 1]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PointResiduals {
    pub curvature_symmetry: f64,
    pub torsion_curvature: f64,
    pub lc_relation: f64,
    pub laplacian_gap: f64,
    pub mixed_torsion: f64,
    pub connection_difference: f64,
    pub torsion_max: f64,
    pub nijenhuis: f64,
    pub nijenhuis_norm: f64,
}

impl PointResiduals {
    fn max(self, o: Self) -> Self {
        Self {
            curvature_symmetry: self.curvature_symmetry.max(o.curvature_symmetry),
            torsion_curvature: self.torsion_curvature.max(o.torsion_curvature),
            lc_relation: self.lc_relation.max(o.lc_relation),
            laplacian_gap: self.laplacian_gap.max(o.laplacian_gap),
            mixed_torsion: self.mixed_torsion.max(o.mixed_torsion),
            connection_difference: self.connection_difference.max(o.connection_difference),
            torsion_max: self.torsion_max.max(o.torsion_max),
            nijenhuis: self.nijenhuis.max(o.nijenhuis),
            nijenhuis_norm: self.nijenhuis_norm.max(o.nijenhuis_norm),
        }
    }
}

/// Every identity residual at one point.
pub fn point_residuals(
    entry: &CatalogEntry,
    p: &[f64],
    scheme: &DifferentiationScheme,
) -> crate::Result<PointResiduals> {
    let chart = &entry.chart;
    let geom = PointGeometry::compute(chart, p, scheme)?;
    let sym = curvature_symmetries(&geom);
    let tc = torsion_curvature_identities(&geom);
    let gap = laplacian_gap_with(
        chart,
        &probe_function,
        p,
        scheme,
        &geom.jet,
        &geom.canonical.gamma,
        &geom.torsion,
        &geom.frame,
    )?;
    let nij = nijenhuis_in_frame(chart, p, scheme, &geom.frame)?;
    let m = geom.m;
    let mut nij_res = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                nij_res = nij_res.max((geom.torsion.t02(i, j, k) - nij.get(i, j, k)).norm());
            }
        }
    }
    Ok(PointResiduals {
        curvature_symmetry: sym.conjugation.max(sym.antisymmetry).max(sym.trace),
        torsion_curvature: tc.residual(),
        lc_relation: lc_relation_residual(&geom.jet.g, &geom.canonical, &geom.levi_civita),
        laplacian_gap: gap.residual(),
        mixed_torsion: geom.torsion.t11_residual,
        connection_difference: geom.canonical.max_abs_diff(&geom.levi_civita),
        torsion_max: geom.torsion.max_abs(),
        nijenhuis: nij_res,
        nijenhuis_norm: nij.norm(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyEntry {
    pub manifold: String,
    pub points: usize,
    pub kahler: bool,
    pub worst: PointResiduals,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifySummary {
    pub tolerances: Tolerances,
    pub entries: Vec<VerifyEntry>,
}

pub fn verify_entry(
    entry: &CatalogEntry,
    points: &[Vec<f64>],
    tol: &Tolerances,
    scheme: &DifferentiationScheme,
) -> crate::Result<VerifyEntry> {
    let per_point: crate::Result<Vec<PointResiduals>> =
        points.par_iter().map(|p| point_residuals(entry, p, scheme)).collect();
    let worst = per_point?
        .into_iter()
        .fold(PointResiduals::default(), PointResiduals::max);
    let mut pass = worst.curvature_symmetry <= tol.curvature_symmetry
        && worst.torsion_curvature <= tol.torsion_curvature
        && worst.lc_relation <= tol.lc_relation
        && worst.laplacian_gap <= tol.laplacian_gap
        && worst.mixed_torsion <= tol.mixed_torsion
        && worst.nijenhuis <= tol.nijenhuis;
    if entry.flags.kahler {
        pass &= worst.connection_difference <= tol.kahler && worst.torsion_max <= tol.mixed_torsion;
    }
    Ok(VerifyEntry {
        manifold: entry.name.clone(),
        points: points.len(),
        kahler: entry.flags.kahler,
        worst,
        pass,
    })
}

fn run_verify(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let scheme = scheme(config)?;
    let n = config.samples.unwrap_or(20);
    let mut entries = Vec::new();
    for e in manifolds(config)? {
        let pts = sample_points(&e, n, config.seed);
        entries.push(verify_entry(&e, &pts, &config.tolerances, &scheme)?);
    }
    let verdict = entries.iter().all(|e| e.pass);
    let summary = VerifySummary {
        tolerances: config.tolerances,
        entries,
    };
    Ok(RunOutcome {
        verdict,
        json: artifact(config, verdict, &summary)?,
        csv: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldReport {
    pub manifold: String,
    pub complex_dim: usize,
    pub flags: CatalogFlags,
    pub known: Option<KnownCurvature>,
    pub hsc_min: f64,
    pub hsc_max: f64,
    pub hbc_min: f64,
    pub torsion_max: f64,
    pub mixed_curvature_max: f64,
    pub nijenhuis_norm_max: f64,
    pub constants: GrowthConstants,
    pub known_hsc_matches: Option<bool>,
}

pub fn manifold_report(
    entry: &CatalogEntry,
    points: &[Vec<f64>],
    tol: &Tolerances,
    scheme: &DifferentiationScheme,
) -> crate::Result<ManifoldReport> {
    let chart = &entry.chart;
    let base = chart.center();
    let constants = extract_growth_constants(
        chart,
        &base,
        points,
        GrowthExponents::BOUNDED,
        &SphereSearch::default(),
        scheme,
    )?;
    let nij: crate::Result<Vec<f64>> = points
        .par_iter()
        .map(|p| Ok(crate::manifold::nijenhuis(chart, p, scheme)?.norm()))
        .collect();
    let ext = &constants.extrema;
    let fold = |f: &dyn Fn(&crate::growth::SampleExtrema) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        ext.iter().fold(init, |acc, s| pick(acc, f(s)))
    };
    let hsc_min = fold(&|s| s.hsc_min, f64::INFINITY, f64::min);
    let hsc_max = fold(&|s| s.hsc_max, f64::NEG_INFINITY, f64::max);
    let known_hsc_matches = entry
        .known
        .map(|k| (hsc_min - k.hsc).abs() <= tol.known_hsc && (hsc_max - k.hsc).abs() <= tol.known_hsc);
    Ok(ManifoldReport {
        manifold: entry.name.clone(),
        complex_dim: chart.complex_dim(),
        flags: entry.flags.clone(),
        known: entry.known,
        hsc_min,
        hsc_max,
        hbc_min: fold(&|s| s.hbc_min, f64::INFINITY, f64::min),
        torsion_max: fold(&|s| s.torsion_max, 0.0, f64::max),
        mixed_curvature_max: fold(&|s| s.mixed_max, 0.0, f64::max),
        nijenhuis_norm_max: nij?.into_iter().fold(0.0, f64::max),
        constants,
        known_hsc_matches,
    })
}

#[derive(Serialize)]
struct ReportList {
    manifolds: Vec<ManifoldReport>,
}

fn run_report(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let scheme = scheme(config)?;
    let n = config.samples.unwrap_or(5);
    let mut manifolds_out = Vec::new();
    for e in manifolds(config)? {
        let pts = sample_points(&e, n, config.seed);
        manifolds_out.push(manifold_report(&e, &pts, &config.tolerances, &scheme)?);
    }
    let verdict = manifolds_out.iter().all(|r| r.known_hsc_matches != Some(false));
    let list = ReportList {
        manifolds: manifolds_out,
    };
    Ok(RunOutcome {
        verdict,
        json: artifact(config, verdict, &list)?,
        csv: None,
    })
}

/// Fitted `k₁` of `source` and `k₂` of `target` from `count` seeded samples each.
pub fn auto_bounds(
    source: &CatalogEntry,
    target: &CatalogEntry,
    count: usize,
    seed: u64,
    scheme: &DifferentiationScheme,
) -> crate::Result<(f64, f64)> {
    let fit = |e: &CatalogEntry| {
        let mut pts = vec![e.chart.center()];
        pts.extend(sample_points(e, count, seed));
        extract_growth_constants(
            &e.chart,
            &e.chart.center(),
            &pts,
            GrowthExponents::BOUNDED,
            &SphereSearch::default(),
            scheme,
        )
    };
    Ok((fit(source)?.k1, fit(target)?.k2))
}

fn resolve_map(
    config: &RunConfig,
    source: &CatalogEntry,
    target: &CatalogEntry,
) -> Result<AlmostHolomorphicMap, RunError> {
    let name = config.map.as_deref().unwrap_or("identity");
    if name == "random_blaschke" {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (zeros, rot) = random_blaschke_data(&mut rng);
        return complex_map(name, &source.chart, &target.chart, blaschke(zeros, rot), true)
            .map_err(|e| RunError::Config(e.to_string()));
    }
    map_by_name(name, &source.chart, &target.chart).map_err(|e| RunError::Config(e.to_string()))
}

fn run_schwarz(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let scheme = scheme(config)?;
    let source = manifold(&config.source, "source")?;
    let target = manifold(&config.target, "target")?;
    let map = resolve_map(config, &source, &target)?;
    let (k1, k2) = if config.auto_bounds {
        auto_bounds(&source, &target, 8, config.seed, &scheme)?
    } else {
        match (config.k1, config.k2) {
            (Some(k1), Some(k2)) => (k1, k2),
            _ => {
                return Err(RunError::Config(
                    "--k1 and --k2 are required unless --auto-bounds is set".into(),
                ))
            }
        }
    };
    if !(k2 > 0.0) {
        return Err(RunError::Config(format!("k2 must be positive, got {k2}")));
    }
    let n = config.samples.unwrap_or(20).max(1);
    let mut pts = vec![source.chart.center()];
    pts.extend(sample_points(&source, n - 1, config.seed));
    let report: SchwarzReport = schwarz_check(&map, k1, k2, &pts, &scheme)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    Ok(RunOutcome {
        verdict: report.verdict,
        json: artifact(config, report.verdict, &report)?,
        csv: Some(String::from_utf8(csv).expect("CSV is UTF-8")),
    })
}

fn constants_for(
    config: &RunConfig,
    e: &CatalogEntry,
    scheme: &DifferentiationScheme,
) -> crate::Result<GrowthConstants> {
    match &config.growth {
        Some(g) => Ok(g.constants()),
        None => {
            let mut pts = vec![e.chart.center()];
            pts.extend(sample_points(e, 8, config.seed));
            extract_growth_constants(
                &e.chart,
                &e.chart.center(),
                &pts,
                GrowthExponents::BOUNDED,
                &SphereSearch::default(),
                scheme,
            )
        }
    }
}

/// Seeded unit-length coordinate directions.
pub fn random_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.1 && norm <= 1.0 {
                break v.iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ComparisonArtifact<'a> {
    manifold: &'a str,
    constants: &'a GrowthConstants,
    #[serde(flatten)]
    report: &'a ComparisonReport,
    min_gap: f64,
}

fn run_hessian_compare(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let scheme = scheme(config)?;
    let e = manifold(&config.manifold, "manifold")?;
    let constants = constants_for(config, &e, &scheme)?;
    let profile = ComparisonProfile::new(constants.clone(), e.chart.complex_dim());
    let rays = random_directions(e.chart.real_dim(), config.samples.unwrap_or(5).max(1), config.seed);
    let radii = config.radii.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0]);
    let opts = ComparisonOptions {
        tolerance: config.tolerances.comparison,
        ..ComparisonOptions::default()
    };
    let base = e.chart.center();
    let report = hessian_comparison_check(&e.chart, &profile, &base, &rays, &radii, &opts, &scheme)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let out = ComparisonArtifact {
        manifold: &e.name,
        constants: &constants,
        report: &report,
        min_gap: report.min_gap(),
    };
    Ok(RunOutcome {
        verdict: report.all_hold,
        json: artifact(config, report.all_hold, &out)?,
        csv: Some(String::from_utf8(csv).expect("CSV is UTF-8")),
    })
}

fn run_certify(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let scheme = scheme(config)?;
    let e = manifold(&config.manifold, "manifold")?;
    let constants = constants_for(config, &e, &scheme)?;
    let exh = build_tamed(&e.chart, &e.chart.center(), &constants)?;
    let pts = sample_points(&e, config.samples.unwrap_or(200).max(1), config.seed);
    let chunks: crate::Result<Vec<_>> = pts
        .par_chunks(16)
        .map(|c| certify(&exh, &e.chart, c, &scheme))
        .collect();
    let mut chunks = chunks?.into_iter();
    let mut cert = chunks.next().expect("at least one sample");
    for c in chunks {
        cert.global_pass &= c.global_pass;
        cert.samples.extend(c.samples);
    }
    Ok(RunOutcome {
        verdict: cert.global_pass,
        json: artifact(config, cert.global_pass, &cert)?,
        csv: None,
    })
}
