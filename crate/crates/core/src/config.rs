//! Run configuration and chart definition files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::catalog::{entry, CatalogEntry, CatalogFlags, CATALOG_NAMES};
use crate::growth::{GrowthConstants, GrowthExponents};
use crate::manifold::{standard_acs, Domain, ManifoldChart, MatrixField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Report,
    Schwarz,
    HessianCompare,
    ExhaustionCertify,
    #[default]
    Verify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Report => "report",
            Command::Schwarz => "schwarz",
            Command::HessianCompare => "hessian-compare",
            Command::ExhaustionCertify => "exhaustion-certify",
            Command::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub curvature_symmetry: f64,
    pub torsion_curvature: f64,
    pub lc_relation: f64,
    pub laplacian_gap: f64,
    pub mixed_torsion: f64,
    pub kahler: f64,
    pub nijenhuis: f64,
    pub comparison: f64,
    pub known_hsc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            curvature_symmetry: 1e-5,
            torsion_curvature: 1e-4,
            lc_relation: 1e-5,
            laplacian_gap: 1e-5,
            mixed_torsion: 1e-6,
            kahler: 1e-5,
            nijenhuis: 1e-4,
            comparison: 1e-3,
            known_hsc: 1e-3,
        }
    }
}

/// Growth constants supplied by hand instead of fitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSpec {
    pub b: f64,
    pub a1: f64,
    pub a2: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl GrowthSpec {
    pub fn constants(&self) -> GrowthConstants {
        GrowthConstants::manual(
            self.b,
            self.a1,
            self.a2,
            GrowthExponents {
                alpha: self.alpha,
                beta: self.beta,
                gamma: self.gamma,
            },
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Catalog name or path to a chart definition file; `None` means every catalog entry
    /// where the command allows it.
    pub manifold: Option<String>,
    pub source: Option<String>,
    pub target: Option<String>,
    pub map: Option<String>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub auto_bounds: bool,
    pub samples: Option<usize>,
    pub seed: u64,
    pub step: f64,
    pub radii: Option<Vec<f64>>,
    pub growth: Option<GrowthSpec>,
    pub tolerances: Tolerances,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub no_timestamp: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Verify,
            manifold: None,
            source: None,
            target: None,
            map: None,
            k1: None,
            k2: None,
            auto_bounds: false,
            samples: None,
            seed: 0,
            step: 1e-4,
            radii: None,
            growth: None,
            tolerances: Tolerances::default(),
            output: None,
            csv: None,
            no_timestamp: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("invalid run configuration: {e}"))
    }

    pub fn load(path: &Path) -> std::result::Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text)
    }
}

/// `{"m": 1, "box": [[-1, 1], [-1, 1]], "metric": "poincare_disc_k1", "acs": "standard"}`.
///
/// `metric` and `acs` name a catalog entry whose field is reused; `"euclidean"` and
/// `"standard"` give the flat metric and the block complex structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDefinition {
    #[serde(default)]
    pub name: Option<String>,
    pub m: usize,
    #[serde(rename = "box")]
    pub bounds: Vec<(f64, f64)>,
    pub metric: String,
    pub acs: String,
    #[serde(default)]
    pub domain: Option<Domain>,
}

impl ChartDefinition {
    fn field(&self, key: &str, which: &str) -> std::result::Result<MatrixField, String> {
        let n = 2 * self.m;
        match key {
            "euclidean" if which == "metric" => Ok(Arc::new(move |_: &[f64]| DMatrix::identity(n, n))),
            "standard" if which == "acs" => {
                let j = standard_acs(self.m);
                Ok(Arc::new(move |_: &[f64]| j.clone()))
            }
            name if CATALOG_NAMES.contains(&name) => {
                let chart = entry(name).map_err(|e| e.to_string())?.chart;
                if chart.complex_dim() != self.m {
                    return Err(format!(
                        "{which} `{name}` has complex dimension {}, chart declares {}",
                        chart.complex_dim(),
                        self.m
                    ));
                }
                Ok(if which == "metric" {
                    chart.metric_field().clone()
                } else {
                    chart.acs_field().clone()
                })
            }
            other => Err(format!("unknown {which} `{other}`")),
        }
    }

    pub fn to_entry(&self) -> std::result::Result<CatalogEntry, String> {
        let metric = self.field(&self.metric, "metric")?;
        let acs = self.field(&self.acs, "acs")?;
        let name = self.name.clone().unwrap_or_else(|| "custom".into());
        let mut chart =
            ManifoldChart::new(name.clone(), self.m, self.bounds.clone(), metric, acs).map_err(|e| e.to_string())?;
        if let Some(d) = self.domain {
            chart = chart.with_domain(d);
        }
        let half_width = self
            .bounds
            .iter()
            .fold(f64::INFINITY, |acc, (lo, hi)| acc.min(0.5 * (hi - lo)));
        let sample_radius = match self.domain {
            Some(Domain::Ball { radius }) | Some(Domain::Polydisc { radius }) => radius.min(half_width),
            _ => half_width,
        } * 0.5;
        Ok(CatalogEntry {
            name,
            chart,
            flags: CatalogFlags {
                integrable: false,
                kahler: false,
                closed_form_distance: false,
                cut_points: None,
            },
            known: None,
            sample_radius,
        })
    }
}

/// A catalog name, or a path to a chart definition file.
pub fn resolve_manifold(name: &str) -> std::result::Result<CatalogEntry, String> {
    if CATALOG_NAMES.contains(&name) {
        return entry(name).map_err(|e| e.to_string());
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(format!(
            "`{name}` is neither a catalog entry nor a chart definition file"
        ));
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {name}: {e}"))?;
    let def: ChartDefinition =
        serde_json::from_str(&text).map_err(|e| format!("invalid chart definition {name}: {e}"))?;
    def.to_entry()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let c = RunConfig::from_json(r#"{"command": "hessian-compare", "manifold": "flat_c1", "seed": 7}"#).unwrap();
        assert_eq!(c.command, Command::HessianCompare);
        assert_eq!(c.seed, 7);
        assert_eq!(c.tolerances, Tolerances::default());
        assert!(RunConfig::from_json(r#"{"comand": "verify"}"#).is_err());
    }

    #[test]
    fn chart_definition_reuses_catalog_fields() {
        let def: ChartDefinition = serde_json::from_str(
            r#"{"m": 1, "box": [[-0.9, 0.9], [-0.9, 0.9]], "metric": "poincare_disc_k1", "acs": "standard"}"#,
        )
        .unwrap();
        let e = def.to_entry().unwrap();
        let disc = entry("poincare_disc_k1").unwrap().chart;
        assert_eq!(e.chart.metric_at(&[0.2, 0.1]), disc.metric_at(&[0.2, 0.1]));
        let bad: ChartDefinition = serde_json::from_str(
            r#"{"m": 2, "box": [[-1, 1], [-1, 1], [-1, 1], [-1, 1]], "metric": "flat_c1", "acs": "standard"}"#,
        )
        .unwrap();
        assert!(bad.to_entry().is_err());
    }
}
