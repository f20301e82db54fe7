//! Metric construction from an image and a flat parameter set, shared by
//! the command-line tool and the HTTP service.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, MetricError};
use crate::features::{
    alignment_vector, edge_potential, gradient_magnitude, orientation_score_edge, orientation_score_tube,
    remap_bounded, ColorMode, ImageBuffer, OrientationScore, PotentialKind,
};
use crate::metrics::{check_positive_definiteness, DataForm, LiftedMetric3, Metric2};
use crate::grid::LiftedGrid3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    /// Edge potential `P‖u‖`.
    Iso,
    RiemAlign,
    RandersAlign,
    Elastica,
}

impl FromStr for MetricName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iso" | "isotropic" => Ok(Self::Iso),
            "riem-align" => Ok(Self::RiemAlign),
            "randers-align" => Ok(Self::RandersAlign),
            "elastica" => Ok(Self::Elastica),
            other => Err(format!("unknown metric '{other}'")),
        }
    }
}

/// Orientation score driving the elastica cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    #[default]
    None,
    /// Edge score turned a quarter so it peaks along the edge tangent.
    Edge,
    /// Tube score for dark curvilinear structures.
    Tube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub sigma: f64,
    pub beta: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub n_theta: usize,
    pub score: ScoreSource,
    pub radii: Vec<f64>,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            beta: 10.0,
            lambda: crate::metrics::DEFAULT_LAMBDA,
            alpha: crate::metrics::DEFAULT_ALPHA,
            n_theta: 60,
            score: ScoreSource::None,
            radii: vec![1.5, 2.5, 3.5],
        }
    }
}

#[derive(Debug, Clone)]
pub enum BuiltMetric {
    Planar(Metric2),
    Lifted {
        metric: LiftedMetric3,
        score: Option<OrientationScore>,
    },
}

impl BuiltMetric {
    /// Grid maximum of `⟨ω, M⁻¹ω⟩`.
    pub fn pd_max(&self) -> Result<f64, MetricError> {
        match self {
            Self::Planar(m) => check_positive_definiteness(m),
            Self::Lifted { metric, .. } => Ok(metric.pd_max()),
        }
    }

    #[must_use]
    pub fn is_lifted(&self) -> bool {
        matches!(self, Self::Lifted { .. })
    }
}

pub fn build_metric(img: &ImageBuffer, name: MetricName, p: &MetricParams) -> Result<BuiltMetric, Error> {
    let bad = |m: String| Error::Metric(MetricError::InvalidParameter(m));
    if !(p.sigma > 0.0) || !p.sigma.is_finite() {
        return Err(bad(format!("sigma must be positive, got {}", p.sigma)));
    }
    if !(p.beta >= 0.0) || !p.beta.is_finite() {
        return Err(bad(format!("beta must be non-negative, got {}", p.beta)));
    }
    Ok(match name {
        MetricName::Iso => {
            let g = gradient_magnitude(img, p.sigma)?;
            let pot = if p.beta > 0.0 {
                edge_potential(&g, p.beta, PotentialKind::ExpGap, None)?
            } else {
                g.map(|_| 1.0)
            };
            BuiltMetric::Planar(Metric2::isotropic(pot)?)
        }
        MetricName::RandersAlign => {
            let xi = remap_bounded(&alignment_vector(img, p.sigma, ColorMode::Sum)?, p.beta)?;
            BuiltMetric::Planar(Metric2::alignment_randers(&xi)?)
        }
        MetricName::RiemAlign => {
            let xi = remap_bounded(&alignment_vector(img, p.sigma, ColorMode::Eigen)?, p.beta)?;
            BuiltMetric::Planar(Metric2::alignment_riemannian(&xi)?)
        }
        MetricName::Elastica => {
            let lg = LiftedGrid3::new(img.grid(), p.n_theta)?;
            let metric = LiftedMetric3::new(lg, p.lambda, p.alpha)?;
            let score = match p.score {
                ScoreSource::None => None,
                ScoreSource::Edge => Some(orientation_score_edge(img, p.sigma, p.n_theta)?.rotated(FRAC_PI_2)),
                ScoreSource::Tube => Some(orientation_score_tube(&img.to_gray(), p.sigma, &p.radii, p.n_theta)?.0),
            };
            let metric = match &score {
                Some(s) if p.beta > 0.0 => metric.with_score(s, p.beta, DataForm::Exp)?,
                _ => metric,
            };
            BuiltMetric::Lifted { metric, score }
        }
    })
}
