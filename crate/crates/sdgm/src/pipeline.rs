//! End-to-end analysis: pattern -> spectral matrices -> inversion ->
//! partial coherence suprema -> thresholded graph, plus the flat
//! key/value configuration format shared by the CLI.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{build_sdgm, DependenceGraph};
use crate::partial::{invert_spectra, rescaled_inverse, sup_rescaled_inverse};
use crate::pattern::MultiTypePointPattern;
use crate::spectra::{spectral_matrix, FrequencyGrid, SmoothingSpec};

/// Analysis parameters with the standard defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub alpha: f64,
    pub grid_p: u32,
    /// None means auto (rank floor widened to P/4).
    pub smooth_h: Option<usize>,
    pub ridge_epsilon: f64,
    pub square_statistic: bool,
    pub exclude_dc: bool,
    pub allow_bivariate: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            grid_p: FrequencyGrid::DEFAULT_P,
            smooth_h: None,
            ridge_epsilon: crate::partial::DEFAULT_RIDGE_EPSILON,
            square_statistic: false,
            exclude_dc: true,
            allow_bivariate: false,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.grid_p < 1 {
            return Err(Error::Config("grid P must be at least 1".into()));
        }
        if !(self.ridge_epsilon >= 0.0) {
            return Err(Error::Config("ridge epsilon must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn half_width_for(&self, d: usize) -> usize {
        self.smooth_h
            .unwrap_or_else(|| SmoothingSpec::auto_half_width(d, self.grid_p))
    }

    /// Applies `key = value` pairs from the flat config format. Keys mirror
    /// the CLI flag names.
    pub fn apply_config_file(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.split('#').next().unwrap_or("").trim();
            if trimmed.is_empty() {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: "expected 'key = value'".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: String| Error::Parse {
                line,
                message: format!("bad value '{value}' for '{key}': {e}"),
            };
            match key {
                "alpha" => self.alpha = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                "grid-p" => self.grid_p = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "smooth-h" => {
                    self.smooth_h = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?)
                    }
                }
                "ridge" => self.ridge_epsilon = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                "square-statistic" => self.square_statistic = parse_bool(value).ok_or_else(|| bad("expected true/false".into()))?,
                "exclude-dc" => self.exclude_dc = parse_bool(value).ok_or_else(|| bad("expected true/false".into()))?,
                "allow-bivariate" => self.allow_bivariate = parse_bool(value).ok_or_else(|| bad("expected true/false".into()))?,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown configuration key '{other}'"),
                    })
                }
            }
        }
        Ok(())
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Everything `analyze` produces besides the exported files.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    pub grid_p: u32,
    pub grid_size: usize,
    pub half_width: usize,
    pub half_width_auto: bool,
    pub alpha: f64,
    pub square_statistic: bool,
    pub ridge_epsilon: f64,
    pub regularized: usize,
    pub dropped: usize,
    pub retained: usize,
    /// Supremum of the edge statistic per pair (diagonal 1).
    pub statistic: DMatrix<f64>,
    pub graph: DependenceGraph,
}

/// Runs the full pipeline on an already-loaded pattern. The pattern may be
/// in any window; it is rescaled here.
pub fn analyze(pattern: &MultiTypePointPattern, config: &AnalysisConfig) -> Result<AnalysisReport> {
    config.validate()?;
    let d = pattern.dimension();
    if d < 2 {
        return Err(Error::Validation(
            "analysis needs at least 2 types (partialisation needs 3)".into(),
        ));
    }
    if d == 2 && !config.allow_bivariate {
        return Err(Error::Validation(
            "partialisation requires d >= 3; rerun with --allow-bivariate to get \
             plain (unpartialised) coherence for a 2-type pattern"
                .into(),
        ));
    }

    let unit = pattern.rescale_to_unit_square();
    let grid = FrequencyGrid::new(config.grid_p, config.exclude_dc)?;
    let half_width = config.half_width_for(d);
    let spec = SmoothingSpec { half_width };
    let smoothed = spectral_matrix(&unit, grid, spec)?;
    let inverse = invert_spectra(&smoothed, config.ridge_epsilon)?;
    // for d == 2 the rescaled 2x2 inverse reduces to the ordinary coherence
    // |f_12| / sqrt(f_11 f_22), so one route serves both cases
    let sup = sup_rescaled_inverse(&rescaled_inverse(&inverse)?)?;

    let mut statistic = sup.clone();
    if config.square_statistic {
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    statistic[(i, j)] = statistic[(i, j)].powi(2);
                }
            }
        }
    }
    let graph = build_sdgm(&statistic, pattern.types(), config.alpha)?;
    Ok(AnalysisReport {
        labels: pattern.types().to_vec(),
        counts: pattern.counts(),
        grid_p: config.grid_p,
        grid_size: grid.len(),
        half_width,
        half_width_auto: config.smooth_h.is_none(),
        alpha: config.alpha,
        square_statistic: config.square_statistic,
        ridge_epsilon: config.ridge_epsilon,
        regularized: inverse.regularized,
        dropped: inverse.dropped,
        retained: inverse.retained,
        statistic,
        graph,
    })
}

impl AnalysisReport {
    /// Human-readable run summary: audit facts first, then every pair with
    /// its supremum statistic and edge decision.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let counts: Vec<String> = self
            .labels
            .iter()
            .zip(&self.counts)
            .map(|(l, n)| format!("{l}:{n}"))
            .collect();
        out.push_str(&format!("types: {} ({})\n", self.labels.len(), counts.join(", ")));
        out.push_str(&format!(
            "grid: P={} ({} frequencies)\n",
            self.grid_p, self.grid_size
        ));
        out.push_str(&format!(
            "smoothing: daniell box, h={}{}\n",
            self.half_width,
            if self.half_width_auto { " (auto)" } else { "" }
        ));
        out.push_str(&format!(
            "inversion: ridge epsilon {:.1e}, regularized {}, dropped {}, retained {}\n",
            self.ridge_epsilon, self.regularized, self.dropped, self.retained
        ));
        out.push_str(&format!(
            "edge statistic: sup |d|{} vs alpha = {}\n",
            if self.square_statistic { "^2" } else { "" },
            self.alpha
        ));
        out.push_str("pairs:\n");
        let d = self.labels.len();
        let width = self.labels.iter().map(|l| l.len()).max().unwrap_or(0);
        for i in 0..d {
            for j in (i + 1)..d {
                let v = self.statistic[(i, j)];
                out.push_str(&format!(
                    "  {:width$} -- {:width$}  sup = {:.4}{}\n",
                    self.labels[i],
                    self.labels[j],
                    v,
                    if v > self.alpha { "  EDGE" } else { "" },
                ));
            }
        }
        out.push_str(&format!("edges: {}\n", self.graph.edges().len()));
        out
    }
}
