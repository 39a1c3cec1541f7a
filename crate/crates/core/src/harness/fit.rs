use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub log_constant: f64,
    pub r_squared: f64,
    pub points: usize,
    pub x_field: String,
    pub y_field: String,
}

impl FitResult {
    pub fn constant(&self) -> f64 {
        self.log_constant.exp()
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.constant() * x.powf(self.exponent)
    }
}

/// Fits `y = c x^p` to at least four strictly positive points.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    fit_power_law_named(points, "x", "y")
}

pub fn fit_power_law_named(points: &[(f64, f64)], x_field: &str, y_field: &str) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("{} points, need at least 4", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::InsufficientData(format!("nonpositive point ({x}, {y})")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let exponent = sxy / sxx;
    let log_constant = my - exponent * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - log_constant - exponent * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(FitResult {
        exponent,
        log_constant,
        r_squared,
        points: points.len(),
        x_field: x_field.to_string(),
        y_field: y_field.to_string(),
    })
}
