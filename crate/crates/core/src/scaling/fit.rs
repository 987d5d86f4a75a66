//! Least-squares fits of power laws and log laws in `η`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `value = a η^b`, fitted on `(ln η, ln value)`.
    Power,
    /// `value = a + b |ln(η/2)|`.
    LogLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: FitModel,
    pub pairs: Vec<(f64, f64)>,
    pub a: f64,
    pub b: f64,
    pub b_stderr: f64,
    pub r2: f64,
    /// Largest absolute residual in the transformed coordinates.
    pub max_residual: f64,
}

/// Fits `pairs = [(η, value)]` under `model`.
pub fn fit_scaling(pairs: &[(f64, f64)], model: FitModel) -> Result<ScalingFit> {
    if pairs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", pairs.len())));
    }
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(eta, v) in pairs {
        if !(eta > 0.0 && eta.is_finite() && v.is_finite()) {
            return Err(Error::Fit(format!("invalid point ({eta}, {v})")));
        }
        match model {
            FitModel::Power => {
                if !(v > 0.0) {
                    return Err(Error::Fit(format!("power fit needs positive values, got {v}")));
                }
                xs.push(eta.ln());
                ys.push(v.ln());
            }
            FitModel::LogLaw => {
                xs.push((eta / 2.0).ln().abs());
                ys.push(v);
            }
        }
    }
    let (icpt, b, se, r2, maxres) = ols(&xs, &ys)?;
    let a = match model {
        FitModel::Power => icpt.exp(),
        FitModel::LogLaw => icpt,
    };
    Ok(ScalingFit { model, pairs: pairs.to_vec(), a, b, b_stderr: se, r2, max_residual: maxres })
}

/// Simple linear regression `y = c + b x`: `(c, b, se(b), R², max |residual|)`.
fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    if sxx <= 1e-24 * scale * scale * n {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let c = my - b * mx;
    let res: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - c - b * x).collect();
    let ssr: f64 = res.iter().map(|r| r * r).sum();
    let sst: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 1.0 };
    let se = if xs.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let maxres = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok((c, b, se, r2, maxres))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power() {
        let pts: Vec<_> = [0.25, 0.125, 0.0625].iter().map(|&e: &f64| (e, 3.0 / e)).collect();
        let f = fit_scaling(&pts, FitModel::Power).unwrap();
        assert!((f.b + 1.0).abs() < 1e-12 && (f.a - 3.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_loglaw() {
        let pts: Vec<_> = [0.25, 0.125, 0.0625, 0.03125]
            .iter()
            .map(|&e: &f64| (e, 2.0 + 5.0 * (e / 2.0).ln().abs()))
            .collect();
        let f = fit_scaling(&pts, FitModel::LogLaw).unwrap();
        assert!((f.b - 5.0).abs() < 1e-12 && (f.a - 2.0).abs() < 1e-10 && f.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        assert!(fit_scaling(&[(0.5, 1.0), (0.5, 2.0), (0.5, 3.0)], FitModel::Power).is_err());
        assert!(fit_scaling(&[(0.5, 1.0), (0.25, 2.0)], FitModel::Power).is_err());
        assert!(fit_scaling(&[(0.5, 1.0), (0.25, -2.0), (0.1, 1.0)], FitModel::Power).is_err());
    }
}
