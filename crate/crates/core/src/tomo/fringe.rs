use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Reported max/min ratio when the fitted minimum vanishes.
pub const RATIO_CAP: f64 = 1e6;
/// χ²/dof above which a fit is flagged as non-sinusoidal.
const CHI2_WARN: f64 = 10.0;

/// Coincidence counts of the two analyser outcomes at one sweep angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub angle: f64,
    pub counts: [f64; 2],
}

/// `y = c0 + A cos(x - x0)` fitted to one outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub visibility: f64,
    pub max_min_ratio: f64,
    pub ratio_capped: bool,
    pub chi2_per_dof: f64,
    pub non_sinusoidal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeResult {
    pub outcomes: [FringeFit; 2],
    /// Mean visibility of the two outcomes.
    pub visibility: f64,
    /// Smaller max/min ratio of the two outcomes.
    pub max_min_ratio: f64,
    pub ratio_capped: bool,
    pub warnings: Vec<String>,
}

/// Sinusoidal least-squares fit of both outcomes.
///
/// Needs at least four points covering one period: the sampled span plus
/// one mean spacing must reach `2π`.
pub fn fringe_analysis(sweep: &[FringePoint]) -> Result<FringeResult> {
    if sweep.len() < 4 {
        return Err(invalid("fringe analysis needs at least 4 points"));
    }
    if sweep
        .iter()
        .any(|p| !p.angle.is_finite() || p.counts.iter().any(|c| !c.is_finite() || *c < 0.0))
    {
        return Err(invalid("fringe data must be finite, with non-negative counts"));
    }
    let lo = sweep.iter().map(|p| p.angle).fold(f64::INFINITY, f64::min);
    let hi = sweep.iter().map(|p| p.angle).fold(f64::NEG_INFINITY, f64::max);
    let spacing = (hi - lo) / (sweep.len() - 1) as f64;
    if hi - lo + spacing < TAU - 1e-9 {
        return Err(invalid("fringe sweep must span at least one period"));
    }
    let fit0 = fit_outcome(sweep, 0)?;
    let fit1 = fit_outcome(sweep, 1)?;
    let mut warnings = Vec::new();
    for (k, f) in [fit0, fit1].iter().enumerate() {
        if f.non_sinusoidal {
            warnings.push(format!(
                "non-sinusoidal data in outcome {k} (chi2/dof = {:.2})",
                f.chi2_per_dof
            ));
        }
    }
    Ok(FringeResult {
        visibility: 0.5 * (fit0.visibility + fit1.visibility),
        max_min_ratio: fit0.max_min_ratio.min(fit1.max_min_ratio),
        ratio_capped: fit0.ratio_capped && fit1.ratio_capped,
        outcomes: [fit0, fit1],
        warnings,
    })
}

fn fit_outcome(sweep: &[FringePoint], k: usize) -> Result<FringeFit> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for p in sweep {
        let row = Vector3::new(1.0, p.angle.cos(), p.angle.sin());
        ata += row * row.transpose();
        aty += row * p.counts[k];
    }
    let c = ata
        .lu()
        .solve(&aty)
        .ok_or_else(|| invalid("degenerate fringe sampling"))?;
    let (c0, a) = (c[0], c[1].hypot(c[2]));
    if !(c0 > 0.0) {
        return Err(invalid("fringe has no counts"));
    }
    let max = c0 + a;
    let min = c0 - a;
    let (ratio, capped) = if min <= max / RATIO_CAP {
        (RATIO_CAP, true)
    } else {
        (max / min, false)
    };
    let dof = (sweep.len() - 3).max(1) as f64;
    let chi2: f64 = sweep
        .iter()
        .map(|p| {
            let model = c0 + c[1] * p.angle.cos() + c[2] * p.angle.sin();
            (p.counts[k] - model).powi(2) / model.max(1.0)
        })
        .sum();
    Ok(FringeFit {
        offset: c0,
        amplitude: a,
        phase: c[2].atan2(c[1]),
        visibility: (a / c0).min(1.0),
        max_min_ratio: ratio,
        ratio_capped: capped,
        chi2_per_dof: chi2 / dof,
        non_sinusoidal: chi2 / dof > CHI2_WARN,
    })
}
