//! Least-squares decay exponents on log-log axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values at or below this are dropped before fitting.
pub const FIT_FLOOR: f64 = 10.0 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points removed by the floor filter.
    pub excluded: usize,
}

/// Fits `log r = intercept + slope · log t` over the points with `r > FIT_FLOOR`.
/// Points are sorted by abscissa first.
pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let kept: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|&(t, r)| t > 0.0 && r.is_finite() && r > FIT_FLOOR)
        .collect();
    if kept.len() < 3 {
        return Err(Error::InsufficientPoints {
            surviving: kept.len(),
        });
    }
    let n = kept.len() as f64;
    let xs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::pre("fit_decay", "all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        times: kept.iter().map(|p| p.0).collect(),
        values: kept.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        r_squared,
        excluded: pts.len() - kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&t| (t, 3.0 / (t * t))).collect();
        let f = fit_decay(&pts).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn constant_has_zero_slope() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&t| (t, 0.5)).collect();
        let f = fit_decay(&pts).unwrap();
        assert!(f.slope.abs() < 1e-12);
    }

    #[test]
    fn floor_filter_and_refusal() {
        let pts = [(1.0, 1.0), (2.0, 0.5), (4.0, 1e-17), (8.0, 0.0)];
        match fit_decay(&pts) {
            Err(Error::InsufficientPoints { surviving }) => assert_eq!(surviving, 2),
            other => panic!("{other:?}"),
        }
        let pts = [(8.0, 0.0), (1.0, 1.0), (2.0, 0.5), (4.0, 0.25)];
        let f = fit_decay(&pts).unwrap();
        assert_eq!(f.excluded, 1);
        assert_eq!(f.times, vec![1.0, 2.0, 4.0]);
    }
}
