//! Smooth radial profiles used for cutoffs, symbols, wave packets and detector windows.
//!
//! Every profile is C^∞. Compactly supported profiles vanish identically outside
//! their declared radius around `center`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_sharpness() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// Constant value everywhere.
    Constant { value: f64 },
    /// `exp(c (1 - 1/(1 - (r/R)^2)))` for `r < R`, zero beyond. Equals 1 at the center.
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_sharpness")]
        sharpness: f64,
    },
    /// Exactly 1 for `r <= inner`, smooth monotone step down to 0 at `r = outer`.
    Plateau {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    /// Gaussian of width `sigma` multiplied by a plateau cutoff.
    GaussianLike {
        center: Vec<f64>,
        sigma: f64,
        inner: f64,
        outer: f64,
    },
    /// Zero for `r <= r_min`, rises smoothly to 1 over `width`, stays 1, and falls
    /// back to 0 at `r = r_max`. In one dimension the support is `r_min <= |u| <= r_max`.
    Annulus {
        center: Vec<f64>,
        r_min: f64,
        r_max: f64,
        width: f64,
    },
}

/// `e^{-1/u}` for `u > 0`, else 0.
fn phi(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

fn dphi(u: f64) -> f64 {
    if u > 0.0 {
        phi(u) / (u * u)
    } else {
        0.0
    }
}

/// Smooth step: 1 for `u <= 0`, 0 for `u >= 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let a = phi(1.0 - u);
        a / (a + phi(u))
    }
}

pub fn smooth_step_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let (a, b) = (phi(1.0 - u), phi(u));
    let den = a + b;
    -(dphi(1.0 - u) * b + a * dphi(u)) / (den * den)
}

fn bump_radial(r: f64, radius: f64, c: f64) -> (f64, f64) {
    let q = r / radius;
    if q >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - q * q;
    let f = (c * (1.0 - 1.0 / s)).exp();
    (f, f * c * (-2.0 * q / (s * s)) / radius)
}

fn plateau_radial(r: f64, inner: f64, outer: f64) -> (f64, f64) {
    let w = outer - inner;
    let u = (r - inner) / w;
    (smooth_step(u), smooth_step_derivative(u) / w)
}

impl Profile {
    pub fn bump(center: &[f64], radius: f64, sharpness: f64) -> Self {
        Profile::Bump {
            center: center.to_vec(),
            radius,
            sharpness,
        }
    }

    pub fn plateau(center: &[f64], inner: f64, outer: f64) -> Self {
        Profile::Plateau {
            center: center.to_vec(),
            inner,
            outer,
        }
    }

    pub fn gaussian_like(center: &[f64], sigma: f64, inner: f64, outer: f64) -> Self {
        Profile::GaussianLike {
            center: center.to_vec(),
            sigma,
            inner,
            outer,
        }
    }

    pub fn center(&self) -> Option<&[f64]> {
        match self {
            Profile::Constant { .. } => None,
            Profile::Bump { center, .. }
            | Profile::Plateau { center, .. }
            | Profile::GaussianLike { center, .. }
            | Profile::Annulus { center, .. } => Some(center),
        }
    }

    /// Radius of the support ball around the center; `None` if unbounded.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Profile::Constant { value } => (*value == 0.0).then_some(0.0),
            Profile::Bump { radius, .. } => Some(*radius),
            Profile::Plateau { outer, .. } | Profile::GaussianLike { outer, .. } => Some(*outer),
            Profile::Annulus { r_max, .. } => Some(*r_max),
        }
    }

    /// Largest |u| reached by the support (center norm plus radius).
    pub fn reach(&self) -> Option<f64> {
        let r = self.support_radius()?;
        let c = self.center().map(norm).unwrap_or(0.0);
        Some(c + r)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Constant { value } if *value == 0.0)
    }

    /// Checks parameters and that the center has dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("profile {self:?}: {m}")));
        if let Some(c) = self.center() {
            if c.len() != dim {
                return bad(format!("center has dimension {}, expected {dim}", c.len()));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return bad("non-finite center".into());
            }
        }
        match self {
            Profile::Constant { value } if !value.is_finite() => bad("non-finite value".into()),
            Profile::Bump {
                radius, sharpness, ..
            } if !(*radius > 0.0 && *sharpness > 0.0) => {
                bad("radius and sharpness must be positive".into())
            }
            Profile::Plateau { inner, outer, .. } if !(*inner >= 0.0 && outer > inner) => {
                bad("need 0 <= inner < outer".into())
            }
            Profile::GaussianLike {
                sigma,
                inner,
                outer,
                ..
            } if !(*sigma > 0.0 && *inner >= 0.0 && outer > inner) => {
                bad("need sigma > 0 and 0 <= inner < outer".into())
            }
            Profile::Annulus {
                r_min, r_max, width, ..
            } if !(*r_min >= 0.0 && *width > 0.0 && r_min + 2.0 * width <= *r_max) => {
                bad("need 0 <= r_min and r_min + 2 width <= r_max".into())
            }
            _ => Ok(()),
        }
    }

    fn radial(&self, r: f64) -> (f64, f64) {
        match self {
            Profile::Constant { value } => (*value, 0.0),
            Profile::Bump {
                radius, sharpness, ..
            } => bump_radial(r, *radius, *sharpness),
            Profile::Plateau { inner, outer, .. } => plateau_radial(r, *inner, *outer),
            Profile::GaussianLike {
                sigma,
                inner,
                outer,
                ..
            } => {
                let (p, dp) = plateau_radial(r, *inner, *outer);
                let g = (-r * r / (2.0 * sigma * sigma)).exp();
                (g * p, g * dp - g * p * r / (sigma * sigma))
            }
            Profile::Annulus {
                r_min, r_max, width, ..
            } => {
                let u = (r - r_min) / width;
                let v = (r - r_max + width) / width;
                let (rise, drise) = (1.0 - smooth_step(u), -smooth_step_derivative(u) / width);
                let (fall, dfall) = (smooth_step(v), smooth_step_derivative(v) / width);
                (rise * fall, drise * fall + rise * dfall)
            }
        }
    }

    fn offset(&self, u: &[f64]) -> Vec<f64> {
        match self.center() {
            Some(c) => u.iter().zip(c).map(|(a, b)| a - b).collect(),
            None => u.to_vec(),
        }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        if let Profile::Constant { value } = self {
            return *value;
        }
        self.radial(norm(&self.offset(u))).0
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        if let Profile::Constant { .. } = self {
            return vec![0.0; u.len()];
        }
        let v = self.offset(u);
        let r = norm(&v);
        if r == 0.0 {
            return vec![0.0; u.len()];
        }
        let d = self.radial(r).1;
        v.iter().map(|x| d * x / r).collect()
    }

    /// Whether the profile equals 1 on the closed ball `B(center, radius)`, by sampling.
    pub fn is_one_on_ball(&self, center: &[f64], radius: f64, samples: usize) -> bool {
        let d = center.len();
        let n = samples.max(2);
        let total = n.pow(d as u32);
        (0..total).all(|mut idx| {
            let mut u = vec![0.0; d];
            for ui in u.iter_mut().rev() {
                let j = idx % n;
                idx /= n;
                *ui = -radius + 2.0 * radius * j as f64 / (n - 1) as f64;
            }
            if norm(&u) > radius {
                return true;
            }
            let p: Vec<f64> = u.iter().zip(center).map(|(a, b)| a + b).collect();
            (self.value(&p) - 1.0).abs() < 1e-14
        })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(p: &Profile, u: f64) -> f64 {
        let h = 1e-6;
        (p.value(&[u + h]) - p.value(&[u - h])) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let profiles = [
            Profile::bump(&[0.3], 1.2, 2.0),
            Profile::plateau(&[-0.1], 0.4, 1.1),
            Profile::gaussian_like(&[0.5], 0.3, 0.2, 0.9),
            Profile::Annulus {
                center: vec![0.1],
                r_min: 0.2,
                r_max: 1.3,
                width: 0.3,
            },
        ];
        for p in &profiles {
            for i in 0..200 {
                let u = -2.0 + 4.0 * i as f64 / 199.0;
                let g = p.gradient(&[u])[0];
                assert!((g - fd(p, u)).abs() < 1e-6, "{p:?} at {u}: {g} vs {}", fd(p, u));
            }
        }
    }

    #[test]
    fn supports_and_plateaus() {
        let b = Profile::bump(&[0.0, 0.0], 1.0, 1.0);
        assert_eq!(b.value(&[0.0, 0.0]), 1.0);
        assert_eq!(b.value(&[0.8, 0.6]), 0.0);
        assert!(b.value(&[0.5, 0.5]) > 0.0);
        let p = Profile::plateau(&[0.0], 4.0, 5.0);
        assert!(p.is_one_on_ball(&[0.0], 4.0, 101));
        assert!(!p.is_one_on_ball(&[0.0], 4.5, 101));
        assert_eq!(p.value(&[5.0]), 0.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn serde_literals() {
        let p: Profile =
            serde_json::from_str(r#"{"type":"bump","center":[0.0],"radius":2.0}"#).unwrap();
        assert_eq!(p, Profile::bump(&[0.0], 2.0, 1.0));
        assert!(serde_json::from_str::<Profile>(
            r#"{"type":"bump","center":[0.0],"radius":2.0,"extra":1}"#
        )
        .is_err());
    }
}
