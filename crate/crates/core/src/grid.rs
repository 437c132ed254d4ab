//! Discrete torus ℤ_Lᵈ, Fourier conventions and momentum-space multipliers.
//!
//! Positions live in the centered window `[-L/2, L/2)ᵈ`, momenta are
//! `p_k = 2πk/L` with `k ∈ {-L/2+1, …, L/2}`. Sites are stored row-major with the
//! last axis fastest. Forward transform:
//! `ψ̂(p) = (2π)^{-d/2} Σ_x ψ(x) e^{-ip·x}`, inverse:
//! `ψ(x) = (2π)^{-d/2} (2π/L)ᵈ Σ_k ψ̂(p_k) e^{ip_k·x}`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of sites, to keep dense work sane.
pub const MAX_SITES: usize = 1 << 22;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    side: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if side < 2 || !side.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "side length must be a positive even integer, got {side}"
            )));
        }
        match side.checked_pow(dim as u32) {
            Some(n) if n <= MAX_SITES => Ok(TorusGrid { dim, side }),
            _ => Err(Error::InvalidGrid(format!("{side}^{dim} sites exceeds {MAX_SITES}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of sites, `Lᵈ`.
    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Momentum grid spacing `2π/L`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.side as f64
    }

    /// Per-axis array indices of flat index `i`.
    pub fn unravel(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for o in out.iter_mut().rev() {
            *o = i % self.side;
            i /= self.side;
        }
        out
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.side + j)
    }

    /// Centered coordinate of array index `j` on one axis.
    pub fn coordinate(&self, j: usize) -> i64 {
        j as i64 - (self.side / 2) as i64
    }

    /// Momentum integer `k` of array index `j` on one axis.
    pub fn momentum_integer(&self, j: usize) -> i64 {
        j as i64 + 1 - (self.side / 2) as i64
    }

    /// Position of site `i` in the centered window.
    pub fn position(&self, i: usize) -> Vec<i64> {
        self.unravel(i).into_iter().map(|j| self.coordinate(j)).collect()
    }

    pub fn position_f64(&self, i: usize) -> Vec<f64> {
        self.unravel(i)
            .into_iter()
            .map(|j| self.coordinate(j) as f64)
            .collect()
    }

    /// Momentum `p_k` of momentum index `i`.
    pub fn momentum(&self, i: usize) -> Vec<f64> {
        self.unravel(i)
            .into_iter()
            .map(|j| self.momentum_integer(j) as f64 * self.spacing())
            .collect()
    }

    /// Wraps an integer coordinate into `[-L/2, L/2)`.
    pub fn wrap(&self, x: i64) -> i64 {
        let l = self.side as i64;
        (x + l / 2).rem_euclid(l) - l / 2
    }

    /// Flat site index of a (possibly unwrapped) position.
    pub fn position_index(&self, x: &[i64]) -> usize {
        let l = self.side as i64;
        x.iter()
            .fold(0, |acc, &c| acc * self.side + (c + l / 2).rem_euclid(l) as usize)
    }

    /// Flat momentum index of a grid momentum (any representative mod 2π).
    pub fn momentum_index(&self, p: &[f64]) -> usize {
        let l = self.side as i64;
        p.iter().fold(0, |acc, &c| {
            let k = (c / self.spacing()).round() as i64;
            let j = (k - 1 + l / 2).rem_euclid(l) as usize;
            acc * self.side + j
        })
    }

    /// All momenta, indexed by momentum index.
    pub fn momenta(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.momentum(i)).collect()
    }

    /// All positions as floats, indexed by site.
    pub fn positions(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.position_f64(i)).collect()
    }

    /// In-place unnormalized FFT along every axis.
    pub(crate) fn fft_all_axes(&self, data: &mut [Complex64], inverse: bool) {
        let l = self.side;
        let fft = plan(l, inverse);
        if self.dim == 1 {
            fft.process(data);
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); l];
        for axis in 0..self.dim {
            let stride = l.pow((self.dim - 1 - axis) as u32);
            let block = stride * l;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + off + j * stride];
                    }
                    fft.process(&mut line);
                    for (j, v) in line.iter().enumerate() {
                        data[base + off + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// For momentum index `m`: the FFT bin holding it and the sign `(-1)^{Σk}`.
    fn bin_and_sign(&self, m: usize) -> (usize, f64) {
        let l = self.side as i64;
        let mut bin = 0;
        let mut parity = 0i64;
        for j in self.unravel(m) {
            let k = self.momentum_integer(j);
            bin = bin * self.side + k.rem_euclid(l) as usize;
            parity += k;
        }
        (bin, if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 })
    }
}

/// Complex amplitudes on the sites of a grid, in position representation.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeState {
    pub grid: TorusGrid,
    pub amplitudes: Vec<Complex64>,
}

/// Complex amplitudes indexed by momentum index.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumField {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
}

impl LatticeState {
    pub fn new(grid: TorusGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: amplitudes.len(),
            });
        }
        Ok(LatticeState { grid, amplitudes })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        LatticeState {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn delta(grid: TorusGrid, x: &[i64]) -> Self {
        let mut s = Self::zeros(grid);
        s.amplitudes[grid.position_index(x)] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let amplitudes = (0..grid.len()).map(|i| f(&grid.position_f64(i))).collect();
        LatticeState { grid, amplitudes }
    }

    /// Independent uniform real and imaginary parts in `[-1, 1)`.
    pub fn random(grid: TorusGrid, rng: &mut impl Rng) -> Self {
        let amplitudes = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        LatticeState { grid, amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &LatticeState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `self - other`.
    pub fn sub(&self, other: &LatticeState) -> LatticeState {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &LatticeState) -> LatticeState {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: Complex64) -> LatticeState {
        LatticeState {
            grid: self.grid,
            amplitudes: self.amplitudes.iter().map(|a| a * c).collect(),
        }
    }

    fn zip_with(&self, other: &LatticeState, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.grid, other.grid, "states on different grids");
        LatticeState {
            grid: self.grid,
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// Multiplies pointwise by `f(x)`.
    pub fn multiply_by(&self, f: impl Fn(&[f64]) -> f64) -> LatticeState {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a * f(&self.grid.position_f64(i)))
            .collect();
        LatticeState {
            grid: self.grid,
            amplitudes,
        }
    }

    /// Position centroid `Σ x |ψ|² / Σ |ψ|²`.
    pub fn centroid(&self) -> Vec<f64> {
        let total = self.norm_sqr();
        let mut c = vec![0.0; self.grid.dim()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let w = a.norm_sqr();
            for (cj, xj) in c.iter_mut().zip(self.grid.position_f64(i)) {
                *cj += w * xj;
            }
        }
        c.iter().map(|v| v / total).collect()
    }
}

impl MomentumField {
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.momentum(i))).collect();
        MomentumField { grid, values }
    }

    /// Discrete Parseval norm `((2π/L)ᵈ Σ_k |ψ̂|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        let w = self.grid.spacing().powi(self.grid.dim() as i32);
        (w * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }
}

pub fn fourier(state: &LatticeState) -> MomentumField {
    let grid = state.grid;
    let mut buf = state.amplitudes.clone();
    grid.fft_all_axes(&mut buf, false);
    let c = (2.0 * PI).powf(-(grid.dim() as f64) / 2.0);
    let values = (0..grid.len())
        .map(|m| {
            let (bin, sign) = grid.bin_and_sign(m);
            buf[bin] * (sign * c)
        })
        .collect();
    MomentumField { grid, values }
}

pub fn inverse_fourier(field: &MomentumField) -> LatticeState {
    let grid = field.grid;
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (m, v) in field.values.iter().enumerate() {
        let (bin, sign) = grid.bin_and_sign(m);
        buf[bin] = v * sign;
    }
    grid.fft_all_axes(&mut buf, true);
    let d = grid.dim() as f64;
    let c = (2.0 * PI).powf(d / 2.0) / grid.len() as f64;
    buf.iter_mut().for_each(|v| *v *= c);
    LatticeState {
        grid,
        amplitudes: buf,
    }
}

/// `m(D)ψ` for a multiplier given as a function of momentum.
pub fn apply_multiplier(state: &LatticeState, m: impl Fn(&[f64]) -> Complex64) -> LatticeState {
    let values = MomentumField::from_fn(state.grid, m).values;
    apply_multiplier_values(state, &values)
}

/// `m(D)ψ` for a multiplier sampled by momentum index.
pub fn apply_multiplier_values(state: &LatticeState, m: &[Complex64]) -> LatticeState {
    let mut f = fourier(state);
    f.values.iter_mut().zip(m).for_each(|(v, w)| *v *= w);
    inverse_fourier(&f)
}

/// `(e^{iD·y}ψ)(x) = ψ(x + y)`, by exact index shifting.
pub fn translate(state: &LatticeState, y: &[i64]) -> LatticeState {
    let grid = state.grid;
    let amplitudes = (0..grid.len())
        .map(|i| {
            let x: Vec<i64> = grid.position(i).iter().zip(y).map(|(a, b)| a + b).collect();
            state.amplitudes[grid.position_index(&x)]
        })
        .collect();
    LatticeState { grid, amplitudes }
}

/// Multiplier realized by [`smear`]: `m(p) = (2π)^{-d/2} Σ_y g(y) e^{ip·y}`.
pub fn smear_multiplier(g: &LatticeState) -> MomentumField {
    let grid = g.grid;
    let reflected = (0..grid.len())
        .map(|i| {
            let x: Vec<i64> = grid.position(i).iter().map(|v| -v).collect();
            g.amplitudes[grid.position_index(&x)]
        })
        .collect();
    fourier(&LatticeState {
        grid,
        amplitudes: reflected,
    })
}

/// `(2π)^{-d/2} Σ_y g(y) ψ(x + y)`, evaluated through the equivalent multiplier.
pub fn smear(state: &LatticeState, g: &LatticeState) -> Result<LatticeState> {
    if state.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    Ok(apply_multiplier_values(state, &smear_multiplier(g).values))
}

/// Spectral derivative `∂_{p_axis}` of a sampled momentum profile.
///
/// Differentiates the trigonometric interpolant; the Nyquist coordinate is dropped.
pub fn spectral_derivative(field: &MomentumField, axis: usize) -> MomentumField {
    let grid = field.grid;
    let pos = inverse_fourier(field);
    let half = (grid.side() / 2) as i64;
    let weighted = LatticeState {
        grid,
        amplitudes: pos
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let x = grid.position(i)[axis];
                if x == -half {
                    Complex64::new(0.0, 0.0)
                } else {
                    a * Complex64::new(0.0, -(x as f64))
                }
            })
            .collect(),
    };
    fourier(&weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Direct O(N²) evaluation of the forward transform.
    fn dft(state: &LatticeState) -> Vec<Complex64> {
        let g = state.grid;
        let norm = (2.0 * PI).powf(-(g.dim() as f64) / 2.0);
        (0..g.len())
            .map(|m| {
                let p = g.momentum(m);
                (0..g.len())
                    .map(|i| {
                        let x = g.position_f64(i);
                        let ph: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
                        state.amplitudes[i] * Complex64::from_polar(1.0, -ph)
                    })
                    .sum::<Complex64>()
                    * norm
            })
            .collect()
    }

    #[test]
    fn momenta_in_half_open_cube() {
        let g = TorusGrid::new(2, 8).unwrap();
        for p in g.momenta() {
            for v in p {
                assert!(v > -PI && v <= PI + 1e-15);
            }
        }
        assert_eq!(g.momenta().len(), g.positions().len());
        assert!(TorusGrid::new(1, 7).is_err());
        assert!(TorusGrid::new(0, 8).is_err());
    }

    #[test]
    fn delta_and_constant() {
        let g = TorusGrid::new(1, 8).unwrap();
        let f = fourier(&LatticeState::delta(g, &[0]));
        for v in &f.values {
            assert!((v - c((2.0 * PI).powf(-0.5))).norm() < 1e-15);
        }
        let one = LatticeState::from_fn(g, |_| c(1.0));
        let f = fourier(&one);
        for (m, v) in f.values.iter().enumerate() {
            let expect = if g.momentum(m)[0] == 0.0 {
                8.0 * (2.0 * PI).powf(-0.5)
            } else {
                0.0
            };
            assert!((v - c(expect)).norm() < 1e-13);
        }
    }

    #[test]
    fn fft_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, l) in [(1, 16), (2, 6), (3, 4)] {
            let g = TorusGrid::new(d, l).unwrap();
            let s = LatticeState::random(g, &mut rng);
            let fast = fourier(&s);
            for (a, b) in fast.values.iter().zip(dft(&s)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (d, l) in [(1, 2), (1, 1024), (2, 32), (2, 64)] {
            let g = TorusGrid::new(d, l).unwrap();
            let s = LatticeState::random(g, &mut rng);
            let f = fourier(&s);
            assert!((f.norm() - s.norm()).abs() < 1e-12 * s.norm());
            let back = inverse_fourier(&f);
            assert!(back.sub(&s).norm() < 1e-12 * s.norm());
        }
    }

    #[test]
    fn translation_convention() {
        let g = TorusGrid::new(1, 16).unwrap();
        let d = LatticeState::delta(g, &[3]);
        let y = 5i64;
        let via_mult = apply_multiplier(&d, |p| Complex64::from_polar(1.0, p[0] * y as f64));
        let expect = LatticeState::delta(g, &[3 - y]);
        assert!(via_mult.sub(&expect).norm() < 1e-13);
        assert!(translate(&d, &[y]).sub(&expect).norm() == 0.0);
    }

    #[test]
    fn identity_and_indicator_multipliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = TorusGrid::new(1, 64).unwrap();
        let s = LatticeState::random(g, &mut rng);
        assert!(apply_multiplier(&s, |_| c(1.0)).sub(&s).norm() < 1e-13);
        let inside = |p: &[f64]| p[0].abs() < 1.0;
        let band = apply_multiplier(&s, |p| c(if inside(p) { 1.0 } else { 0.0 }));
        let again = apply_multiplier(&band, |p| c(if inside(p) { 1.0 } else { 0.0 }));
        assert!(again.sub(&band).norm() < 1e-13);
    }

    #[test]
    fn smear_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (d, l) in [(1, 32), (2, 8)] {
            let grid = TorusGrid::new(d, l).unwrap();
            let psi = LatticeState::random(grid, &mut rng);
            let g = LatticeState::random(grid, &mut rng);
            let norm = (2.0 * PI).powf(-(d as f64) / 2.0);
            let direct: Vec<Complex64> = (0..grid.len())
                .map(|i| {
                    let x = grid.position(i);
                    (0..grid.len())
                        .map(|j| {
                            let y = grid.position(j);
                            let xy: Vec<i64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                            g.amplitudes[j] * psi.amplitudes[grid.position_index(&xy)]
                        })
                        .sum::<Complex64>()
                        * norm
                })
                .collect();
            let fast = smear(&psi, &g).unwrap();
            let err: f64 = fast
                .amplitudes
                .iter()
                .zip(&direct)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-12 * psi.norm().max(1.0) * g.norm().max(1.0));
        }
    }

    #[test]
    fn smear_examples() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = LatticeState::random(grid, &mut rng);
        let id = LatticeState::delta(grid, &[0]).scale(c((2.0 * PI).sqrt()));
        assert!(smear(&psi, &id).unwrap().sub(&psi).norm() < 1e-13);
        let g = LatticeState::random(grid, &mut rng);
        let out = smear(&LatticeState::delta(grid, &[0]), &g).unwrap();
        for j in 0..grid.len() {
            let y = grid.position(j)[0];
            let got = out.amplitudes[grid.position_index(&[-y])];
            assert!((got - g.amplitudes[j] * (2.0 * PI).powf(-0.5)).norm() < 1e-13);
        }
    }

    #[test]
    fn spectral_derivative_of_trig_polynomial() {
        let g = TorusGrid::new(1, 64).unwrap();
        let f = MomentumField::from_fn(g, |p| c((2.0 * p[0]).sin() + (3.0 * p[0]).cos()));
        let df = spectral_derivative(&f, 0);
        for (m, v) in df.values.iter().enumerate() {
            let p = g.momentum(m)[0];
            let expect = 2.0 * (2.0 * p).cos() - 3.0 * (3.0 * p).sin();
            assert!((v - c(expect)).norm() < 1e-11);
        }
    }

    #[test]
    fn momentum_index_round_trip() {
        let g = TorusGrid::new(2, 8).unwrap();
        for m in 0..g.len() {
            assert_eq!(g.momentum_index(&g.momentum(m)), m);
            let shifted: Vec<f64> = g.momentum(m).iter().map(|p| p - 2.0 * PI).collect();
            assert_eq!(g.momentum_index(&shifted), m);
        }
    }
}
