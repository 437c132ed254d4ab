//! Weyl quantization of lattice symbols, dense kernels and the residuals of the
//! product, localization and conjugation expansions.
//!
//! The kernel of `a^w` is `K(x,y) = L^{-d} Σ_ξ a(z, ξ) e^{i(x-y)·ξ}` with `x - y`
//! taken as its minimal image `w` and `z = y + w/2` wrapped into the window, so
//! symbols are effectively `L`-periodic in `x`. When a component of `w` equals
//! `-L/2` both midpoint choices are averaged, which keeps real symbols exactly
//! self-adjoint.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dispersion::Dispersion;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{
    apply_multiplier_values, spectral_derivative, LatticeState, MomentumField, TorusGrid,
};
use crate::profile::Profile;

pub type SymbolFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;

/// A complex symbol `a(x, ξ)` evaluated at half-integer midpoints and grid momenta.
#[derive(Clone)]
pub struct Symbol {
    name: String,
    f: SymbolFn,
    x_support: Option<(Vec<f64>, f64)>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("name", &self.name)
            .field("x_support", &self.x_support)
            .finish()
    }
}

impl Symbol {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Symbol {
            name: name.into(),
            f: Arc::new(f),
            x_support: None,
        }
    }

    /// Declares that `a(x, ·) = 0` for `|x - center| > radius`.
    pub fn with_x_support(mut self, center: &[f64], radius: f64) -> Self {
        self.x_support = Some((center.to_vec(), radius));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn x_support(&self) -> Option<(&[f64], f64)> {
        self.x_support.as_ref().map(|(c, r)| (c.as_slice(), *r))
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        (self.f)(x, xi)
    }

    /// `a(x, ξ) = c`.
    pub fn constant(c: Complex64) -> Self {
        Symbol::new("constant", move |_, _| c)
    }

    /// `a(x, ξ) = h(x)`.
    pub fn position(h: &Profile) -> Self {
        let h2 = h.clone();
        let s = Symbol::new("position", move |x, _| Complex64::new(h2.value(x), 0.0));
        match (h.center(), h.support_radius()) {
            (Some(c), Some(r)) => s.with_x_support(c, r),
            _ => s,
        }
    }

    /// `a(x, ξ) = ĝ(ξ)`.
    pub fn momentum(g: &Profile) -> Self {
        let g = g.clone();
        Symbol::new("momentum", move |_, xi| Complex64::new(g.value(xi), 0.0))
    }

    /// `a(x, ξ) = h(x) ĝ(ξ)`.
    pub fn separable(h: &Profile, g: &Profile) -> Self {
        let (h2, g2) = (h.clone(), g.clone());
        let s = Symbol::new("separable", move |x, xi| {
            Complex64::new(h2.value(x) * g2.value(xi), 0.0)
        });
        match (h.center(), h.support_radius()) {
            (Some(c), Some(r)) => s.with_x_support(c, r),
            _ => s,
        }
    }

    /// A momentum-only symbol given by samples on `grid`'s momenta.
    pub fn momentum_sampled(field: MomentumField) -> Self {
        let field = Arc::new(field);
        Symbol::new("momentum-sampled", move |_, xi| {
            field.values[field.grid.momentum_index(xi)]
        })
    }

    /// `a_t(x, ξ) = a(x/t, ξ)`.
    pub fn scaled(&self, t: f64) -> Symbol {
        let f = self.f.clone();
        Symbol {
            name: format!("{}(x/{t})", self.name),
            f: Arc::new(move |x, xi| {
                let xs: Vec<f64> = x.iter().map(|v| v / t).collect();
                f(&xs, xi)
            }),
            x_support: self
                .x_support
                .as_ref()
                .map(|(c, r)| (c.iter().map(|v| v * t).collect(), r * t)),
        }
    }

    /// `Σ c_i a_i`.
    pub fn linear_combination(terms: &[(Complex64, Symbol)]) -> Symbol {
        let terms: Vec<(Complex64, SymbolFn)> =
            terms.iter().map(|(c, s)| (*c, s.f.clone())).collect();
        Symbol::new("combination", move |x, xi| {
            terms.iter().map(|(c, f)| c * f(x, xi)).sum()
        })
    }

    /// Whether the declared x-support bounds the true support, sampled on the
    /// half-integer refinement of `grid` at the grid momenta.
    pub fn declared_support_holds(&self, grid: &TorusGrid) -> bool {
        let Some((c, r)) = &self.x_support else {
            return true;
        };
        let l = grid.side() as i64;
        let n = (2 * l) as usize;
        let momenta = grid.momenta();
        (0..n.pow(grid.dim() as u32)).all(|mut j| {
            let mut z = vec![0.0; grid.dim()];
            for zi in z.iter_mut().rev() {
                *zi = (j % n) as f64 / 2.0 - (l / 2) as f64;
                j /= n;
            }
            let dist: f64 = z.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            dist <= *r || momenta.iter().step_by(7).all(|xi| self.eval(&z, xi) == Complex64::new(0.0, 0.0))
        })
    }
}

/// A dense kernel on `grid × grid`, stored column-major (`kernel[(x, y)]`).
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeOperator {
    pub grid: TorusGrid,
    pub kernel: DMatrix<Complex64>,
}

impl LatticeOperator {
    pub fn from_kernel(grid: TorusGrid, kernel: DMatrix<Complex64>) -> Result<Self> {
        let n = grid.len();
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: kernel.nrows().max(kernel.ncols()),
            });
        }
        Ok(LatticeOperator { grid, kernel })
    }

    pub fn identity(grid: TorusGrid) -> Self {
        LatticeOperator {
            grid,
            kernel: DMatrix::identity(grid.len(), grid.len()),
        }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        LatticeOperator {
            grid,
            kernel: DMatrix::zeros(grid.len(), grid.len()),
        }
    }

    /// Multiplication by `h(x)`.
    pub fn diagonal(grid: TorusGrid, h: impl Fn(&[f64]) -> f64) -> Self {
        let d: Vec<Complex64> = (0..grid.len())
            .map(|i| Complex64::new(h(&grid.position_f64(i)), 0.0))
            .collect();
        LatticeOperator {
            grid,
            kernel: DMatrix::from_diagonal(&DVector::from_vec(d)),
        }
    }

    /// Dense kernel of the multiplier `m(D)`, given by momentum index.
    pub fn multiplier(grid: TorusGrid, m: &[Complex64]) -> Self {
        let conv = convolution_kernel(&grid, m);
        let n = grid.len();
        let kernel = DMatrix::from_fn(n, n, |x, y| {
            let xv = grid.position(x);
            let yv = grid.position(y);
            let w: Vec<i64> = xv.iter().zip(&yv).map(|(a, b)| a - b).collect();
            conv[grid.position_index(&w)]
        });
        LatticeOperator { grid, kernel }
    }

    pub fn apply(&self, psi: &LatticeState) -> LatticeState {
        let v = DVector::from_column_slice(&psi.amplitudes);
        LatticeState {
            grid: self.grid,
            amplitudes: (&self.kernel * v).as_slice().to_vec(),
        }
    }

    pub fn adjoint(&self) -> Self {
        LatticeOperator {
            grid: self.grid,
            kernel: self.kernel.adjoint(),
        }
    }

    pub fn sub(&self, other: &LatticeOperator) -> Self {
        LatticeOperator {
            grid: self.grid,
            kernel: &self.kernel - &other.kernel,
        }
    }

    pub fn add(&self, other: &LatticeOperator) -> Self {
        LatticeOperator {
            grid: self.grid,
            kernel: &self.kernel + &other.kernel,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        LatticeOperator {
            grid: self.grid,
            kernel: &self.kernel * c,
        }
    }

    /// `max |k(x,y) - conj(k(y,x))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.kernel.nrows();
        let mut m: f64 = 0.0;
        for y in 0..n {
            for x in 0..=y {
                m = m.max((self.kernel[(x, y)] - self.kernel[(y, x)].conj()).norm());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.kernel.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `f(x) · A`.
    pub fn scale_rows(&self, f: impl Fn(&[f64]) -> f64) -> Self {
        let w: Vec<f64> = (0..self.grid.len())
            .map(|i| f(&self.grid.position_f64(i)))
            .collect();
        let mut k = self.kernel.clone();
        for mut col in k.column_iter_mut() {
            for (v, wi) in col.iter_mut().zip(&w) {
                *v *= wi;
            }
        }
        LatticeOperator {
            grid: self.grid,
            kernel: k,
        }
    }

    /// `m(D) · A`, one FFT pair per column.
    pub fn left_multiplier(&self, m: &[Complex64], exec: Exec) -> Self {
        let n = self.grid.len();
        let grid = self.grid;
        let mut k = self.kernel.clone();
        exec.for_each_chunk(k.as_mut_slice(), n, |_, col| {
            let s = LatticeState {
                grid,
                amplitudes: col.to_vec(),
            };
            col.copy_from_slice(&apply_multiplier_values(&s, m).amplitudes);
        });
        LatticeOperator { grid, kernel: k }
    }

    /// `A · m(D)`, computed as `(conj(m)(D) A^*)^*`.
    pub fn right_multiplier(&self, m: &[Complex64], exec: Exec) -> Self {
        let mc: Vec<Complex64> = m.iter().map(|v| v.conj()).collect();
        self.adjoint().left_multiplier(&mc, exec).adjoint()
    }

    /// `U A U^*` for the unitary multiplier `U = m(D)`.
    pub fn conjugate_by_multiplier(&self, m: &[Complex64], exec: Exec) -> Self {
        self.left_multiplier(m, exec).right_multiplier(
            &m.iter().map(|v| v.conj()).collect::<Vec<_>>(),
            exec,
        )
    }
}

/// `c(w) = L^{-d} Σ_k m(p_k) e^{ip_k·w}` indexed by site of `w`.
fn convolution_kernel(grid: &TorusGrid, m: &[Complex64]) -> Vec<Complex64> {
    let field = MomentumField {
        grid: *grid,
        values: m.to_vec(),
    };
    // inverse_fourier gives (2π)^{-d/2}(2π/L)^d Σ m e^{ipx}; rescale to L^{-d}.
    let s = crate::grid::inverse_fourier(&field);
    let c = (2.0 * std::f64::consts::PI).powf(-(grid.dim() as f64) / 2.0);
    s.amplitudes.iter().map(|v| v * c).collect()
}

/// One axis of the midpoint bookkeeping: for each doubled midpoint index, the
/// `(x, y, w-bin, weight)` tuples it feeds.
fn axis_entries(l: usize) -> Vec<Vec<(usize, usize, usize, f64)>> {
    let li = l as i64;
    let wrap_idx = |v: i64| (v + li / 2).rem_euclid(li) as usize;
    (0..2 * l)
        .map(|j| {
            let z2 = j as i64 - li; // 2z
            let mut out = Vec::new();
            for w in -li / 2..li / 2 {
                let bin = w.rem_euclid(li) as usize;
                if w == -li / 2 {
                    for y2 in [z2 + li / 2, z2 - li / 2] {
                        if y2 % 2 == 0 {
                            let y = y2 / 2;
                            out.push((wrap_idx(y - li / 2), wrap_idx(y), bin, 0.5));
                        }
                    }
                } else {
                    let y2 = z2 - w;
                    if y2 % 2 == 0 {
                        let y = y2 / 2;
                        out.push((wrap_idx(y + w), wrap_idx(y), bin, 1.0));
                    }
                }
            }
            out
        })
        .collect()
}

pub fn weyl_quantize(a: &Symbol, grid: &TorusGrid) -> Result<LatticeOperator> {
    weyl_quantize_with(a, grid, Exec::default())
}

/// Weyl quantization with an explicit execution mode.
pub fn weyl_quantize_with(a: &Symbol, grid: &TorusGrid, exec: Exec) -> Result<LatticeOperator> {
    let d = grid.dim();
    let l = grid.side();
    let n = grid.len();
    let axis = axis_entries(l);
    let momenta = grid.momenta();
    let bins: Vec<usize> = (0..n)
        .map(|m| {
            grid.unravel(m)
                .iter()
                .fold(0, |acc, &j| acc * l + grid.momentum_integer(j).rem_euclid(l as i64) as usize)
        })
        .collect();
    let nz = (2 * l).pow(d as u32);
    let scale = 1.0 / n as f64;

    let contributions: Vec<Result<Vec<(usize, Complex64)>>> = exec.map_range(nz, |zi| {
        let mut zj = vec![0usize; d];
        let mut rest = zi;
        for v in zj.iter_mut().rev() {
            *v = rest % (2 * l);
            rest /= 2 * l;
        }
        let z: Vec<f64> = zj.iter().map(|&j| j as f64 / 2.0 - (l / 2) as f64).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut any = false;
        for (m, xi) in momenta.iter().enumerate() {
            let v = a.eval(&z, xi);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::SymbolNotEvaluable { point: z.clone() });
            }
            any |= v != Complex64::new(0.0, 0.0);
            buf[bins[m]] = v;
        }
        if !any {
            return Ok(Vec::new());
        }
        grid.fft_all_axes(&mut buf, true);
        let mut out = Vec::new();
        let lists: Vec<&Vec<(usize, usize, usize, f64)>> = zj.iter().map(|&j| &axis[j]).collect();
        let mut idx = vec![0usize; d];
        if lists.iter().any(|v| v.is_empty()) {
            return Ok(out);
        }
        loop {
            let (mut x, mut y, mut b, mut w) = (0usize, 0usize, 0usize, 1.0);
            for (k, list) in lists.iter().enumerate() {
                let e = list[idx[k]];
                x = x * l + e.0;
                y = y * l + e.1;
                b = b * l + e.2;
                w *= e.3;
            }
            out.push((x + y * n, buf[b] * (w * scale)));
            let mut k = d;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < lists[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    });
    let mut kernel = DMatrix::<Complex64>::zeros(n, n);
    let data = kernel.as_mut_slice();
    for c in contributions {
        for (i, v) in c? {
            data[i] += v;
        }
    }
    Ok(LatticeOperator {
        grid: *grid,
        kernel,
    })
}

pub const NORM_MAX_ITERATIONS: usize = 20_000;
const NORM_SEED: u64 = 0x6e6f726d;

/// Largest singular value by power iteration on `A^*A` from a seeded start vector.
pub fn operator_norm(a: &LatticeOperator, tol: f64) -> Result<f64> {
    matrix_norm(&a.kernel, tol)
}

pub fn matrix_norm(k: &DMatrix<Complex64>, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::pre("operator_norm", "tol must be positive"));
    }
    if k.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::pre("operator_norm", "kernel has non-finite entries"));
    }
    let n = k.ncols();
    if n == 0 || k.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
    let mut v = DVector::from_fn(n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut prev = 0.0;
    let mut calm = 0;
    let mut sigma = 0.0;
    for _ in 0..NORM_MAX_ITERATIONS {
        let w = k * &v;
        sigma = w.norm();
        if sigma == 0.0 {
            return Ok(0.0);
        }
        let u = k.ad_mul(&w);
        let un = u.norm();
        if un == 0.0 {
            return Ok(sigma);
        }
        v = u / Complex64::new(un, 0.0);
        if (sigma - prev).abs() <= 0.1 * tol * sigma {
            calm += 1;
            if calm >= 3 {
                return Ok(sigma);
            }
        } else {
            calm = 0;
        }
        prev = sigma;
    }
    Err(Error::NormNotConverged {
        iterations: NORM_MAX_ITERATIONS,
        estimate: sigma,
        last_iterate: v.as_slice().to_vec(),
    })
}

/// `(C C')^{1/2}` with `C` the maximal row ℓ¹ sum and `C'` the maximal column ℓ¹ sum.
pub fn schur_bound(a: &LatticeOperator) -> f64 {
    matrix_schur_bound(&a.kernel)
}

pub fn matrix_schur_bound(k: &DMatrix<Complex64>) -> f64 {
    let rows = (0..k.nrows())
        .map(|r| k.row(r).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let cols = (0..k.ncols())
        .map(|c| k.column(c).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    (rows * cols).sqrt()
}

/// How `∇ĝ` is obtained for the product expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    Analytic,
    Spectral,
}

/// Default relative tolerance for residual norms.
pub const RESIDUAL_NORM_TOL: f64 = 1e-9;

fn no_wrap(op: &'static str, reach: f64, grid: &TorusGrid) -> Result<()> {
    let half = grid.side() as f64 / 2.0;
    if reach >= half {
        return Err(Error::pre(op, format!("no-wrap violated: reach {reach:.3} >= L/2 = {half}")));
    }
    Ok(())
}

/// `‖h_t(x)ĝ(D) - (h_t ĝ)^w - (i/2t)((∇h)_t·∇ĝ)^w‖`.
pub fn expansion_residual_moyal(
    h: &Profile,
    ghat: &Profile,
    grid: &TorusGrid,
    t: f64,
    mode: GradientMode,
    exec: Exec,
) -> Result<f64> {
    let op = "expansion_residual_moyal";
    if !(t >= 1.0) {
        return Err(Error::pre(op, "t must be at least 1"));
    }
    h.validate(grid.dim())?;
    ghat.validate(grid.dim())?;
    if let Some(r) = h.reach() {
        no_wrap(op, r * t, grid)?;
    } else if !matches!(h, Profile::Constant { .. }) {
        return Err(Error::pre(op, "h must have bounded support"));
    }
    let d = grid.dim();
    let gvals: Vec<Complex64> = (0..grid.len())
        .map(|m| Complex64::new(ghat.value(&grid.momentum(m)), 0.0))
        .collect();
    let lhs = LatticeOperator::multiplier(*grid, &gvals).scale_rows(|x| {
        let xs: Vec<f64> = x.iter().map(|v| v / t).collect();
        h.value(&xs)
    });
    let grad_g: Vec<Vec<f64>> = match mode {
        GradientMode::Analytic => (0..grid.len())
            .map(|m| ghat.gradient(&grid.momentum(m)))
            .collect(),
        GradientMode::Spectral => {
            let field = MomentumField {
                grid: *grid,
                values: gvals.clone(),
            };
            let parts: Vec<MomentumField> =
                (0..d).map(|j| spectral_derivative(&field, j)).collect();
            (0..grid.len())
                .map(|m| parts.iter().map(|p| p.values[m].re).collect())
                .collect()
        }
    };
    let grad_g = Arc::new(grad_g);
    let g2 = *grid;
    let (h2, gh2) = (h.clone(), ghat.clone());
    let sym = Symbol::new("moyal", move |z, xi| {
        let zs: Vec<f64> = z.iter().map(|v| v / t).collect();
        let m = g2.momentum_index(xi);
        let dh = h2.gradient(&zs);
        let corr: f64 = dh.iter().zip(&grad_g[m]).map(|(a, b)| a * b).sum();
        Complex64::new(h2.value(&zs) * gh2.value(xi), corr / (2.0 * t))
    });
    let w = weyl_quantize_with(&sym, grid, exec)?;
    operator_norm(&lhs.sub(&w), RESIDUAL_NORM_TOL)
}

/// `‖(1 - h_t(x)) (a_t)^w‖` for `h ≡ 1` on the declared x-support of `a`.
pub fn localization_residual(
    h: &Profile,
    a: &Symbol,
    grid: &TorusGrid,
    t: f64,
    exec: Exec,
) -> Result<f64> {
    let op = "localization_residual";
    if !(t > 0.0) {
        return Err(Error::pre(op, "t must be positive"));
    }
    h.validate(grid.dim())?;
    let Some((c, r)) = a.x_support() else {
        return Err(Error::pre(op, "symbol needs a declared x-support"));
    };
    if !h.is_one_on_ball(c, r, 201) {
        return Err(Error::pre(op, "h is not identically 1 on the declared support of a"));
    }
    let at = weyl_quantize_with(&a.scaled(t), grid, exec)?;
    let res = at.scale_rows(|x| {
        let xs: Vec<f64> = x.iter().map(|v| v / t).collect();
        1.0 - h.value(&xs)
    });
    operator_norm(&res, RESIDUAL_NORM_TOL)
}

/// `‖e^{iΣ(D)t} (a_t)^w e^{-iΣ(D)t} - (a_{1,t})^w‖` with `a₁(x,ξ) = a(x + ∇Σ(ξ), ξ)`.
pub fn conjugation_residual(
    a: &Symbol,
    sigma: &Dispersion,
    grid: &TorusGrid,
    t: f64,
    exec: Exec,
) -> Result<f64> {
    let op = "conjugation_residual";
    if sigma.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: sigma.dim(),
        });
    }
    if let Some((c, r)) = a.x_support() {
        let cn = crate::profile::norm(c);
        no_wrap(op, (cn + r) * t + sigma.max_speed(grid) * t, grid)?;
    }
    let u: Vec<Complex64> = (0..grid.len())
        .map(|m| Complex64::from_polar(1.0, sigma.value(&grid.momentum(m)) * t))
        .collect();
    let lhs = weyl_quantize_with(&a.scaled(t), grid, exec)?.conjugate_by_multiplier(&u, exec);
    let (a2, s2) = (a.clone(), sigma.clone());
    let a1 = Symbol::new("translated", move |x, xi| {
        let v = s2.gradient(xi);
        let y: Vec<f64> = x.iter().zip(&v).map(|(p, q)| p / t + q).collect();
        a2.eval(&y, xi)
    });
    let rhs = weyl_quantize_with(&a1, grid, exec)?;
    operator_norm(&lhs.sub(&rhs), RESIDUAL_NORM_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::apply_multiplier;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn constant_symbol_is_identity() {
        for (d, l) in [(1, 16), (2, 6)] {
            let g = TorusGrid::new(d, l).unwrap();
            let a = weyl_quantize(&Symbol::constant(c(1.0)), &g).unwrap();
            assert!(a.sub(&LatticeOperator::identity(g)).max_abs() < 1e-13);
        }
    }

    #[test]
    fn momentum_symbol_is_multiplier() {
        let g = TorusGrid::new(1, 32).unwrap();
        let prof = Profile::bump(&[0.3], 1.5, 1.0);
        let a = weyl_quantize(&Symbol::momentum(&prof), &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = LatticeState::random(g, &mut rng);
        let direct = apply_multiplier(&psi, |p| c(prof.value(p)));
        assert!(a.apply(&psi).sub(&direct).norm() < 1e-12);
        let m: Vec<Complex64> = (0..g.len()).map(|i| c(prof.value(&g.momentum(i)))).collect();
        assert!(a.sub(&LatticeOperator::multiplier(g, &m)).max_abs() < 1e-13);
    }

    #[test]
    fn position_symbol_is_diagonal() {
        let g = TorusGrid::new(2, 8).unwrap();
        let h = Profile::bump(&[0.5, -1.0], 3.0, 1.0);
        let a = weyl_quantize(&Symbol::position(&h), &g).unwrap();
        let diag = LatticeOperator::diagonal(g, |x| h.value(x));
        assert!(a.sub(&diag).max_abs() < 1e-13);
    }

    #[test]
    fn real_symbols_are_self_adjoint_and_quantization_linear() {
        for (d, l) in [(1, 24), (2, 6)] {
            let g = TorusGrid::new(d, l).unwrap();
            let a = Symbol::new("a", |x: &[f64], xi: &[f64]| {
                c((x[0] * 0.7).sin() * (xi[0] + 0.3).cos() + x.iter().sum::<f64>() * 0.01)
            });
            let b = Symbol::new("b", |x: &[f64], xi: &[f64]| {
                Complex64::new((x[0] * 0.2).cos(), xi.iter().sum::<f64>().sin())
            });
            let aw = weyl_quantize(&a, &g).unwrap();
            assert!(aw.hermitian_defect() < 1e-12, "{}", aw.hermitian_defect());
            let (al, be) = (Complex64::new(0.3, -1.2), c(2.5));
            let comb = Symbol::linear_combination(&[(al, a.clone()), (be, b.clone())]);
            let lhs = weyl_quantize(&comb, &g).unwrap();
            let rhs = aw.scale(al).add(&weyl_quantize(&b, &g).unwrap().scale(be));
            assert!(lhs.sub(&rhs).max_abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_symbol() {
        let g = TorusGrid::new(1, 8).unwrap();
        let bad = Symbol::new("bad", |x: &[f64], _: &[f64]| c(1.0 / (x[0] - 0.5)));
        assert!(matches!(
            weyl_quantize(&bad, &g),
            Err(Error::SymbolNotEvaluable { .. })
        ));
    }

    #[test]
    fn norm_examples_and_svd_oracle() {
        let g = TorusGrid::new(1, 16).unwrap();
        let id = LatticeOperator::identity(g);
        assert!((operator_norm(&id, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        let d = LatticeOperator::diagonal(g, |x| if x[0] == 2.0 { -3.0 } else { 0.5 });
        assert!((operator_norm(&d, 1e-12).unwrap() - 3.0).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = LatticeState::random(g, &mut rng);
        let v = LatticeState::random(g, &mut rng);
        let k = DMatrix::from_fn(16, 16, |x, y| u.amplitudes[x] * v.amplitudes[y].conj());
        let r1 = operator_norm(&LatticeOperator::from_kernel(g, k).unwrap(), 1e-12).unwrap();
        assert!((r1 - u.norm() * v.norm()).abs() < 1e-10 * r1);
        for n in [5usize, 40, 100] {
            let k = DMatrix::from_fn(n, n, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let est = matrix_norm(&k, 1e-10).unwrap();
            let svd = k.clone().svd(false, false).singular_values.max();
            assert!((est - svd).abs() <= 1e-8 * svd, "{est} vs {svd}");
            assert!(est <= matrix_schur_bound(&k) + 1e-12);
        }
    }

    #[test]
    fn schur_examples() {
        let g = TorusGrid::new(1, 8).unwrap();
        assert_eq!(schur_bound(&LatticeOperator::identity(g)), 1.0);
        let k = DMatrix::from_element(8, 8, c(0.25));
        let a = LatticeOperator::from_kernel(g, k).unwrap();
        assert!((schur_bound(&a) - 2.0).abs() < 1e-15);
        assert!((operator_norm(&a, 1e-12).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn multiplier_products_match_dense() {
        let g = TorusGrid::new(1, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = DMatrix::from_fn(32, 32, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
        let a = LatticeOperator::from_kernel(g, k).unwrap();
        let m: Vec<Complex64> = (0..32)
            .map(|i| Complex64::from_polar(1.0, (g.momentum(i)[0] * 3.0).cos()))
            .collect();
        let md = LatticeOperator::multiplier(g, &m);
        let dense = &md.kernel * &a.kernel * md.kernel.adjoint();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let fast = a.conjugate_by_multiplier(&m, exec);
            assert!((fast.kernel - &dense).iter().all(|v| v.norm() < 1e-12));
        }
    }

    #[test]
    fn moyal_trivial_cases() {
        let g = TorusGrid::new(1, 64).unwrap();
        let h = Profile::bump(&[0.0], 1.0, 1.0);
        let gh = Profile::bump(&[0.0], 1.0, 1.0);
        let one = Profile::Constant { value: 1.0 };
        for mode in [GradientMode::Analytic, GradientMode::Spectral] {
            let r = expansion_residual_moyal(&one, &gh, &g, 4.0, mode, Exec::Parallel).unwrap();
            assert!(r < 1e-12, "{r}");
        }
        let r = expansion_residual_moyal(&h, &Profile::Constant { value: 2.0 }, &g, 4.0, GradientMode::Analytic, Exec::Parallel)
            .unwrap();
        assert!(r < 1e-12);
        assert!(expansion_residual_moyal(&h, &gh, &g, 40.0, GradientMode::Analytic, Exec::Parallel).is_err());
    }

    #[test]
    fn moyal_gradient_modes_agree() {
        let g = TorusGrid::new(1, 128).unwrap();
        let h = Profile::bump(&[0.0], 0.9, 4.0);
        let gh = Profile::bump(&[0.0], 3.1, 3.0);
        let a = expansion_residual_moyal(&h, &gh, &g, 16.0, GradientMode::Analytic, Exec::Parallel).unwrap();
        let s = expansion_residual_moyal(&h, &gh, &g, 16.0, GradientMode::Spectral, Exec::Parallel).unwrap();
        assert!((a - s).abs() < 1e-6 * a.max(1e-3), "{a} vs {s}");
    }

    #[test]
    fn localization_trivial_cases() {
        let g = TorusGrid::new(1, 64).unwrap();
        let a = Symbol::separable(&Profile::bump(&[0.0], 2.0, 1.0), &Profile::bump(&[0.0], 1.0, 1.0));
        let one = Profile::Constant { value: 1.0 };
        assert_eq!(localization_residual(&one, &a, &g, 4.0, Exec::Parallel).unwrap(), 0.0);
        let zero = Symbol::constant(c(0.0)).with_x_support(&[0.0], 1.0);
        let h = Profile::plateau(&[0.0], 4.0, 5.0);
        assert_eq!(localization_residual(&h, &zero, &g, 4.0, Exec::Parallel).unwrap(), 0.0);
        let narrow = Profile::plateau(&[0.0], 1.0, 2.0);
        assert!(localization_residual(&narrow, &a, &g, 4.0, Exec::Parallel).is_err());
    }

    #[test]
    fn conjugation_trivial_cases() {
        let g = TorusGrid::new(1, 64).unwrap();
        let a = Symbol::separable(&Profile::bump(&[0.0], 1.0, 1.0), &Profile::bump(&[0.0], 2.0, 1.0));
        let r = conjugation_residual(&a, &Dispersion::zero(1), &g, 4.0, Exec::Parallel).unwrap();
        assert!(r < 1e-12);
        let nn = Dispersion::nearest_neighbor(1, 1.0);
        let xi_only = Symbol::momentum(&Profile::bump(&[0.0], 2.0, 1.0));
        let r = conjugation_residual(&xi_only, &nn, &g, 4.0, Exec::Parallel).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn declared_support_sampling() {
        let g = TorusGrid::new(1, 16).unwrap();
        let good = Symbol::position(&Profile::bump(&[0.0], 2.0, 1.0));
        assert!(good.declared_support_holds(&g));
        let lying = Symbol::position(&Profile::bump(&[0.0], 4.0, 1.0)).with_x_support(&[0.0], 1.0);
        assert!(!lying.declared_support_holds(&g));
    }
}
