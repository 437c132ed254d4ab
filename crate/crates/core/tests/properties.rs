use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use latwave::detector::{
    cook_wave_operator, detector_expectation, DetectorSpec, HamiltonianModel, ModelOptions,
    Potential,
};
use latwave::dispersion::{velocity_support, Dispersion};
use latwave::grid::{
    apply_multiplier, fourier, inverse_fourier, translate, LatticeState, TorusGrid,
};
use latwave::profile::Profile;
use latwave::regions::{
    check_delta_admissible, convex_hull, cone_monotone, fatten, minkowski_sum, RegionLiteral,
    RegionSet, SpectrumModel,
};
use latwave::weyl::{matrix_norm, matrix_schur_bound, weyl_quantize, Symbol};
use latwave::Complex64;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn state(grid: TorusGrid, seed: u64) -> LatticeState {
    LatticeState::random(grid, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn max_diff(a: &LatticeState, b: &LatticeState) -> f64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn grid_strategy() -> impl Strategy<Value = TorusGrid> {
    prop_oneof![
        (1usize..=512).prop_map(|h| TorusGrid::new(1, 2 * h).unwrap()),
        (1usize..=16).prop_map(|h| TorusGrid::new(2, 2 * h).unwrap()),
    ]
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn fourier_round_trip_and_parseval(grid in grid_strategy(), seed in any::<u64>()) {
        let psi = state(grid, seed);
        let f = fourier(&psi);
        let back = inverse_fourier(&f);
        let n = psi.norm();
        prop_assert!(max_diff(&psi, &back) <= 1e-12 * n.max(1e-300) * 10.0);
        prop_assert!((f.norm() - n).abs() <= 1e-12 * n);
    }

    #[test]
    fn multipliers_compose(h in 1usize..128, a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let grid = TorusGrid::new(1, 2 * h).unwrap();
        let psi = state(grid, seed);
        let m1 = move |p: &[f64]| Complex64::from_polar(1.0 + p[0].cos(), a * p[0]);
        let m2 = move |p: &[f64]| c(b * p[0].sin(), 0.5);
        let two = apply_multiplier(&apply_multiplier(&psi, m2), m1);
        let one = apply_multiplier(&psi, move |p| m1(p) * m2(p));
        prop_assert!(max_diff(&two, &one) <= 1e-12 * psi.norm() * 10.0);
    }

    #[test]
    fn translations_compose(grid in grid_strategy(), y1 in -50i64..50, y2 in -50i64..50, seed in any::<u64>()) {
        let psi = state(grid, seed);
        let d = grid.dim();
        let v1 = vec![y1; d];
        let v2: Vec<i64> = (0..d as i64).map(|k| y2 - k).collect();
        let sum: Vec<i64> = v1.iter().zip(&v2).map(|(a, b)| grid.wrap(a + b)).collect();
        let twice = translate(&translate(&psi, &v2), &v1);
        prop_assert_eq!(twice, translate(&psi, &sum));
    }

    #[test]
    fn free_evolution_is_unitary(h in 4usize..256, t in -500.0f64..500.0, seed in any::<u64>()) {
        let grid = TorusGrid::new(1, 2 * h).unwrap();
        let psi = state(grid, seed);
        let sigma = Dispersion::nearest_neighbor(1, 0.7);
        prop_assert!((sigma.evolve(&psi, t).norm() - psi.norm()).abs() < 1e-12 * psi.norm().max(1.0));
    }
}

/// Direct evaluation of `L^{-1} Σ_ξ a(mid, ξ) e^{i w ξ}` with `w` the minimal image
/// of `x - y` and both midpoints averaged when `|w| = L/2`.
fn weyl_direct(a: &Symbol, grid: &TorusGrid) -> DMatrix<Complex64> {
    let l = grid.side() as i64;
    let wrap = |v: f64| {
        let lf = l as f64;
        let r = (v + lf / 2.0).rem_euclid(lf) - lf / 2.0;
        r
    };
    DMatrix::from_fn(l as usize, l as usize, |i, j| {
        let (x, y) = (grid.position(i)[0], grid.position(j)[0]);
        let w = (x - y).rem_euclid(l);
        let choices: Vec<i64> = if 2 * w == l {
            vec![w, w - l]
        } else if 2 * w > l {
            vec![w - l]
        } else {
            vec![w]
        };
        let mut acc = c(0.0, 0.0);
        for &wc in &choices {
            let mid = wrap(y as f64 + wc as f64 / 2.0);
            for k in 0..grid.len() {
                let xi = grid.momentum(k)[0];
                acc += a.eval(&[mid], &[xi]) * Complex64::from_polar(1.0, wc as f64 * xi);
            }
        }
        acc / (choices.len() as f64 * l as f64)
    })
}

fn symbol(p: [f64; 4]) -> Symbol {
    Symbol::new("test", move |x, xi| {
        c(
            (-(x[0] / (2.0 + p[0].abs())).powi(2)).exp() * (1.0 + p[1] * xi[0].cos()),
            p[2] * (x[0] * 0.3).sin() * (p[3] * xi[0]).sin(),
        )
    })
}

fn real_symbol(p: [f64; 4]) -> Symbol {
    Symbol::new("real", move |x, xi| {
        c(p[0] * (x[0] / 3.0).cos() * xi[0].sin() + p[1] + p[2] * (x[0] * xi[0] * p[3]).cos(), 0.0)
    })
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn weyl_kernel_matches_direct_sum(h in 1usize..12, p in prop::array::uniform4(-2.0f64..2.0)) {
        let grid = TorusGrid::new(1, 2 * h).unwrap();
        let a = symbol(p);
        let k = weyl_quantize(&a, &grid).unwrap().kernel;
        let d = (k - weyl_direct(&a, &grid)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(d < 1e-12, "max deviation {d:e}");
    }

    #[test]
    fn weyl_quantization_is_linear(
        h in 1usize..16,
        p in prop::array::uniform4(-2.0f64..2.0),
        q in prop::array::uniform4(-2.0f64..2.0),
        alpha in (-2.0f64..2.0, -2.0f64..2.0),
        beta in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let grid = TorusGrid::new(1, 2 * h).unwrap();
        let (al, be) = (c(alpha.0, alpha.1), c(beta.0, beta.1));
        let combo = Symbol::linear_combination(&[(al, symbol(p)), (be, symbol(q))]);
        let lhs = weyl_quantize(&combo, &grid).unwrap().kernel;
        let rhs = weyl_quantize(&symbol(p), &grid).unwrap().kernel * al
            + weyl_quantize(&symbol(q), &grid).unwrap().kernel * be;
        prop_assert!((lhs - rhs).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn real_symbols_give_self_adjoint_kernels(h in 1usize..24, p in prop::array::uniform4(-2.0f64..2.0)) {
        let grid = TorusGrid::new(1, 2 * h).unwrap();
        let op = weyl_quantize(&real_symbol(p), &grid).unwrap();
        prop_assert!(op.hermitian_defect() < 1e-12);
    }

    #[test]
    fn schur_bound_dominates_norm(
        rows in 1usize..40,
        cols in 1usize..40,
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1600),
    ) {
        let k = DMatrix::from_fn(rows, cols, |i, j| {
            let (a, b) = entries[i * 40 + j];
            c(a, b)
        });
        let svd_norm = k.clone().singular_values().max();
        let bound = matrix_schur_bound(&k);
        prop_assert!(svd_norm <= bound * (1.0 + 1e-12));
        if let Ok(n) = matrix_norm(&k, 1e-10) {
            prop_assert!(n <= bound * (1.0 + 1e-12));
            prop_assert!(n <= svd_norm * (1.0 + 1e-12));
        }
    }
}

fn cloud(pts: &[(f64, f64)]) -> RegionSet {
    RegionSet::from_points(2, pts.iter().map(|&(a, b)| vec![a, b]).collect(), 0.0).unwrap()
}

fn same_set(a: &RegionSet, b: &RegionSet) -> bool {
    let (av, bv) = (a.to_vecs(), b.to_vecs());
    let close = |p: &Vec<f64>, q: &Vec<f64>| p.iter().zip(q).all(|(x, y)| (x - y).abs() < 1e-12);
    av.len() == bv.len()
        && av.iter().all(|p| bv.iter().any(|q| close(p, q)))
        && (a.delta() - b.delta()).abs() < 1e-15
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn hull_and_fattening_commute(
        pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..20),
        delta in 0.0f64..0.5,
    ) {
        let x = cloud(&pts);
        let a = convex_hull(&fatten(&x, delta).unwrap());
        let b = fatten(&convex_hull(&x), delta).unwrap();
        prop_assert!(same_set(&a, &b));
    }

    #[test]
    fn fattened_sum_inside_sum_of_fattenings(
        xs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8),
        ys in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8),
        delta in 0.0f64..0.3,
        probes in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 64),
    ) {
        let (x, y) = (cloud(&xs), cloud(&ys));
        let lhs = fatten(&minkowski_sum(&x, &y).unwrap(), delta).unwrap();
        let rhs = minkowski_sum(&fatten(&x, delta).unwrap(), &fatten(&y, delta).unwrap()).unwrap();
        for (a, b) in probes {
            let z = [a, b];
            if lhs.hull_distance_to(&z) <= lhs.delta() {
                prop_assert!(rhs.hull_distance_to(&z) <= rhs.delta() + 1e-12);
            }
        }
    }

    #[test]
    fn velocity_support_is_monotone(
        ps in prop::collection::vec(-PI..PI, 2..30),
        keep in prop::collection::vec(any::<bool>(), 30),
    ) {
        let sigma = Dispersion::nearest_neighbor(1, 1.0);
        let big = RegionSet::from_points(1, ps.iter().map(|p| vec![*p]).collect(), 0.0).unwrap();
        let sub: Vec<Vec<f64>> = ps.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| vec![*p]).collect();
        prop_assume!(!sub.is_empty());
        let small = RegionSet::from_points(1, sub, 0.0).unwrap();
        let vb = velocity_support(&big, &sigma).unwrap().to_vecs();
        for v in velocity_support(&small, &sigma).unwrap().points() {
            prop_assert!(vb.iter().any(|w| (w[0] - v[0]).abs() < 1e-15));
        }
    }

    #[test]
    fn cone_membership_is_monotone(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..10),
        x in (-4.0f64..4.0, -4.0f64..4.0),
        t in 0.05f64..3.0,
        stretch in 1.0f64..10.0,
    ) {
        let n = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
        let k = cloud(&pts.iter().map(|p| (p.0 - mx, p.1 - my)).collect::<Vec<_>>());
        let (first, second) = cone_monotone(&k, &[x.0, x.1], t, t * stretch).unwrap();
        prop_assert!(!first || second);
    }
}

fn ising_model() -> SpectrumModel {
    let sigma = Dispersion::ising_like(0.3).unwrap();
    SpectrumModel::free(&sigma, &TorusGrid::new(1, 128).unwrap(), 2, 4.0).unwrap()
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn shrinking_spectra_keeps_admissibility(keep in prop::collection::vec(any::<bool>(), 64)) {
        let cfg = latwave::harness::presets::admissible_patch();
        let a = cfg.admissibility.as_ref().unwrap();
        let model = ising_model();
        let sigma = Dispersion::ising_like(0.3).unwrap();
        let grid = TorusGrid::new(1, 128).unwrap();
        let shell = Some((&sigma, &grid));
        let delta = a.delta.resolve(shell).unwrap();
        let spectra: Vec<RegionSet> = a.spectra.iter().map(|s| s.resolve(shell).unwrap()).collect();
        let tol = cfg.tolerances["tol"];
        prop_assert!(check_delta_admissible(&delta, &spectra, &model, Some(tol)).admissible);
        let shrunk: Vec<RegionSet> = spectra
            .iter()
            .map(|s| {
                let pts: Vec<Vec<f64>> = s
                    .points()
                    .zip(keep.iter().cycle())
                    .filter(|(_, k)| **k)
                    .map(|(p, _)| p.to_vec())
                    .collect();
                if pts.is_empty() {
                    RegionSet::from_points(s.dim(), vec![s.point(0).to_vec()], s.delta()).unwrap()
                } else {
                    RegionSet::from_points(s.dim(), pts, s.delta()).unwrap()
                }
            })
            .collect();
        prop_assert!(check_delta_admissible(&delta, &shrunk, &model, Some(tol)).admissible);
    }
}

fn small_model(l: usize, depth: f64) -> HamiltonianModel {
    let grid = TorusGrid::new(1, l).unwrap();
    let v = Potential::GaussianWell { depth, width: 1.5, center: vec![0.0] }.sample(&grid);
    HamiltonianModel::new(grid, Dispersion::nearest_neighbor(1, 1.0), v, ModelOptions::default())
        .unwrap()
}

/// `⟨ψ, e^{itH} χ(D) h(x/t) χ(D) e^{-itH} ψ⟩` from an independent dense
/// eigendecomposition, returned as a complex number.
fn expectation_dense(l: usize, depth: f64, spec: &DetectorSpec, psi: &LatticeState, t: f64) -> Complex64 {
    let grid = TorusGrid::new(1, l).unwrap();
    let v = Potential::GaussianWell { depth, width: 1.5, center: vec![0.0] }.sample(&grid);
    // Σ(D) = m + 1 - cos D: kernel m + 1 on the diagonal, -1/2 on nearest neighbors.
    let h = DMatrix::from_fn(l, l, |i, j| {
        let d = (i as i64 - j as i64).rem_euclid(l as i64);
        let hop = if d == 0 { 2.0 } else if d == 1 || d == l as i64 - 1 { -0.5 } else { 0.0 };
        hop + if i == j { v[i] } else { 0.0 }
    });
    let e = h.symmetric_eigen();
    let u = DMatrix::from_fn(l, l, |i, j| c(e.eigenvectors[(i, j)], 0.0));
    let phase = DMatrix::from_diagonal(&DVector::from_fn(l, |k, _| Complex64::from_polar(1.0, -e.eigenvalues[k] * t)));
    let evolve = &u * phase * u.adjoint();
    let chi = DMatrix::from_fn(l, l, |x, y| {
        let mut acc = c(0.0, 0.0);
        for k in 0..l {
            let p = grid.momentum(k)[0];
            let (xx, yy) = (grid.position(x)[0], grid.position(y)[0]);
            acc += spec.chi.value(&[p]) * Complex64::from_polar(1.0, p * (xx - yy) as f64);
        }
        acc / l as f64
    });
    let hx = DMatrix::from_diagonal(&DVector::from_fn(l, |x, _| c(spec.h.value(&[grid.position_f64(x)[0] / t]), 0.0)));
    let ct = evolve.adjoint() * &chi * hx * &chi * &evolve;
    let v = DVector::from_column_slice(&psi.amplitudes);
    (v.adjoint() * ct * v)[(0, 0)]
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn detector_expectation_is_real_nonnegative(
        seed in any::<u64>(),
        t in 1.0f64..40.0,
        depth in 0.0f64..1.5,
        r in 0.3f64..1.5,
    ) {
        let l = 48;
        let m = small_model(l, depth);
        let psi = state(*m.grid(), seed);
        let spec = DetectorSpec {
            chi: Profile::bump(&[0.0], 2.5, 1.0),
            h: Profile::bump(&[0.4], r, 1.0),
            enforce_support_constraints: false,
        };
        let got = detector_expectation(&m, &spec, &psi, t).unwrap();
        let oracle = expectation_dense(l, depth, &spec, &psi, t);
        prop_assert!(got >= 0.0);
        prop_assert!(oracle.im.abs() < 1e-10 * psi.norm_sqr());
        prop_assert!((got - oracle.re).abs() < 1e-9 * psi.norm_sqr(), "{got} vs {oracle}");
    }

    #[test]
    fn bound_and_scattering_projections_resolve_identity(seed in any::<u64>(), depth in 0.3f64..2.0) {
        let m = small_model(64, depth);
        let psi = state(*m.grid(), seed);
        let pb = m.bound_projection(&psi);
        let ps = psi.sub(&pb);
        // P_bound is an orthogonal projection: idempotent and orthogonal to its complement.
        prop_assert!(max_diff(&m.bound_projection(&pb), &pb) < 1e-9);
        prop_assert!(pb.inner(&ps).norm() < 1e-9 * psi.norm_sqr());
        prop_assert!(max_diff(&pb.add(&ps), &psi) < 1e-12);
    }

    #[test]
    fn cook_wave_operator_preserves_norm(t in 4.0f64..28.0, height in -0.5f64..0.5) {
        let grid = TorusGrid::new(1, 256).unwrap();
        let v = Potential::Bump { height, center: vec![0.0], radius: 3.0, sharpness: 1.0 }.sample(&grid);
        let sigma = Dispersion::nearest_neighbor(1, 1.0);
        let m = HamiltonianModel::new(grid, sigma.clone(), v, ModelOptions::default()).unwrap();
        let w = latwave::dispersion::WavePacket::new(Profile::gaussian_like(&[PI / 2.0], 0.15, 0.55, 0.75));
        let psi = latwave::dispersion::wave_packet_state(&w, &sigma, &grid).unwrap();
        let r = cook_wave_operator(&m, &psi, t, 1.0).unwrap();
        prop_assert!((r.state.norm() - psi.norm()).abs() < 1e-9 * psi.norm());
    }
}

#[test]
fn region_literals_resolve_to_the_same_cloud() {
    let text = r#"{"type":"box","lo":[0.0,0.0],"hi":[1.0,2.0],"resolution":2}"#;
    let lit: RegionLiteral = serde_json::from_str(text).unwrap();
    let a = lit.resolve(None).unwrap();
    let b = RegionSet::box_region(&[0.0, 0.0], &[1.0, 2.0], 2).unwrap();
    assert!(same_set(&convex_hull(&a), &convex_hull(&b)));
}
