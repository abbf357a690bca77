use num_complex::Complex;
use proptest::prelude::*;
use ringlab_core::freeprob::{free_convolve_bernoulli, s_transform, sd_solve};
use ringlab_core::measures::{ks_distance, stieltjes_invert};
use ringlab_core::quad::linspace;
use ringlab_core::ringlaw::{radial_density_stransform, ring_radii};
use ringlab_core::Measure;

const YS: [f64; 10] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

fn atomic() -> impl Strategy<Value = Measure> {
    prop::collection::vec((-5.0..5.0f64, 0.01..1.0f64), 1..8).prop_map(|pairs| {
        let (l, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Measure::atoms_normalized(&l, &w).unwrap()
    })
}

fn gridded(lo: std::ops::Range<f64>) -> impl Strategy<Value = Measure> {
    (lo, prop::collection::vec((0.05..1.0f64, 0.0..2.0f64), 2..12)).prop_map(|(start, cells)| {
        let mut grid = vec![start];
        let mut values = vec![0.0];
        for (w, v) in cells {
            grid.push(grid.last().unwrap() + w);
            values.push(v + 0.01);
        }
        *values.last_mut().unwrap() = 0.0;
        Measure::grid_normalized(grid, values).unwrap()
    })
}

fn any_measure() -> impl Strategy<Value = Measure> {
    prop_oneof![atomic(), gridded(-3.0..0.0)]
}

fn positive_atoms() -> impl Strategy<Value = Measure> {
    prop::collection::vec((0.5..3.0f64, 0.05..1.0f64), 1..5).prop_map(|pairs| {
        let (l, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Measure::atoms_normalized(&l, &w).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn stieltjes_tail_bound(mu in any_measure()) {
        for y in YS {
            let inside = mu.cdf_left(y) - mu.cdf(-y);
            let g = mu.stieltjes(Complex::new(0.0, y)).unwrap();
            prop_assert!(inside <= 2.0 * y * g.im.abs() + 1e-12, "y {y}: {inside} > {}", 2.0 * y * g.im.abs());
        }
    }

    #[test]
    fn stieltjes_maps_upper_to_lower(mu in any_measure(), x in -6.0..6.0f64, y in 0.01..10.0f64) {
        let g = mu.stieltjes(Complex::new(x, y)).unwrap();
        prop_assert!(g.im < 0.0);
        prop_assert!(g.norm() * y <= 1.0 + 1e-12);
    }

    #[test]
    fn symmetrize_keeps_even_moments(mu in prop_oneof![positive_atoms(), gridded(0.0..2.0)]) {
        let sym = mu.symmetrize().unwrap();
        prop_assert!(sym.is_symmetric());
        prop_assert!(sym.moment(1, true).unwrap().abs() < 1e-9);
        prop_assert!(sym.moment(3, true).unwrap().abs() < 1e-8);
        let m2 = mu.moment(2, false).unwrap();
        prop_assert!((sym.moment(2, false).unwrap() - m2).abs() < 1e-6 * (1.0 + m2));
    }

    #[test]
    fn square_pushforward_moments(mu in prop_oneof![positive_atoms(), gridded(0.2..2.0)]) {
        let sq = mu.pushforward_square().unwrap();
        for k in 1..=2 {
            let lhs = sq.moment(k, true).unwrap();
            let rhs = mu.moment(2 * k, true).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-4 * rhs, "k {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn s_transform_of_point_mass(c in 0.1..10.0f64, t in 0.01..0.99f64) {
        let s = s_transform(&Measure::dirac(c), t).unwrap();
        prop_assert!((s * c - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inversion_recovers_density(mu in gridded(-2.0..0.0)) {
        let (lo, hi) = mu.support();
        let grid = linspace(lo - 0.5, hi + 0.5, 1601);
        let eta = 2e-3;
        let at = |h: f64| -> Vec<Complex<f64>> {
            grid.iter().map(|x| mu.stieltjes(Complex::new(*x, h)).unwrap()).collect()
        };
        let inv = stieltjes_invert(&grid, &at(eta), Some(&at(eta / 2.0)), eta).unwrap();
        prop_assert!((inv.recovered_mass - 1.0).abs() < 2e-2);
        let ks = ks_distance(&inv.measure, &mu);
        prop_assert!(ks < 5e-3, "KS {ks}");
    }

    #[test]
    fn sd_solution_invariants(mu in positive_atoms(), rho in 0.2..2.0f64, x in -4.0..4.0f64, y in 0.05..2.0f64) {
        let sym = mu.symmetrize().unwrap();
        let z = Complex::new(x, y);
        let sol = sd_solve(&sym, rho, z, 1e-12).unwrap();
        prop_assert!(sol.g.im < 0.0);
        prop_assert!(sol.g.norm() * y <= 1.0 + 1e-9);
        prop_assert!(sol.residual < 1e-9);
        prop_assert!(sol.on_bernoulli_branch(rho, 1e-8));
        // G_ν(z) = G_θ̃(z₂) with Im z₂ ≥ Im z
        prop_assert!(sol.z2.im >= y * (1.0 - 1e-6));
        let direct = sym.stieltjes(sol.z2).unwrap();
        prop_assert!((direct - sol.g).norm() < 1e-8);
    }

    #[test]
    fn ring_law_is_a_single_normalized_ring(mu in positive_atoms()) {
        let (a, b) = ring_radii(&mu).unwrap();
        prop_assume!(b - a > 1e-3);
        let law = radial_density_stransform(&mu, &linspace(0.0, 1.2 * b, 61)).unwrap();
        prop_assert!((law.raw_mass - 1.0).abs() < 1e-2, "raw mass {}", law.raw_mass);
        prop_assert!(law.cdf(a * (1.0 - 1e-9)) < 1e-12);
        prop_assert!((law.cdf(b) - 1.0).abs() < 1e-12);
        prop_assert!(law.internal_gaps().is_empty(), "gaps {:?}", law.internal_gaps());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn free_convolution_adds_variances(mu in gridded(0.3..1.5), rho in 0.3..1.5f64) {
        let var = mu.moment(2, false).unwrap();
        let r = mu.support().1 + rho + 1.0;
        let grid = linspace(-r, r, 2001);
        let conv = free_convolve_bernoulli(&mu, rho, &grid, 1e-3).unwrap();
        let got = conv.measure.moment(2, false).unwrap();
        prop_assert!((got - (var + rho * rho)).abs() < 1e-3 * (var + rho * rho), "{got} vs {}", var + rho * rho);
    }
}
