use proptest::prelude::*;
use varexp_core::dyadic::{dyadic_lattice, mask_measure, maximal_function};
use varexp_core::exponent::ExponentField;
use varexp_core::grid::{gradient, integrate, CellField, Grid, GridFunction};
use varexp_core::operator::{energy, energy_gradient, flux_with_exponent, FluxParams, Variant};
use varexp_core::varlp::{luxemburg_norm, marcinkiewicz_norm, modular};
use varexp_core::Region;

fn grid2(n: usize) -> Grid {
    Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap()
}

fn cell_field(n: usize, vals: &[f64]) -> CellField {
    CellField::new(grid2(n), 1, vals.to_vec()).unwrap()
}

fn exponent(n: usize, a: f64, b: f64, c: f64) -> ExponentField {
    ExponentField::from_fn(grid2(n), |x| a + b * x[0] + c * x[1] * x[1]).unwrap()
}

fn variant_of(i: u8) -> Variant {
    match i % 3 {
        0 => Variant::Power,
        1 => Variant::Shifted,
        _ => Variant::Squared,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_is_linear_and_additive(
        a in proptest::collection::vec(-5.0f64..5.0, 36),
        b in proptest::collection::vec(-5.0f64..5.0, 36),
        s in -3.0f64..3.0,
        cut in 0.05f64..0.95,
    ) {
        let f = cell_field(6, &a);
        let g = cell_field(6, &b);
        let comb = f.map(|c, v| v[0] * s + g.cell(c)[0]);
        let dom = f.grid().domain();
        let lhs = integrate(&comb, &dom).unwrap();
        let rhs = s * integrate(&f, &dom).unwrap() + integrate(&g, &dom).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let left = Region::new(&[0.0, 0.0], &[cut, 1.0]).unwrap();
        let right = Region::new(&[cut, 0.0], &[1.0, 1.0]).unwrap();
        let split = integrate(&f, &left).unwrap() + integrate(&f, &right).unwrap();
        prop_assert!((split - integrate(&f, &dom).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn luxemburg_unit_ball_and_modular_comparison(
        vals in proptest::collection::vec(0.0f64..4.0, 64),
        a in 1.1f64..2.0, b in 0.0f64..1.5, c in 0.0f64..1.0,
    ) {
        prop_assume!(vals.iter().any(|&v| v > 1e-3));
        let p = exponent(8, a, b, c);
        let f = cell_field(8, &vals);
        let dom = f.grid().domain();
        let norm = luxemburg_norm(&f, &p, &dom).unwrap().norm;
        let scaled = f.map(|_, v| v[0] / norm);
        prop_assert!((modular(&scaled, &p, &dom).unwrap() - 1.0).abs() <= 1e-8);
        let m = modular(&f, &p, &dom).unwrap();
        if m <= 1.0 {
            prop_assert!(norm <= 1.0 + 1e-9);
        }
        if norm <= 1.0 {
            prop_assert!(m <= norm * (1.0 + 1e-8));
        }
        let doubled = f.map(|_, v| 2.0 * v[0]);
        let n2 = luxemburg_norm(&doubled, &p, &dom).unwrap().norm;
        prop_assert!((n2 - 2.0 * norm).abs() <= 1e-8 * n2);
    }

    #[test]
    fn weak_norm_is_below_strong_norm(
        vals in proptest::collection::vec(-3.0f64..3.0, 36),
        s in 1.0f64..4.0,
    ) {
        let f = cell_field(6, &vals);
        let dom = f.grid().domain();
        let weak = marcinkiewicz_norm(&f, s, &dom).unwrap();
        let strong = integrate(&f.map(|_, v| v[0].abs().powf(s)), &dom).unwrap().powf(1.0 / s);
        prop_assert!(weak <= strong * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn flux_is_monotone_and_odd(
        z in proptest::collection::vec(-10.0f64..10.0, 4),
        xi in proptest::collection::vec(-10.0f64..10.0, 4),
        p in 1.05f64..5.0,
        gamma in 0.0f64..2.0,
        v in 0u8..3,
    ) {
        let params = FluxParams::new(gamma, variant_of(v)).unwrap();
        let mut a = [0.0; 4];
        let mut b = [0.0; 4];
        flux_with_exponent(p, &z, &params, &mut a);
        flux_with_exponent(p, &xi, &params, &mut b);
        let mono: f64 = (0..4).map(|i| (a[i] - b[i]) * (z[i] - xi[i])).sum();
        let scale: f64 = (0..4).map(|i| (a[i].abs() + b[i].abs()) * (z[i].abs() + xi[i].abs())).sum();
        prop_assert!(mono >= -1e-12 * (1.0 + scale));
        let neg: Vec<f64> = z.iter().map(|t| -t).collect();
        let mut c = [0.0; 4];
        flux_with_exponent(p, &neg, &params, &mut c);
        for i in 0..4 {
            prop_assert_eq!(c[i], -a[i]);
        }
    }

    #[test]
    fn energy_is_convex_along_segments(
        u in proptest::collection::vec(-2.0f64..2.0, 25),
        w in proptest::collection::vec(-2.0f64..2.0, 25),
        gvals in proptest::collection::vec(-1.0f64..1.0, 32),
        a in 1.2f64..3.5,
        v in 0u8..3,
    ) {
        let g = grid2(4);
        let p = ExponentField::from_fn(g, |x| a + 0.5 * x[0]).unwrap();
        let params = FluxParams::new(0.1, variant_of(v)).unwrap();
        let gf = CellField::new(g, 2, gvals).unwrap();
        let uf = GridFunction::new(g, 1, u.clone()).unwrap();
        let wf = GridFunction::new(g, 1, w.clone()).unwrap();
        let mid = GridFunction::new(g, 1, u.iter().zip(&w).map(|(x, y)| 0.5 * (x + y)).collect()).unwrap();
        let e = |f: &GridFunction| energy(f, &gf, &p, &params, &g.domain()).unwrap();
        prop_assert!(e(&mid) <= 0.5 * (e(&uf) + e(&wf)) + 1e-12);
    }

    #[test]
    fn energy_gradient_matches_central_differences(
        u in proptest::collection::vec(-1.0f64..1.0, 25),
        dir in proptest::collection::vec(-1.0f64..1.0, 25),
        gvals in proptest::collection::vec(-1.0f64..1.0, 32),
        a in 1.5f64..3.0,
        gamma in prop::sample::select(vec![1.0, 1e-2]),
    ) {
        let g = grid2(4);
        let p = ExponentField::from_fn(g, |x| a + 0.5 * x[1]).unwrap();
        let params = FluxParams::new(gamma, Variant::Squared).unwrap();
        let gf = CellField::new(g, 2, gvals).unwrap();
        let uf = GridFunction::new(g, 1, u.clone()).unwrap();
        let mask = vec![false; g.node_count()];
        let grad = energy_gradient(&uf, &gf, &p, &params, &g.domain(), &mask).unwrap();
        let analytic: f64 = grad.values().iter().zip(&dir).map(|(x, y)| x * y).sum();
        let t = 1e-6;
        let shifted = |s: f64| {
            let v: Vec<f64> = u.iter().zip(&dir).map(|(x, d)| x + s * d).collect();
            energy(&GridFunction::new(g, 1, v).unwrap(), &gf, &p, &params, &g.domain()).unwrap()
        };
        let fd = (shifted(t) - shifted(-t)) / (2.0 * t);
        prop_assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1e-3), "fd {} analytic {}", fd, analytic);
    }

    #[test]
    fn maximal_function_is_monotone_in_s_and_weak_type(
        vals in proptest::collection::vec(0.0f64..5.0, 256),
        lambda in 0.1f64..4.0,
    ) {
        let g = Grid::new(2, &[-0.5, -0.5], &[2.0, 2.0], &[16, 16]).unwrap();
        let f = CellField::new(g, 1, vals).unwrap();
        let root = Region::new(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let m1 = maximal_function(&f, &root, 1.0, 3).unwrap();
        let m2 = maximal_function(&f, &root, 2.0, 3).unwrap();
        for (a, b) in m1.values().iter().zip(m2.values()) {
            prop_assert!(*b >= *a * (1.0 - 1e-12));
        }
        let level: Vec<bool> = m1.values().iter().map(|&v| v > lambda).collect();
        let lhs = lambda * mask_measure(&g, &level);
        let rhs = 4.0 * integrate(&f, &root.scaled(2.0)).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }
}

#[test]
fn lattice_nesting_in_three_dimensions() {
    let root = Region::new(&[0.0, 0.0, 0.0], &[1.0, 2.0, 1.0]).unwrap();
    let cubes = dyadic_lattice(&root, 2);
    assert_eq!(cubes.len(), 1 + 8 + 64);
    for a in &cubes {
        for b in &cubes {
            assert!(a.region().disjoint_or_nested(&b.region()));
        }
    }
}

#[test]
fn gradient_of_affine_vector_field_is_exact() {
    let g = Grid::new(3, &[0.0, 0.0, 0.0], &[1.0, 1.0, 2.0], &[3, 2, 4]).unwrap();
    let u = GridFunction::from_fn(g, 2, |x, out| {
        out[0] = 1.0 + 2.0 * x[0] - x[2];
        out[1] = 0.5 * x[1] + 3.0 * x[2];
    });
    let du = gradient(&u);
    let expect = [2.0, 0.0, -1.0, 0.0, 0.5, 3.0];
    for c in 0..g.cell_count() {
        for (a, b) in du.cell(c).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
