use proptest::prelude::*;

use boojum::anchoring::{default_profile, AnchoringParams};
use boojum::defects::{axis_census, Parity};
use boojum::energy::{EnergyModel, ModelParams, UnitField};
use boojum::grid::{build_grid, GridConfig, MeridianGrid};
use boojum::minimizer::{initial_field, perturb, solve, InitMode, SolveConfig};
use boojum::tangent_ode::{integrate, regular_start};
use boojum::tensor::UVector;

fn small_grid() -> MeridianGrid {
    build_grid(GridConfig::new(8, 12, 4.0, 1.05)).unwrap()
}

fn unit_vector() -> impl Strategy<Value = UVector> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(a, b, c)| a * a + b * b + c * c > 1e-4)
        .prop_map(|(a, b, c)| UVector::new(a, b, c).normalize())
}

fn mirrored(field: &UnitField, grid: &MeridianGrid) -> UnitField {
    UnitField::from_fn(grid, |idx| {
        let (i, j) = grid.lattice(idx);
        let u = field.values[grid.index(i, grid.n_p() - 1 - j)];
        UVector::new(u[0], u[1], -u[2])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn descent_is_monotone_and_stays_on_the_sphere(seed in 0u64..1000, scale in 0.05..0.8f64, nu in 0.0..5.0f64) {
        let grid = small_grid();
        let profile = default_profile(&AnchoringParams::default(), &grid).unwrap();
        let model = EnergyModel::new(&grid, &profile, ModelParams { nu, mu: 1.0 }).unwrap();
        let cfg = SolveConfig { max_iters: 60, ..SolveConfig::default() };
        let u0 = perturb(&initial_field(&grid, &InitMode::MeridianRotation, &cfg).unwrap(), &grid, scale, seed);
        let res = solve(&u0, &model, &cfg).unwrap();
        prop_assert!(res.energy_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(res.field.max_norm_deviation() < 1e-12);
        for idx in grid.boundary_indices().filter(|&i| grid.is_dirichlet(i)) {
            prop_assert_eq!(res.field.values[idx], UVector::new(0.0, 1.0, 0.0));
        }
    }

    #[test]
    fn census_parity_matches_jump_count(flips in proptest::sample::subsequence((1usize..9).collect::<Vec<_>>(), 0..8)) {
        let grid = small_grid();
        let field = UnitField::from_fn(&grid, |idx| {
            let (i, _) = grid.lattice(idx);
            let k = flips.iter().filter(|&&f| f <= i).count();
            UVector::new(0.0, if k % 2 == 0 { -1.0 } else { 1.0 }, 0.0)
        });
        let (north, south) = axis_census(&field, &grid).unwrap();
        for c in [&north, &south] {
            prop_assert_eq!(c.jumps.len(), flips.len());
            prop_assert_eq!(c.parity, Parity::of(flips.len()));
            prop_assert_eq!(c.parity == Parity::Odd, flips.len() % 2 == 1);
        }
    }

    #[test]
    fn csv_round_trip_is_exact(values in proptest::collection::vec(unit_vector(), 108)) {
        let grid = small_grid();
        prop_assert_eq!(grid.len(), values.len());
        let field = UnitField { values };
        let mut buf = Vec::new();
        field.write_csv(&grid, &mut buf).unwrap();
        let back = UnitField::read_csv(buf.as_slice(), grid.len(), 1).unwrap();
        prop_assert_eq!(back, field);
    }

    #[test]
    fn energy_is_mirror_invariant(seed in 0u64..1000, scale in 0.0..1.0f64) {
        let grid = small_grid();
        let profile = default_profile(&AnchoringParams::default(), &grid).unwrap();
        let model = EnergyModel::new(&grid, &profile, ModelParams::default()).unwrap();
        let u = perturb(&initial_field(&grid, &InitMode::MeridianRotation, &SolveConfig::default()).unwrap(), &grid, scale, seed);
        let e = model.energy(&u).unwrap().total;
        let m = model.energy(&mirrored(&u, &grid)).unwrap().total;
        prop_assert!((e - m).abs() <= 1e-12 * e.abs().max(1.0), "{} vs {}", e, m);
    }

    #[test]
    fn tangent_ode_commutes_with_v3_reflection(a in -0.5..0.5f64, b in -0.5..0.5f64) {
        let (v0, vp0) = regular_start(a, b, -1.0, 1e-2);
        let (w0, wp0) = regular_start(a, -b, -1.0, 1e-2);
        prop_assert_eq!(w0, UVector::new(v0[0], v0[1], -v0[2]));
        let t = integrate(v0, vp0, 1e-2, std::f64::consts::FRAC_PI_2, 1e-10).unwrap();
        let s = integrate(w0, wp0, 1e-2, std::f64::consts::FRAC_PI_2, 1e-10).unwrap();
        let (x, y) = (t.last(), s.last());
        prop_assert!((x.v[0] - y.v[0]).abs() < 1e-12 && (x.v[1] - y.v[1]).abs() < 1e-12);
        prop_assert!((x.v[2] + y.v[2]).abs() < 1e-12 && (x.v_prime[2] + y.v_prime[2]).abs() < 1e-12);
        prop_assert!((t.conserved_drift - s.conserved_drift).abs() < 1e-12);
    }
}
