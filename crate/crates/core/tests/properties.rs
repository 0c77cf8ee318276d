use proptest::prelude::*;

use pfasst_mg::analysis::{damping_factor, iteration_matrix};
use pfasst_mg::heat::{Grid, GridFunction, HeatOperator, StencilOrder};
use pfasst_mg::multigrid::{smooth, v_cycle, MgConfig, ShiftedOperator, Smoother, SolvePolicy};
use pfasst_mg::quadrature::QuadratureTable;
use pfasst_mg::sdc::{collocation_solve, NodeStates, SweepConfig, Sweeper};
use pfasst_mg::transfer::{inject, interpolate};

fn smoothers() -> impl Strategy<Value = Smoother> {
    prop_oneof![
        Just(Smoother::jacobi()),
        Just(Smoother::GaussSeidelLex),
        Just(Smoother::jor_red_black()),
    ]
}

fn field(grid: Grid) -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(-1.0..1.0f64, grid.len())
        .prop_map(move |v| GridFunction::from_values(grid, v).unwrap())
}

fn shifted(dim: usize, n: usize, shift: f64) -> ShiftedOperator {
    ShiftedOperator::new(HeatOperator::new(Grid::unit(dim, n).unwrap(), 1.0, StencilOrder::Second), shift)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_integrates_low_degree_polynomials(
        m in 1usize..=8,
        coeffs in prop::collection::vec(-2.0..2.0f64, 8),
    ) {
        let t = QuadratureTable::uniform(m).unwrap();
        let nodes = t.nodes.nodes();
        let p = |x: f64| (0..m).map(|j| coeffs[j] * x.powi(j as i32)).sum::<f64>();
        let int = |x: f64| (0..m).map(|j| coeffs[j] * x.powi(j as i32 + 1) / (j + 1) as f64).sum::<f64>();
        let scale: f64 = coeffs[..m].iter().map(|c| c.abs()).sum::<f64>().max(1.0);
        let tol = 100.0 * f64::EPSILON * (m * m) as f64 * scale;
        for row in 0..=m {
            let approx: f64 = (0..=m).map(|i| t.q[(row, i)] * p(nodes[i])).sum();
            prop_assert!((approx - int(nodes[row])).abs() <= tol);
        }
    }

    #[test]
    fn damping_factor_is_a_contraction(m in 1usize..=8, e in -3.0..6.0f64) {
        let rho = damping_factor(&QuadratureTable::uniform(m).unwrap(), -(10f64).powf(e)).unwrap();
        prop_assert!((0.0..1.0).contains(&rho), "rho = {rho}");
    }

    #[test]
    fn sweep_error_follows_the_iteration_matrix(
        m in 1usize..=4,
        e in -2.0..2.0f64,
        start in prop::collection::vec(-1.0..1.0f64, 5),
    ) {
        let z = -(10f64).powf(e);
        let table = QuadratureTable::uniform(m).unwrap();
        let op = HeatOperator::new(Grid::unit(1, 2).unwrap(), -z / 8.0, StencilOrder::Second);
        let sw = Sweeper::new(SweepConfig::new(op, 1.0, SolvePolicy::FULL, MgConfig::default()), table.clone()).unwrap();
        let y0 = GridFunction::from_values(op.grid, vec![1.0]).unwrap();
        let star = collocation_solve(&op, &table, &y0, 1.0, None).unwrap();
        let mut y: Vec<GridFunction> = (0..=m)
            .map(|i| GridFunction::from_values(op.grid, vec![if i == 0 { 1.0 } else { start[i] }]).unwrap())
            .collect();
        y[0] = y0.clone();
        let mut s = NodeStates::from_values(&op, y).unwrap();
        let e0: Vec<f64> = (0..=m).map(|i| s.y[i].values()[0] - star.y[i].values()[0]).collect();
        sw.sweep(&mut s, &y0, None).unwrap();
        let k = iteration_matrix(&table, z).unwrap();
        for i in 0..=m {
            let predicted: f64 = (0..=m).map(|j| k[(i, j)] * e0[j]).sum();
            let actual = s.y[i].values()[0] - star.y[i].values()[0];
            prop_assert!((predicted - actual).abs() <= 1e-12, "node {i}: {predicted} vs {actual}");
        }
    }

    #[test]
    fn v_cycle_is_linear_in_the_right_hand_side(
        smoother in smoothers(),
        a in -3.0..3.0f64,
        (b1, b2) in (field(Grid::unit(1, 32).unwrap()), field(Grid::unit(1, 32).unwrap())),
    ) {
        let op = shifted(1, 32, 0.01);
        let cfg = MgConfig::with_smoother(smoother);
        let zero = GridFunction::zeros(*op.grid());
        let mut combo = b2.clone();
        combo.axpy(a, &b1);
        let lhs = v_cycle(&op, &zero, &combo, &cfg).unwrap();
        let mut rhs = v_cycle(&op, &zero, &b2, &cfg).unwrap();
        rhs.axpy(a, &v_cycle(&op, &zero, &b1, &cfg).unwrap());
        prop_assert!(lhs.max_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn v_cycle_contracts_the_error(smoother in smoothers(), exact in field(Grid::unit(2, 16).unwrap())) {
        let op = shifted(2, 16, 0.05);
        let b = op.apply(&exact).unwrap();
        let zero = GridFunction::zeros(*op.grid());
        let u = v_cycle(&op, &zero, &b, &MgConfig::with_smoother(smoother)).unwrap();
        prop_assert!(u.max_diff(&exact) <= 0.5 * exact.max_norm());
    }

    #[test]
    fn smoother_keeps_the_solution(smoother in smoothers(), exact in field(Grid::unit(2, 8).unwrap())) {
        let op = shifted(2, 8, 0.1);
        let b = op.apply(&exact).unwrap();
        let u = smooth(&op, &exact, &b, &MgConfig::with_smoother(smoother), 3).unwrap();
        prop_assert!(u.max_diff(&exact) <= 1e-13);
    }

    #[test]
    fn injection_undoes_interpolation(order in prop_oneof![Just(2usize), Just(4)], coarse in field(Grid::unit(2, 8).unwrap())) {
        let fine = interpolate(&coarse, Grid::unit(2, 16).unwrap(), order).unwrap();
        prop_assert_eq!(inject(&fine, *coarse.grid()).unwrap(), coarse);
    }

    #[test]
    fn laplacian_is_negative_definite(
        order in prop_oneof![Just(StencilOrder::Second), Just(StencilOrder::Fourth)],
        u in field(Grid::unit(1, 16).unwrap()),
    ) {
        prop_assume!(u.max_norm() > 1e-3);
        let op = HeatOperator::new(*u.grid(), 1.0, order);
        let mut au = vec![0.0; u.len()];
        op.apply_into(u.values(), &mut au);
        let q: f64 = u.values().iter().zip(&au).map(|(a, b)| a * b).sum();
        prop_assert!(q < 0.0);
    }
}
