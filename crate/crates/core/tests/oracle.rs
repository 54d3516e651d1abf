use std::f64::consts::PI;

use coupled_channels::oracle2d::{convergence_study, solve_2d_eigen, Grid2D};
use coupled_channels::reduction::{BasisSet, Profile, ReductionRecipe, TwoBodyPotential};
use coupled_channels::spectra::find_bound_states;
use coupled_channels::{build_grid, BoundaryKind, ChannelSet, PotentialMatrixField, Scenario};

fn free() -> TwoBodyPotential {
    TwoBodyPotential::SeparableProduct {
        f: Profile::Constant { value: 0.0 },
        g: Profile::Constant { value: 0.0 },
    }
}

fn x_only(f: Profile) -> TwoBodyPotential {
    TwoBodyPotential::SeparableProduct {
        f,
        g: Profile::Constant { value: 1.0 },
    }
}

#[test]
fn free_square_levels_and_second_order_refinement() {
    let levels: Vec<Vec<f64>> = [51, 101, 201]
        .iter()
        .map(|&n| solve_2d_eigen(&free(), &Grid2D::square(0.0, PI, n).unwrap(), 3).unwrap())
        .collect();
    let fine = &levels[2];
    assert!((fine[0] - 2.0).abs() < 2e-3, "{fine:?}");
    assert!(
        (fine[1] - 5.0).abs() < 5e-3 && (fine[2] - 5.0).abs() < 5e-3,
        "{fine:?}"
    );
    for k in 0..3 {
        let coarse_move = (levels[1][k] - levels[0][k]).abs();
        let fine_move = (levels[2][k] - levels[1][k]).abs();
        let ratio = coarse_move / fine_move;
        assert!((3.5..4.5).contains(&ratio), "level {k}: ratio {ratio}");
    }
}

#[test]
fn separable_potential_adds_one_dimensional_levels() {
    let slope = 0.5;
    let spec = x_only(Profile::Linear {
        slope,
        intercept: 0.0,
    });
    let e101 = solve_2d_eigen(&spec, &Grid2D::square(0.0, PI, 101).unwrap(), 1).unwrap()[0];
    let e201 = solve_2d_eigen(&spec, &Grid2D::square(0.0, PI, 201).unwrap(), 1).unwrap()[0];
    let discretization = (e101 - e201).abs() * 4.0 / 3.0;

    let grid = build_grid(0.0, PI, 2001).unwrap();
    let field = PotentialMatrixField::from_fn(grid, 1, |x, _, _| slope * x);
    let s = Scenario::new(ChannelSet::new(vec![0.0]), field, BoundaryKind::BoundBox);
    let ex = find_bound_states(&s, 0.5, 4.0).unwrap()[0].energy;
    // ξ factor is the free box ground level, 1
    let sum = ex + 1.0;
    assert!(
        (e101 - sum).abs() <= 2.0 * discretization,
        "{e101} vs {sum}"
    );
    assert!(
        (e201 - sum).abs() <= 2.0 * discretization / 4.0 * 1.5,
        "{e201} vs {sum}"
    );
}

#[test]
fn xi_independent_potential_gives_flat_study() {
    let recipe = ReductionRecipe {
        basis: BasisSet::particle_in_box(0.0, PI, 1).unwrap(),
        spec: x_only(Profile::Gaussian {
            amplitude: -1.5,
            center: 1.2,
            width: 0.5,
        }),
        n_xi: 801,
    };
    let grid = build_grid(0.0, PI, 801).unwrap();
    let study = convergence_study(&recipe, &grid, &[1, 2, 4]).unwrap();
    assert!(study.monotone);
    let e0 = study.rows[0].1;
    for (_, e) in &study.rows {
        assert!((e - e0).abs() <= 1e-8, "{:?}", study.rows);
    }
}
