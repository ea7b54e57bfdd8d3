use wave_lifespan::harness::{fit_exponent, FitMode};
use wave_lifespan::kernels::free_solution;
use wave_lifespan::solver::{
    march, pde_residual, picard_iterate, picard_limit, reconstruct_u, weighted_sup_norm, MarchConfig,
};
use wave_lifespan::{CharField, GridSpec, InitialData, LifespanStatus, ModelParams, NodeField, Profile};

fn bump_data() -> InitialData {
    InitialData::speed_bump(1.0, 1.0)
}

#[test]
fn march_agrees_with_picard_limit() {
    let params = ModelParams::new(2.0, 0.0, 0.0, 0.2, 1.0);
    let grid = GridSpec::new(0.05, 6.0, 1.0);
    let (field, est) = march(&params, &bump_data(), &grid, &MarchConfig::full()).unwrap();
    assert_eq!(est.status, LifespanStatus::Survived);
    let limit = picard_limit(&params, &bump_data(), &grid, 6.0, 1e-10, 200).unwrap();
    let diff = field.u_t().unwrap().sup_diff(&limit);
    assert!(diff < 1e-8, "diff {diff}");
}

#[test]
fn second_iterate_scales_like_eps_to_the_p() {
    let grid = GridSpec::new(0.1, 10.0, 1.0);
    let pairs: Vec<(f64, f64)> = [0.01, 0.02, 0.05, 0.1]
        .iter()
        .map(|&eps| {
            let params = ModelParams::new(2.0, -0.5, 0.0, eps, 1.0);
            let rep = picard_iterate(&params, &bump_data(), &grid, 10.0, 2).unwrap();
            (eps, rep.steps[1].norm)
        })
        .collect();
    let fit = fit_exponent(&pairs, FitMode::Power).unwrap();
    assert!((fit.slope - 2.0).abs() < 0.05, "slope {}", fit.slope);
}

fn support_exact(field: &CharField, radius: f64) -> bool {
    let u = field.u_t().unwrap();
    let lat = field.lattice;
    u.levels.iter().enumerate().all(|(n, row)| {
        row.iter()
            .enumerate()
            .all(|(i, &v)| lat.x(i).abs() <= lat.t(n) + radius + 1e-12 || v == 0.0)
    })
}

#[test]
fn support_is_exact_for_several_data() {
    for (data, a, b) in [
        (bump_data(), -1.0, -1.0),
        (InitialData::new(Profile::bump(0.5), Profile::bump_pair(1.0), 1.0), 0.0, 0.0),
        (InitialData::new(Profile::ZERO, Profile::bump(2.0), 2.0), 0.5, -3.0),
    ] {
        let params = ModelParams::new(2.0, a, b, 0.3, data.radius);
        let (field, _) = march(&params, &data, &GridSpec::new(0.1, 8.0, 2.0), &MarchConfig::full()).unwrap();
        assert!(support_exact(&field, data.radius));
    }
}

fn residual(h: f64) -> f64 {
    let params = ModelParams::new(2.0, 0.0, 0.0, 1e-3, 1.0);
    let (field, _) = march(&params, &bump_data(), &GridSpec::new(h, 10.0, 1.0), &MarchConfig::full()).unwrap();
    let u = reconstruct_u(&field, &bump_data(), 1e-3).unwrap();
    pde_residual(&u, &field, &params).unwrap()
}

#[test]
fn residual_shrinks_fourfold() {
    let (r1, r2) = (residual(0.1), residual(0.05));
    let factor = r1 / r2;
    assert!((3.0..=5.0).contains(&factor), "factor {factor}");
}

#[test]
fn moderate_run_has_small_residual() {
    let params = ModelParams::new(2.0, 0.0, 0.0, 0.05, 1.0);
    let h = 0.02;
    let (field, _) = march(&params, &bump_data(), &GridSpec::new(h, 10.0, 1.0), &MarchConfig::full()).unwrap();
    let u = reconstruct_u(&field, &bump_data(), 0.05).unwrap();
    // the linear part alone sets the curvature scale: eps sup|g'''| ~ 0.05 * 23
    assert!(pde_residual(&u, &field, &params).unwrap() < 10.0 * h * h * 0.05 * 50.0);
}

#[test]
fn reconstruction_of_free_wave_is_second_order() {
    let err = |h: f64| {
        let params = ModelParams::new(2.0, 0.0, 0.0, 0.0, 1.0);
        let grid = GridSpec::new(h, 4.0, 1.0);
        let (mut field, _) = march(&params, &bump_data(), &grid, &MarchConfig::full()).unwrap();
        let lat = field.lattice;
        let free = NodeField::from_fn(lat, lat.levels, |x, t| {
            wave_lifespan::kernels::free_solution_dt(x, t, &bump_data(), 0.1)
        });
        field.levels = Some(free);
        let u = reconstruct_u(&field, &bump_data(), 0.1).unwrap();
        let exact = NodeField::from_fn(lat, lat.levels, |x, t| free_solution(x, t, &bump_data(), 0.1));
        u.sup_diff(&exact)
    };
    let ratio = err(0.1) / err(0.05);
    assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
}

#[test]
fn weighted_norm_of_free_wave_is_grid_stable() {
    let data = InitialData::speed_bump(1.0, 2.0);
    let params = ModelParams::new(2.0, 0.0, 0.0, 0.1, 2.0);
    let norm = |h: f64| {
        let grid = GridSpec::new(h, 10.0, 2.0);
        let (mut field, _) = march(&params.with_epsilon(0.0), &data, &grid, &MarchConfig::full()).unwrap();
        let lat = field.lattice;
        field.levels = Some(NodeField::from_fn(lat, lat.levels, |x, t| {
            wave_lifespan::kernels::free_solution_dt(x, t, &data, 0.1)
        }));
        weighted_sup_norm(&field, &params, 10.0).unwrap()
    };
    let (n1, n2) = (norm(0.1), norm(0.05));
    assert!(n1 > 0.0 && ((n1 - n2) / n2).abs() < 0.01, "{n1} {n2}");
}

#[test]
fn global_regime_survives_with_bounded_history() {
    let params = ModelParams::new(2.0, 1.0, 0.0, 0.05, 1.0);
    let (_, est) = march(&params, &bump_data(), &GridSpec::new(0.1, 200.0, 1.0), &MarchConfig::default()).unwrap();
    assert_eq!(est.status, LifespanStatus::Survived);
    let max = est.sup_history.iter().copied().fold(0.0, f64::max);
    assert!(max < 0.06, "max {max}");
}
