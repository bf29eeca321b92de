//! Worked examples checked against independent oracles: finite differences,
//! exact rotation geometry, brute-force scans and reruns at higher precision.

use circdim::bounds::{adjacency_ratios, almost_parabolic_check, real_bounds};
use circdim::cf::ContinuedFraction;
use circdim::map::{validate_map, Family, MapSpec};
use circdim::measure::{atom_measure, signature};
use circdim::partition::{bridge_decomposition, PartitionTower};
use circdim::pipeline::measure_cf_from_target;
use circdim::rotation::tune_parameter;
use rug::Float;

fn tuned(family: Family, target: &[u64], depth: usize, prec: u32) -> MapSpec {
    let template = MapSpec::new(family, &Float::with_val(prec, 0.5), prec).unwrap();
    template.with_omega(&tune_parameter(&template, target, depth).unwrap().omega)
}

fn golden_alpha() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

#[test]
fn critical_exponents_are_cubic() {
    let arnold = MapSpec::new(Family::ArnoldCubic, &Float::with_val(256, 0.3), 256).unwrap();
    let report = validate_map(&arnold).unwrap();
    assert_eq!(report.critical_points.len(), 1);
    assert!((report.critical_points[0].fitted_exponent - 3.0).abs() < 0.05);

    let triple = MapSpec::new(Family::MfoldCubic { m: 3 }, &Float::with_val(256, 0.7), 256).unwrap();
    let report = validate_map(&triple).unwrap();
    let positions: Vec<f64> = triple.critical_points().iter().map(|c| c.position.to_f64()).collect();
    for (got, want) in positions.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0]) {
        assert!((got - want).abs() < 1e-15);
    }
    for c in &report.critical_points {
        assert!((c.fitted_exponent - 3.0).abs() < 0.05, "{c:?}");
    }
}

#[test]
fn schwarzian_matches_five_point_stencils() {
    let prec = 256;
    let spec = MapSpec::new(Family::ArnoldCubic, &Float::with_val(prec, 0.41), prec).unwrap();
    let x = Float::with_val(prec, 0.5);
    let h = Float::with_val(prec, Float::i_exp(1, -30));
    let f = |k: i32| spec.eval_lift(&Float::with_val(prec, &x + Float::with_val(prec, &h * k)));
    let (m2, m1, f0, p1, p2) = (f(-2), f(-1), f(0), f(1), f(2));
    let h1 = h.clone();
    let h2 = Float::with_val(prec, &h * &h);
    let h3 = Float::with_val(prec, &h2 * &h);
    let d1 = (Float::with_val(prec, &p1 - &m1) * 8u32 - Float::with_val(prec, &p2 - &m2)) / (h1 * 12u32);
    let d2 = (Float::with_val(prec, &p1 + &m1) * 16u32 - Float::with_val(prec, &p2 + &m2) - f0 * 30u32) / (h2 * 12u32);
    let d3 = (Float::with_val(prec, &p2 - &m2) - Float::with_val(prec, &p1 - &m1) * 2u32) / (h3 * 2u32);
    let ratio = Float::with_val(prec, &d2 / &d1);
    let fd = Float::with_val(prec, &d3 / &d1) - Float::with_val(prec, &ratio * &ratio) * 1.5;
    let exact = spec.schwarzian(&x).unwrap();
    let rel = (Float::with_val(prec, &fd - &exact) / &exact).abs().to_f64();
    assert!(rel < 1e-6, "finite difference {fd}, analytic {exact}");
}

#[test]
fn golden_atom_measure_is_a_power_of_alpha() {
    let cf = ContinuedFraction::new(&[1; 12], 12).unwrap();
    let mu = atom_measure(&cf, 3).unwrap().to_f64();
    assert!((mu - golden_alpha().powi(4)).abs() < 1e-15);
    assert!((mu - 0.14590).abs() < 5e-6);
}

#[test]
fn golden_rotation_adjacency_is_the_golden_ratio() {
    let cf = ContinuedFraction::new(&[1; 16], 16).unwrap();
    let spec = MapSpec::new(Family::RigidRotation, &cf.alpha_float(256), 256).unwrap();
    let tower = PartitionTower::build(&spec, 0, 10).unwrap();
    for n in 2..=10 {
        let stats = adjacency_ratios(&tower.partition(n).unwrap());
        assert!((stats.max_ratio - 1.0 / golden_alpha()).abs() < 1e-12, "level {n}: {}", stats.max_ratio);
    }
}

#[test]
fn tuned_golden_partition_has_fibonacci_atoms() {
    let spec = tuned(Family::ArnoldCubic, &[1], 9, 256);
    let tower = PartitionTower::build(&spec, 0, 9).unwrap();
    let p = tower.partition(8).unwrap();
    assert_eq!(p.len(), 34 + 21);
    assert!(p.tiling_residual < 1e-30);
    for n in 1..9 {
        let b = bridge_decomposition(&spec, &tower, n).unwrap();
        assert!(b.r_n <= 3, "level {n}: r_n = {}", b.r_n);
    }
}

#[test]
fn threefold_spots_are_stable_under_more_precision() {
    let target = [1, 1, 1, 12];
    let coarse = tuned(Family::MfoldCubic { m: 3 }, &target, 6, 256);
    let fine = MapSpec::new(Family::MfoldCubic { m: 3 }, &Float::with_val(512, coarse.omega()), 512).unwrap();
    let towers = [PartitionTower::build(&coarse, 0, 6).unwrap(), PartitionTower::build(&fine, 0, 6).unwrap()];
    for n in 1..6 {
        let a = bridge_decomposition(&coarse, &towers[0], n).unwrap();
        let b = bridge_decomposition(&fine, &towers[1], n).unwrap();
        assert!(a.r_n <= 7, "level {n}: r_n = {}", a.r_n);
        assert_eq!(a.spot_indices, b.spot_indices, "level {n}");
    }

    let cf = measure_cf_from_target(&target, 6).unwrap();
    let sig = signature(&coarse, &towers[0], &cf).unwrap();
    assert_eq!(sig.critical_count, 3);
    assert_eq!(sig.criticalities, vec![3, 3, 3]);
    let lower: f64 = sig.gaps.iter().map(|g| g.lower).sum();
    let upper: f64 = sig.gaps.iter().map(|g| g.upper).sum();
    assert!(lower <= 1.0 + 1e-12 && upper >= 1.0 - 1e-12, "{lower} {upper}");
}

#[test]
fn golden_constant_is_finite_with_positive_item_five_slack() {
    let spec = tuned(Family::ArnoldCubic, &[1], 13, 256);
    let tower = PartitionTower::build(&spec, 0, 13).unwrap();
    let rb = real_bounds(&spec, &tower, 5..=12, 0).unwrap();
    assert!(rb.constant.value.is_finite() && rb.constant.value > 1.0);
    assert!(rb.min_length.iter().all(|c| c.holds && c.slack > 0.0));
}

#[test]
fn rotation_constant_grows_with_the_largest_quotient() {
    let cf = ContinuedFraction::new(&[1, 1, 1, 10, 1, 1, 1, 40, 1, 1], 10).unwrap();
    let spec = MapSpec::new(Family::RigidRotation, &cf.alpha_float(256), 256).unwrap();
    let tower = PartitionTower::build(&spec, 0, 9).unwrap();
    let small = real_bounds(&spec, &tower, 2..=5, 0).unwrap().constant.value;
    let large = real_bounds(&spec, &tower, 2..=8, 0).unwrap().constant.value;
    assert!(small > 10.0, "{small}");
    assert!(large > 40.0 && large > small, "{large}");
}

#[test]
fn return_map_schwarzian_is_negative_on_long_bridges() {
    let spec = tuned(Family::ArnoldCubic, &[1, 1, 1, 40], 8, 256);
    let tower = PartitionTower::build(&spec, 0, 8).unwrap();
    for n in [3, 7] {
        let bridges = bridge_decomposition(&spec, &tower, n).unwrap();
        let checks = almost_parabolic_check(&spec, &tower, &bridges, 100);
        assert!(!checks.is_empty(), "level {n}");
        for c in checks {
            assert!(c.samples >= 100);
            assert_eq!(c.negative_fraction, 1.0, "level {n}, bridge {}", c.bridge);
        }
    }
}
