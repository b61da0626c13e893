//! Invariants of the quotient constrained Hamiltonian systems: energy
//! conservation per variant, chart independence of the full-system
//! geodesics, the eliminated-control constraints, and the quotient
//! lift/reduce pipeline.

mod support;

use geoctrl::cartan::{
    cone_abnormal_extremal, prolong, sample_admissible_covector, CartanModel, ConeSystem,
    LocalLeafSpace,
};
use geoctrl::extremals::{classify_abnormal, AbnormalClass};
use geoctrl::linalg;
use geoctrl::srmetric::{
    build_srcartan, extend_biextremal, lift_abnormal, lift_abnormal_cone, lifted_residual,
    pmp_system, quotient_abnormal_residual, reduce_biextremal, y_quotient_abnormal,
    y_quotient_residual, ChartChoice, PmpProblemId, SrCartanStructure, SubRiemannianMetric,
};
use geoctrl::vecfield::Chart;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{m5_frame, q};

fn m5_structure() -> SrCartanStructure {
    let f = m5_frame();
    let model = CartanModel::new(
        Chart::standard(5),
        f[0].clone(),
        f[1].clone(),
        vec![q(0, 1); 5],
    )
    .unwrap();
    let chart = prolong(&model).unwrap();
    let g = SubRiemannianMetric::new(f);
    let s = build_srcartan(&chart, &g).unwrap();
    let ls = LocalLeafSpace::new(&chart, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.3]).unwrap();
    s.with_leaf_space(ls)
}

#[test]
fn conservation_on_the_polynomial_chart_variants() {
    let s = m5_structure();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Full system in the (y, v) chart.
    let sys = pmp_system(&s, PmpProblemId::EFullEnergy, ChartChoice::YV).unwrap();
    for _ in 0..5 {
        let z0 = [0.0, 0.0, 0.0, 0.0, 0.0, 0.4];
        let p0: Vec<f64> = (0..6).map(|_| rng.random_range(-0.8..0.8)).collect();
        let arc = sys.integrate_normal(&z0, &p0, None, 1.0, 1e-3).unwrap();
        let h0 = sys
            .hamiltonian(&arc.states[0], &arc.costates[0], &arc.controls[0], -1.0)
            .unwrap();
        let mut drift: f64 = 0.0;
        for k in 0..arc.len() {
            let h = sys
                .hamiltonian(&arc.states[k], &arc.costates[k], &arc.controls[k], -1.0)
                .unwrap();
            drift = drift.max((h - h0).abs());
        }
        assert!(drift <= 1e-8 * h0.abs().max(1.0), "drift {drift}");
        // The vertical constraint phi + q0 lambda = 0 at q0 = -1: the
        // recorded lambda equals the fibre momentum.
        for k in 0..arc.len() {
            assert!((arc.controls[k][0] - arc.costates[k][5]).abs() <= 1e-10);
        }
    }
    // Quotient over the base: the DAE with the angle control.
    let sysy = pmp_system(&s, PmpProblemId::EModYFullEnergy, ChartChoice::YV).unwrap();
    let y0 = [0.05, -0.02, 0.01, 0.0, 0.02];
    let q0 = [0.4, 0.9, 0.1, -0.2, 0.3];
    let arc = sysy
        .integrate_normal(&y0, &q0, Some(0.2), 1.0, 1e-3)
        .unwrap();
    let h0 = sysy
        .hamiltonian(&arc.states[0], &arc.costates[0], &arc.controls[0], -1.0)
        .unwrap();
    let mut drift: f64 = 0.0;
    for k in 0..arc.len() {
        let h = sysy
            .hamiltonian(&arc.states[k], &arc.costates[k], &arc.controls[k], -1.0)
            .unwrap();
        drift = drift.max((h - h0).abs());
        // lambda is eliminated to zero.
        assert!(arc.controls[k][1].abs() <= 1e-12);
    }
    assert!(drift <= 1e-8 * h0.abs().max(1.0), "quotient drift {drift}");
    let res = sysy.residuals(&arc).unwrap();
    assert!(res.stationarity <= 1e-9, "{res:?}");
}

#[test]
fn conservation_on_the_leaf_chart_variants() {
    // The leaf chart is realized through finite differences of the chart
    // map, whose noise floor sits near 1e-6 on the derivative entries; the
    // conservation bound reflects that floor rather than the 1e-8 of the
    // polynomial charts.
    let s = m5_structure();
    let sysx = pmp_system(&s, PmpProblemId::EModXFullEnergy, ChartChoice::XW).unwrap();
    let ls = s.leaf_space().unwrap();
    let anchor = ls.chartmap(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.3]).unwrap();
    let x0 = anchor.slice.clone();
    let cone = ConeSystem::new(ls.clone());
    let g = cone.generator(&x0, 0.0).unwrap();
    let gw = cone.generator_w(&x0, 0.0).unwrap();
    let p0 = linalg::solve_lsq(&[g, gw], &[1.0, 0.0], 1e-12).unwrap();
    let arc = sysx
        .integrate_normal(&x0, &p0, Some(0.0), 0.4, 1e-2)
        .unwrap();
    let h0 = sysx
        .hamiltonian(&arc.states[0], &arc.costates[0], &arc.controls[0], -1.0)
        .unwrap();
    let mut drift: f64 = 0.0;
    for k in 0..arc.len() {
        let h = sysx
            .hamiltonian(&arc.states[k], &arc.costates[k], &arc.controls[k], -1.0)
            .unwrap();
        drift = drift.max((h - h0).abs());
        // b is eliminated to zero exactly.
        assert_eq!(arc.controls[k][2], 0.0);
    }
    assert!(drift <= 2e-5, "leaf-chart drift {drift}");
    let res = sysx.residuals(&arc).unwrap();
    assert!(res.stationarity <= 1e-4, "{res:?}");
}

#[test]
fn full_system_hamiltonian_matches_the_displayed_expression() {
    // H = lambda phi + mu sum_i (cos(v) c1i + sin(v) c2i) q_i + mu rho phi
    //     + (1/2) q0 (lambda^2 + mu^2),
    // with rho = 0 on the nilpotent model.
    let s = m5_structure();
    let sys = pmp_system(&s, PmpProblemId::EFullEnergy, ChartChoice::YV).unwrap();
    let frame = m5_frame();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..8 {
        let mut z: Vec<f64> = (0..5).map(|_| rng.random_range(-0.4..0.4)).collect();
        z.push(rng.random_range(0.0..std::f64::consts::PI));
        let costate: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (lam, mu) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let q0 = -1.0;
        let got = sys.hamiltonian(&z, &costate, &[lam, mu], q0).unwrap();
        let (c, sv) = (z[5].cos(), z[5].sin());
        let e1 = frame[0].eval_f64(&z[..5]).unwrap();
        let e2 = frame[1].eval_f64(&z[..5]).unwrap();
        let horizontal: f64 = (0..5).map(|i| costate[i] * (c * e1[i] + sv * e2[i])).sum();
        let expected = lam * costate[5] + mu * horizontal + 0.5 * q0 * (lam * lam + mu * mu);
        assert!((got - expected).abs() <= 1e-12, "{got} vs {expected}");
    }
}

#[test]
fn l_and_e_quotients_share_the_hamiltonian_up_to_the_inert_control() {
    let s = m5_structure();
    let e_l = pmp_system(&s, PmpProblemId::EModXLEnergy, ChartChoice::XW).unwrap();
    let l_l = pmp_system(&s, PmpProblemId::LModXLEnergy, ChartChoice::XW).unwrap();
    let x = [0.01, -0.02, 0.0, 0.03, 0.02];
    let p = [0.4, -0.1, 0.2, 0.7, -0.3];
    for (w, a, b) in [(0.1, 0.8, 0.5), (-0.2, -0.4, 2.0), (0.3, 1.1, -0.7)] {
        let he = e_l.hamiltonian(&x, &p, &[w, a, b], -1.0).unwrap();
        let hl = l_l.hamiltonian(&x, &p, &[w, a], -1.0).unwrap();
        assert!((he - hl).abs() <= 1e-14, "b must be inert: {he} vs {hl}");
    }
}

#[test]
fn chart_independence_of_the_full_system_geodesics() {
    // The same geodesic integrated in the (y, v) chart and in the leaf
    // chart, compared after the numerical chart transition.
    let s = m5_structure();
    let ls = s.leaf_space().unwrap();
    let sys_yv = pmp_system(&s, PmpProblemId::EFullEnergy, ChartChoice::YV).unwrap();
    let sys_xw = pmp_system(&s, PmpProblemId::EFullEnergy, ChartChoice::XW).unwrap();
    let z0 = [0.0, 0.0, 0.0, 0.0, 0.0, 0.3];
    let p_yv = [0.3, 0.5, -0.2, 0.1, 0.4, 0.25];
    // Transition of the point and the covector.
    let cp = ls.chartmap(&z0).unwrap();
    let x0: Vec<f64> = cp.slice.clone();
    let w0 = -cp.flow_time;
    let h = 1e-3;
    let mut jac = vec![vec![0.0; 6]; 6];
    for j in 0..6 {
        let mut up = z0.to_vec();
        up[j] += h;
        let mut dn = z0.to_vec();
        dn[j] -= h;
        let (cu, cd) = (ls.chartmap(&up).unwrap(), ls.chartmap(&dn).unwrap());
        for i in 0..5 {
            jac[i][j] = (cu.slice[i] - cd.slice[i]) / (2.0 * h);
        }
        jac[5][j] = (-cu.flow_time + cd.flow_time) / (2.0 * h);
    }
    // p_xw = (DPhi)^{-T} p_yv.
    let mut jt = vec![vec![0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            jt[i][j] = jac[j][i];
        }
    }
    let p_xw = linalg::solve_square(&jt, &p_yv).unwrap();
    let t_final = 0.3;
    let arc_yv = sys_yv
        .integrate_normal(&z0, &p_yv, None, t_final, 1e-3)
        .unwrap();
    let mut start_xw = x0.clone();
    start_xw.push(w0);
    let arc_xw = sys_xw
        .integrate_normal(&start_xw, &p_xw, None, t_final, 1e-3)
        .unwrap();
    // Compare at matched times after mapping the (y, v) states through the
    // transition.
    let stride = arc_yv.len() / 15;
    let mut worst: f64 = 0.0;
    for k in (0..arc_yv.len()).step_by(stride.max(1)) {
        let cp = ls.chartmap(&arc_yv.states[k]).unwrap();
        let got = &arc_xw.states[k];
        for i in 0..5 {
            worst = worst.max((cp.slice[i] - got[i]).abs());
        }
        worst = worst.max((-cp.flow_time - got[5]).abs());
    }
    assert!(worst <= 1e-5, "chart transition gap {worst}");
}

#[test]
fn lift_reduce_pipeline_over_the_base() {
    let s = m5_structure();
    let chart = s.prolonged().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..4 {
        let y0: Vec<f64> = (0..5).map(|_| rng.random_range(-0.2..0.2)).collect();
        let v0 = rng.random_range(0.0..std::f64::consts::PI);
        // The central-difference residual floor is h^2 |x''|/6, so the
        // 1e-8 budget needs a fine grid; the quotient flow is polynomial
        // and cheap.
        let arc = y_quotient_abnormal(&chart, &y0, v0, 0.8, 2.5e-4).unwrap();
        // The quotient constrained system holds.
        let res = y_quotient_residual(&chart, &arc).unwrap();
        assert!(res.max_equation_residual() <= 1e-8, "{res:?}");
        // Reduction and extension leave the residuals bitwise unchanged.
        let reduced = reduce_biextremal(&arc);
        let noisy_lambda: Vec<f64> = (0..arc.times.len())
            .map(|_| rng.random_range(-5.0..5.0))
            .collect();
        let extended = extend_biextremal(&reduced, Some(noisy_lambda));
        let r1 = y_quotient_residual(&chart, &reduced).unwrap();
        let r2 = y_quotient_residual(&chart, &extended).unwrap();
        assert!((r1.max_equation_residual() - r2.max_equation_residual()).abs() <= 1e-15);
        assert!((r1.stationarity - r2.stationarity).abs() <= 1e-15);
        // The zero-extension lift satisfies the full constrained system.
        let lifted = lift_abnormal(&arc).unwrap();
        let lres = lifted_residual(&chart, &lifted);
        assert!(lres.max_equation_residual() <= 1e-8, "{lres:?}");
        // Classification terminates with a fibre verdict.
        let spans = chart.flag_spans().unwrap();
        let class = classify_abnormal(&spans, &lifted, 1e-8).unwrap();
        assert!(
            matches!(
                class,
                AbnormalClass::TotallyIrregular | AbnormalClass::Regular
            ),
            "{class:?}"
        );
    }
}

#[test]
fn cone_side_lift_is_a_fiber_parametrization() {
    // A cone-system abnormal arc lifts into the leaf chart with a leaf
    // control bounded by the finite-difference noise floor of the chart
    // derivatives; geometrically the lift runs along a vertical fibre.
    let s = m5_structure();
    let ls = s.leaf_space().unwrap().clone();
    let cone = ConeSystem::new(ls.clone());
    let anchor = ls.chartmap(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.3]).unwrap();
    let x0 = anchor.slice.clone();
    let w0 = -anchor.flow_time;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p0 = sample_admissible_covector(&cone, &x0, w0, &mut rng).unwrap();
    let arc = cone_abnormal_extremal(&cone, &x0, w0, &p0, 0.2, 1.25e-2, 1.0).unwrap();
    let qres = quotient_abnormal_residual(&cone, &arc).unwrap();
    assert!(qres.stationarity <= 1e-4, "{qres:?}");
    let lifted = lift_abnormal_cone(&cone, &arc).unwrap();
    // The leaf-direction control of the lift stays at the noise floor.
    let max_b = lifted
        .controls
        .iter()
        .map(|u| u[1].abs())
        .fold(0.0, f64::max);
    assert!(
        max_b <= 1e-4,
        "leaf component of the lifted velocity: {max_b}"
    );
}
