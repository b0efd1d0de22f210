use pearson_core::estimators::{ou_exact_objective, Estimator, ModelFamily, ObservationSet, OuFamily, SkFamily, WfFamily};
use pearson_core::models::sk::SkParams;
use pearson_core::models::wf::{wf_natural_to_reduced, WfNaturalParams};
use pearson_core::optimizer::*;
use pearson_core::sim::{simulate_ou, simulate_sk_milstein, simulate_wf, subsample, SimConfig};
use proptest::prelude::*;

fn rosenbrock(x: &[f64]) -> f64 {
    (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
}

fn schedules() -> Vec<OptSchedule> {
    let mut bfgs = OptSchedule::lbfgs();
    bfgs.phase2 = Some(QuasiNewtonConfig::bfgs());
    vec![OptSchedule::lbfgs(), bfgs]
}

fn ou_data() -> ObservationSet {
    let cfg = SimConfig { h_sim: 1e-3, n_steps: 20_000, seed: 12, stream: 0, x0: vec![0.5] };
    subsample(&simulate_ou(1.0, 0.5, 0.8, &cfg).unwrap(), 10).unwrap().to_observations().unwrap()
}

/// Closed-form gradient of the exact OU objective in `(λ, m, σ)`.
fn ou_exact_gradient(data: &ObservationSet, t: &[f64]) -> Vec<f64> {
    let (l, m, s) = (t[0], t[1], t[2]);
    let h = data.step();
    let e = (-l * h).exp();
    let var = s * s * (1.0 - e * e) / (2.0 * l);
    let dvar_dl = s * s * (2.0 * h * e * e * l - (1.0 - e * e)) / (2.0 * l * l);
    let dvar_ds = 2.0 * var / s;
    let mut g = [0.0; 3];
    for k in 1..=data.n_transitions() {
        let (x, y) = (data.state(k - 1)[0], data.state(k)[0]);
        let r = y - m - (x - m) * e;
        let dr = [(x - m) * h * e, e - 1.0, 0.0];
        let dv = [dvar_dl, 0.0, dvar_ds];
        for i in 0..3 {
            g[i] += dv[i] / var - r * r * dv[i] / (var * var) + 2.0 * r * dr[i] / var;
        }
    }
    g.to_vec()
}

#[test]
fn quadratic_bowl() {
    let target = [1.5, -2.0, 0.25, 4.0];
    let f = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let init: Vec<f64> = target.iter().map(|t| t + 1.0).collect();
    for s in schedules() {
        let r = minimize(&f, &init, &s);
        assert!(r.converged);
        for (a, b) in r.theta_hat.iter().zip(&target) {
            assert!((a - b).abs() < 1e-8, "{:?}", r.theta_hat);
        }
    }
    let r = minimize(&f, &init, &OptSchedule::adam_bfgs());
    assert!(r.converged);
    assert!(r.theta_hat.iter().zip(&target).all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn rosenbrock_valley() {
    for s in schedules() {
        let r = minimize(&rosenbrock, &[-1.2, 1.0], &s);
        assert!(r.converged, "{:?}", r.stop_reason);
        assert!((r.theta_hat[0] - 1.0).abs() < 1e-5 && (r.theta_hat[1] - 1.0).abs() < 1e-5, "{:?}", r.theta_hat);
    }
}

#[test]
fn accepted_steps_satisfy_strong_wolfe_and_decrease() {
    for s in schedules() {
        let r = minimize(&rosenbrock, &[-1.2, 1.0], &s);
        assert!(!r.steps.is_empty());
        for st in &r.steps {
            assert!(st.armijo(1e-4), "{st:?}");
            assert!(st.curvature(0.9), "{st:?}");
            assert!(st.f1 < st.f0);
        }
        let phase2: Vec<f64> = r.trace.iter().filter(|t| t.phase == 2).map(|t| t.objective).collect();
        assert!(phase2.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn fits_are_deterministic() {
    let data = ou_data();
    let f = |t: &[f64]| ou_exact_objective(&data, t).sentinel();
    let a = minimize(&f, &[0.5, 0.0, 0.5], &OptSchedule::adam_bfgs());
    let b = minimize(&f, &[0.5, 0.0, 0.5], &OptSchedule::adam_bfgs());
    assert_eq!(a.theta_hat, b.theta_hat);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!((a.iterations, a.converged, a.stop_reason), (b.iterations, b.converged, b.stop_reason));
    assert_eq!(a.trace, b.trace);
}

#[test]
fn infeasible_start_fails_cleanly() {
    let r = minimize(&|_| f64::INFINITY, &[1.0, 2.0], &OptSchedule::lbfgs());
    assert!(!r.converged);
    assert!(r.failure_reason.is_some());
    assert_eq!(r.stop_reason, StopReason::InfeasibleStart);
}

#[test]
fn iteration_budget_exhaustion() {
    let mut s = OptSchedule::lbfgs();
    s.phase2.as_mut().unwrap().max_iter = 3;
    let r = minimize(&rosenbrock, &[-1.2, 1.0], &s);
    assert!(!r.converged);
    assert_eq!(r.stop_reason, StopReason::MaxIter);
    assert!(r.objective.is_finite() && r.objective < rosenbrock(&[-1.2, 1.0]));
}

#[test]
fn sentinel_values_are_rejected_not_fatal() {
    let f = |x: &[f64]| if x[0] > 3.5 { f64::INFINITY } else { (x[0] - 3.0).powi(2) + x[1] * x[1] };
    for s in schedules() {
        let r = minimize(&f, &[-20.0, 1.0], &s);
        assert!(r.converged, "{:?}", r.stop_reason);
        assert!((r.theta_hat[0] - 3.0).abs() < 1e-6);
    }
}

#[test]
fn linear_gradient_is_exact() {
    let c = [3.0, -1.5, 0.25, 40.0];
    let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    let g = gradient_fd(&f, &[0.5, 1.0, -2.0, 3.0], None, 1e-6).unwrap();
    for (a, b) in g.iter().zip(&c) {
        assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{g:?}");
    }
}

#[test]
fn one_sided_fallback_and_failure() {
    let f = |x: &[f64]| if x[0] < 0.0 { f64::INFINITY } else { x[0] * x[0] + 2.0 * x[0] };
    let g = gradient_fd(&f, &[0.0], None, 1e-6).unwrap();
    assert!((g[0] - 2.0).abs() < 1e-6);
    let h = |x: &[f64]| if x[0] != 1.0 { f64::INFINITY } else { 0.0 };
    assert!(gradient_fd(&h, &[1.0], None, 1e-6).is_err());
}

#[test]
fn analytic_gradient_matches_finite_differences_on_ou() {
    let data = ou_data();
    let f = |t: &[f64]| ou_exact_objective(&data, t).value;
    for t in [[1.0, 0.5, 0.8], [0.4, -0.3, 1.7], [3.0, 1.0, 0.3]] {
        let a = ou_exact_gradient(&data, &t);
        let n = gradient_fd(&f, &t, None, 1e-6).unwrap();
        let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..3 {
            assert!((a[i] - n[i]).abs() < 1e-5 * scale, "{i}: {} vs {}", a[i], n[i]);
        }
    }
    let mut s = OptSchedule::lbfgs();
    s.gradient = GradientSpec::Analytic;
    let grad = |t: &[f64]| Some(ou_exact_gradient(&data, t));
    let fs = |t: &[f64]| ou_exact_objective(&data, t).sentinel();
    let ra = minimize_with(&fs, Some(&grad), &[0.5, 0.0, 0.5], None, &s);
    let rn = minimize(&fs, &[0.5, 0.0, 0.5], &OptSchedule::lbfgs());
    assert!(ra.converged && rn.converged);
    for i in 0..3 {
        assert!((ra.theta_hat[i] - rn.theta_hat[i]).abs() < 1e-4);
    }
}

#[test]
fn log_reparameterisation_respects_signs() {
    let data = ou_data();
    let f = |t: &[f64]| OuFamily.objective(Estimator::Ss, &data, t).sentinel();
    let mut s = OptSchedule::lbfgs();
    s.reparameterize = true;
    let signs = OuFamily.signs();
    let r = minimize_with(&f, None, &[0.5, 0.0, 0.5], Some(&signs), &s);
    let plain = minimize(&f, &[0.5, 0.0, 0.5], &OptSchedule::lbfgs());
    assert!(r.converged && plain.converged);
    assert!(r.theta_hat[0] > 0.0 && r.theta_hat[2] > 0.0);
    for i in 0..3 {
        assert!((r.theta_hat[i] - plain.theta_hat[i]).abs() < 1e-3, "{:?} {:?}", r.theta_hat, plain.theta_hat);
    }
}

#[test]
fn ss_gradients_finite_on_zoo_models() {
    let wf_p = wf_natural_to_reduced(&WfNaturalParams::paper_truth());
    let wf = simulate_wf(&wf_p, &SimConfig { h_sim: 1e-4, n_steps: 200_000, seed: 3, stream: 0, x0: vec![0.25; 3] }).unwrap();
    let wf = subsample(&wf, 2000).unwrap().to_observations().unwrap();
    let t = wf_p.to_theta();
    let g = gradient_fd(&|x: &[f64]| WfFamily.objective(Estimator::Ss, &wf, x).sentinel(), &t, None, 1e-6).unwrap();
    assert!(g.iter().all(|v| v.is_finite()));

    let sk_p = SkParams::paper_truth();
    let sk = simulate_sk_milstein(&sk_p, &SimConfig { h_sim: 1e-4, n_steps: 50_000, seed: 3, stream: 0, x0: vec![0.0, 0.0] }).unwrap();
    let sk = subsample(&sk, 100).unwrap().to_observations().unwrap();
    let fam = SkFamily::default().frozen_at(&sk, &sk_p.to_theta()).unwrap();
    let g = gradient_fd(&|x: &[f64]| fam.objective(Estimator::Ss, &sk, x).sentinel(), &sk_p.to_theta(), None, 1e-6).unwrap();
    assert!(g.iter().all(|v| v.is_finite()));

    let ou = ou_data();
    let g = gradient_fd(&|x: &[f64]| OuFamily.objective(Estimator::Ss, &ou, x).sentinel(), &[1.0, 0.5, 0.8], None, 1e-6).unwrap();
    assert!(g.iter().all(|v| v.is_finite()));
}

#[test]
fn wf_ss_fit_from_initial_guess() {
    let p = wf_natural_to_reduced(&WfNaturalParams::paper_truth());
    let fine = simulate_wf(&p, &SimConfig { h_sim: 1e-4, n_steps: 200_000, seed: 21, stream: 0, x0: vec![0.25; 3] }).unwrap();
    let data = subsample(&fine, 2000).unwrap().to_observations().unwrap();
    let init = wf_natural_to_reduced(&WfNaturalParams::paper_init()).to_theta();
    let f = |t: &[f64]| WfFamily.objective(Estimator::Ss, &data, t).sentinel();
    let r = minimize(&f, &init, &OptSchedule::adam_bfgs());
    assert_eq!(r.converged, r.failure_reason.is_none());
    assert!(r.objective.is_finite() && r.objective < f(&init) - 100.0);
    assert_eq!(r.theta_hat.len(), 15);
}

#[test]
fn schedule_validation() {
    let mut s = OptSchedule::adam_bfgs();
    s.phase1.as_mut().unwrap().lr = 0.0;
    assert!(s.validate().is_err());
    let mut s = OptSchedule::lbfgs();
    s.phase2.as_mut().unwrap().line_search = LineSearch::StrongWolfe { c1: 0.9, c2: 0.1 };
    assert!(s.validate().is_err());
    assert!(OptSchedule::lbfgs().validate().is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn convex_quadratics_converge(
        d in proptest::collection::vec(0.1f64..10.0, 3),
        c in proptest::collection::vec(-5.0f64..5.0, 3),
    ) {
        let f = |x: &[f64]| (0..3).map(|i| d[i] * (x[i] - c[i]).powi(2)).sum::<f64>();
        let r = minimize(&f, &[0.0; 3], &OptSchedule::lbfgs());
        prop_assert!(r.converged);
        for i in 0..3 {
            prop_assert!((r.theta_hat[i] - c[i]).abs() < 1e-4);
        }
        for st in &r.steps {
            prop_assert!(st.armijo(1e-4) && st.curvature(0.9));
        }
    }

    #[test]
    fn gradient_matches_analytic_on_smooth_functions(x in proptest::collection::vec(-3.0f64..3.0, 2)) {
        let f = |y: &[f64]| y[0].sin() * y[1].exp() + y[0] * y[0] * y[1];
        let g = gradient_fd(&f, &x, None, 1e-6).unwrap();
        let want = [x[0].cos() * x[1].exp() + 2.0 * x[0] * x[1], x[0].sin() * x[1].exp() + x[0] * x[0]];
        for i in 0..2 {
            prop_assert!((g[i] - want[i]).abs() < 1e-5 * (1.0 + want[i].abs()));
        }
    }
}
