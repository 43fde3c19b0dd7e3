//! Brute-force quadrature oracles for the kernel moments and the memory
//! convolutions: adaptive Simpson on the regular part plus the closed-form
//! antiderivative on a vanishing head interval where the integrand is
//! unbounded.

mod common;

use common::{adaptive_simpson, pl_reconstruction, sampled_history, SmoothField};
use magvisc::kernel::{make_kernel, KernelSpec, RelaxationKernel};
use magvisc::memory::{
    convolve_dot_g, convolve_g, history_difference_form, ConvolutionPlan, PlanKind,
};

fn fractional(alpha: f64, scale: f64, shift: f64) -> RelaxationKernel {
    make_kernel(KernelSpec::Fractional { alpha, scale }, shift).unwrap()
}

fn prony(terms: Vec<(f64, f64)>, shift: f64) -> RelaxationKernel {
    make_kernel(KernelSpec::PronySeries { terms }, shift).unwrap()
}

/// moment0/moment1 against adaptive quadrature on `[a + eta, b]` plus the
/// analytic tail on `[a, a + eta]`.
#[test]
fn moments_match_adaptive_quadrature() {
    let kernels = [
        fractional(0.5, 1.0, 0.0),
        fractional(0.25, 2.0, 0.0),
        fractional(0.8, 0.7, 0.03),
        prony(vec![(1.0, 2.0), (0.5, 0.3)], 0.0),
    ];
    let intervals = [(0.0, 1.0), (0.0, 0.01), (0.25, 0.375), (1.0, 2.5)];
    for kernel in &kernels {
        for &(a, b) in &intervals {
            let eta = f64::min((b - a) * 1e-6, 1e-6);
            let head0 = kernel.moment0(a, a + eta).unwrap();
            let body0 = adaptive_simpson(&|s| kernel.eval(s).unwrap(), a + eta, b, 1e-13);
            let m0 = kernel.moment0(a, b).unwrap();
            assert!(
                (m0 - (head0 + body0)).abs() <= 1e-8 * m0.abs().max(1e-3),
                "moment0 on [{a},{b}]: {m0} vs {}",
                head0 + body0
            );

            let head1 = kernel.moment1(a, a + eta).unwrap();
            let body1 =
                adaptive_simpson(&|s| (s - a) * kernel.eval(s).unwrap(), a + eta, b, 1e-13);
            let m1 = kernel.moment1(a, b).unwrap();
            assert!(
                (m1 - (head1 + body1)).abs() <= 1e-8 * m1.abs().max(1e-3),
                "moment1 on [{a},{b}]: {m1} vs {}",
                head1 + body1
            );
        }
    }
}

/// The three memory operations against adaptive quadrature of the exact
/// piecewise-linear reconstruction, on random smooth histories.
#[test]
fn convolutions_match_brute_force_oracle() {
    let dt = 1.0 / 64.0;
    let levels = 64;
    let nodes = 5;

    for seed in [7u64, 21, 99] {
        let field = SmoothField::random(seed, 4);
        let history = sampled_history(&field, dt, levels, nodes);

        // Singular kernel: head interval handled analytically in the oracle.
        let kernel = fractional(0.5, 1.0, 0.0);
        let plan = ConvolutionPlan::new(&kernel, PlanKind::Kernel, dt, levels).unwrap();
        for &level in &[5usize, 31, 64] {
            let got = convolve_g(&history, &plan, level).unwrap();
            for node in 0..nodes {
                let head = {
                    // int_0^dt G(s) [w0 + (w1 - w0) s/dt] ds via exact moments.
                    let w0 = history.profile(level)[node];
                    let w1 = history.profile(level - 1)[node];
                    let m0 = kernel.moment0(0.0, dt).unwrap();
                    let m1 = kernel.moment1(0.0, dt).unwrap();
                    w0 * m0 + (w1 - w0) / dt * m1
                };
                let body = adaptive_simpson(
                    &|s| kernel.eval(s).unwrap() * pl_reconstruction(&history, level, node, s),
                    dt,
                    level as f64 * dt,
                    1e-13,
                );
                let want = if level == 1 { head } else { head + body };
                assert!(
                    (got[node] - want).abs() <= 1e-8 * want.abs().max(1e-6),
                    "convolve_g level {level} node {node}: {} vs {want}",
                    got[node]
                );
            }
        }

        // Regular shifted kernel: derivative convolution and difference form.
        let kernel = fractional(0.5, 1.0, 0.08);
        let plan_dot = ConvolutionPlan::new(&kernel, PlanKind::KernelDot, dt, levels).unwrap();
        for &level in &[5usize, 31, 64] {
            let got = convolve_dot_g(&history, &plan_dot, level).unwrap();
            for node in 0..nodes {
                let want = adaptive_simpson(
                    &|s| kernel.eval_dot(s).unwrap() * pl_reconstruction(&history, level, node, s),
                    0.0,
                    level as f64 * dt,
                    1e-13,
                );
                assert!(
                    (got[node] - want).abs() <= 1e-8 * want.abs().max(1e-6),
                    "convolve_dot_g level {level} node {node}: {} vs {want}",
                    got[node]
                );
            }

            let got = history_difference_form(&history, &plan_dot, level).unwrap();
            for node in 0..nodes {
                let current = history.profile(level)[node];
                let want = adaptive_simpson(
                    &|s| {
                        kernel.eval_dot(s).unwrap()
                            * (current - pl_reconstruction(&history, level, node, s))
                    },
                    0.0,
                    level as f64 * dt,
                    1e-13,
                );
                // The difference form is a sampled trapezoid rule, consistent
                // at O(dt^2 * |(G' w)''|); this shifted kernel is stiff near
                // lag zero, so the constant is large at dt = 1/64.
                assert!(
                    (got[node] - want).abs() <= 0.03 * want.abs().max(1e-3),
                    "difference form level {level} node {node}: {} vs {want}",
                    got[node]
                );
            }
        }
    }
}

/// At a step size matched to its consistency order, the difference form also
/// reaches absolute 1e-8 agreement with the brute-force oracle.
#[test]
fn difference_form_reaches_tight_tolerance_on_gentle_kernel() {
    let kernel = prony(vec![(1.0, 1.0)], 0.0);
    let dt = 5e-4;
    let levels = 64;
    let nodes = 4;
    let field = SmoothField::random(11, 4);
    let history = sampled_history(&field, dt, levels, nodes);
    let plan_dot = ConvolutionPlan::new(&kernel, PlanKind::KernelDot, dt, levels).unwrap();
    let level = levels;
    let got = history_difference_form(&history, &plan_dot, level).unwrap();
    for node in 0..nodes {
        let current = history.profile(level)[node];
        let want = adaptive_simpson(
            &|s| {
                kernel.eval_dot(s).unwrap()
                    * (current - pl_reconstruction(&history, level, node, s))
            },
            0.0,
            level as f64 * dt,
            1e-14,
        );
        assert!(
            (got[node] - want).abs() <= 1e-8,
            "node {node}: {} vs {want}",
            got[node]
        );
    }
}

/// The two-route equivalent-form identity:
/// `G_eps(0) w(t) + int_0^t G_eps'(t - tau) w(tau) dtau
///   = G_eps(t) w(t) - int_0^t G_eps'(s) [w(t) - w(t - s)] ds`.
/// The left route uses exact-moment product integration, the right one the
/// sampled difference form, so the residual measures genuine quadrature
/// error and must shrink under time refinement.
#[test]
fn equivalent_form_identity_shrinks_under_refinement() {
    let kernel = prony(vec![(1.0, 1.0)], 0.0);
    let field = SmoothField::random(3, 4);
    let nodes = 4;

    let residual = |dt: f64, levels: usize| -> f64 {
        let history = sampled_history(&field, dt, levels, nodes);
        let plan_dot = ConvolutionPlan::new(&kernel, PlanKind::KernelDot, dt, levels).unwrap();
        let level = levels;
        let t = level as f64 * dt;
        let conv = convolve_dot_g(&history, &plan_dot, level).unwrap();
        let hdf = history_difference_form(&history, &plan_dot, level).unwrap();
        let g0 = kernel.eval(0.0).unwrap();
        let gt = kernel.eval(t).unwrap();
        let mut max_res: f64 = 0.0;
        for node in 0..nodes {
            let w = history.profile(level)[node];
            let lhs = g0 * w + conv[node];
            let rhs = gt * w - hdf[node];
            max_res = max_res.max((lhs - rhs).abs());
        }
        max_res
    };

    let coarse = residual(5e-4, 48);
    let fine = residual(2.5e-4, 96);
    assert!(coarse <= 1e-8, "coarse residual {coarse}");
    assert!(fine * 3.0 <= coarse, "no O(dt^2) shrink: {coarse} -> {fine}");
}
