//! Relaxation-kernel families: pointwise values, `epsilon`-translations, and
//! exact interval moments for singular-aware product integration.
//!
//! A kernel `G` must be positive, non-increasing and convex on `(0, inf)`.
//! The `Fractional` family is integrable but unbounded at the origin; the
//! translated kernel `G(eps + .)` is smooth on `[0, T]` for any `eps > 0`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),
    #[error("kernel evaluated at its singular point (t + shift = 0)")]
    EvalAtSingularity,
    #[error("interval moment is not finite for this family/shift combination")]
    NotIntegrable,
}

/// Admissible relaxation-function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    /// `G(t) = scale * t^(-alpha) / Gamma(1 - alpha)` with `0 < alpha < 1`.
    Fractional { alpha: f64, scale: f64 },
    /// `G(t) = sum_i c_i * exp(-r_i t)` with `c_i >= 0`, `r_i >= 0`.
    PronySeries { terms: Vec<(f64, f64)> },
    /// `G(t) = value` with `value > 0`.
    Constant { value: f64 },
}

impl KernelSpec {
    /// Checks the family parameters against their admissible ranges.
    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            KernelSpec::Fractional { alpha, scale } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(KernelError::InvalidSpec(format!(
                        "alpha = {alpha} must lie in (0,1)"
                    )));
                }
                if !(*scale > 0.0) {
                    return Err(KernelError::InvalidSpec(format!(
                        "scale = {scale} must be positive"
                    )));
                }
                Ok(())
            }
            KernelSpec::PronySeries { terms } => {
                if !terms.iter().any(|&(c, _)| c > 0.0) {
                    return Err(KernelError::InvalidSpec(
                        "Prony series needs at least one positive coefficient".into(),
                    ));
                }
                for &(c, r) in terms {
                    if !(c >= 0.0) || !(r >= 0.0) || !c.is_finite() || !r.is_finite() {
                        return Err(KernelError::InvalidSpec(format!(
                            "Prony term ({c}, {r}) outside coefficient >= 0, rate >= 0"
                        )));
                    }
                }
                Ok(())
            }
            KernelSpec::Constant { value } => {
                if !(*value > 0.0) {
                    return Err(KernelError::InvalidSpec(format!(
                        "constant value = {value} must be positive"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Escape hatch for tests: builds a fractional spec without range checks,
    /// so that validation failure paths (e.g. `t^(-3/2)`) are exercisable.
    #[doc(hidden)]
    pub fn fractional_unchecked(alpha: f64, scale: f64) -> Self {
        KernelSpec::Fractional { alpha, scale }
    }

    fn is_singular_at_origin(&self) -> bool {
        matches!(self, KernelSpec::Fractional { .. })
    }
}

/// A relaxation function together with its time translation.
///
/// `epsilon_shift = 0` is the untranslated (possibly singular) kernel; for any
/// positive shift the kernel is finite and twice differentiable on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationKernel {
    spec: KernelSpec,
    epsilon_shift: f64,
}

/// Which of the sign conditions a sampled point violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignCondition {
    Positivity,
    FirstDerivative,
    SecondDerivative,
}

/// Numerical witness that a kernel satisfies (or fails) its hypotheses.
#[derive(Debug, Clone, Serialize)]
pub struct KernelValidationReport {
    pub integrable_on_0t: bool,
    pub sign_violations: Vec<(f64, SignCondition)>,
    /// `(t_min, t_max, sample count)` of the log-spaced probe points.
    pub sampled_range: (f64, f64, usize),
}

impl KernelValidationReport {
    pub fn is_clean(&self) -> bool {
        self.integrable_on_0t && self.sign_violations.is_empty()
    }
}

/// Builds a translated kernel `G(epsilon_shift + .)`.
pub fn make_kernel(spec: KernelSpec, epsilon_shift: f64) -> Result<RelaxationKernel, KernelError> {
    spec.validate()?;
    if !(epsilon_shift >= 0.0) || !epsilon_shift.is_finite() {
        return Err(KernelError::InvalidSpec(format!(
            "epsilon_shift = {epsilon_shift} must be finite and >= 0"
        )));
    }
    Ok(RelaxationKernel {
        spec,
        epsilon_shift,
    })
}

impl RelaxationKernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn epsilon_shift(&self) -> f64 {
        self.epsilon_shift
    }

    /// Same family, different translation.
    pub fn with_shift(&self, epsilon_shift: f64) -> Result<Self, KernelError> {
        make_kernel(self.spec.clone(), epsilon_shift)
    }

    /// True when evaluation at lag 0 would hit the singularity.
    pub fn singular_at_zero(&self) -> bool {
        self.spec.is_singular_at_origin() && self.epsilon_shift == 0.0
    }

    /// `G(t + epsilon_shift)`.
    pub fn eval(&self, t: f64) -> Result<f64, KernelError> {
        let s = t + self.epsilon_shift;
        match &self.spec {
            KernelSpec::Fractional { alpha, scale } => {
                if s <= 0.0 {
                    return Err(KernelError::EvalAtSingularity);
                }
                Ok(scale * s.powf(-alpha) / gamma(1.0 - alpha))
            }
            KernelSpec::PronySeries { terms } => {
                Ok(terms.iter().map(|&(c, r)| c * (-r * s).exp()).sum())
            }
            KernelSpec::Constant { value } => Ok(*value),
        }
    }

    /// First derivative `G'(t + epsilon_shift)`.
    pub fn eval_dot(&self, t: f64) -> Result<f64, KernelError> {
        let s = t + self.epsilon_shift;
        match &self.spec {
            KernelSpec::Fractional { alpha, scale } => {
                if s <= 0.0 {
                    return Err(KernelError::EvalAtSingularity);
                }
                Ok(-alpha * scale * s.powf(-alpha - 1.0) / gamma(1.0 - alpha))
            }
            KernelSpec::PronySeries { terms } => {
                Ok(terms.iter().map(|&(c, r)| -c * r * (-r * s).exp()).sum())
            }
            KernelSpec::Constant { .. } => Ok(0.0),
        }
    }

    /// Second derivative `G''(t + epsilon_shift)`; exposed for validation.
    pub fn eval_ddot(&self, t: f64) -> Result<f64, KernelError> {
        let s = t + self.epsilon_shift;
        match &self.spec {
            KernelSpec::Fractional { alpha, scale } => {
                if s <= 0.0 {
                    return Err(KernelError::EvalAtSingularity);
                }
                Ok(alpha * (alpha + 1.0) * scale * s.powf(-alpha - 2.0) / gamma(1.0 - alpha))
            }
            KernelSpec::PronySeries { terms } => {
                Ok(terms.iter().map(|&(c, r)| c * r * r * (-r * s).exp()).sum())
            }
            KernelSpec::Constant { .. } => Ok(0.0),
        }
    }

    /// `int_a^b G(epsilon_shift + s) ds`, in closed form. `a = 0` is allowed
    /// even when the integrand is unbounded there.
    pub fn moment0(&self, a: f64, b: f64) -> Result<f64, KernelError> {
        check_interval(a, b, self.epsilon_shift)?;
        let lo = a + self.epsilon_shift;
        let hi = b + self.epsilon_shift;
        let value = match &self.spec {
            KernelSpec::Fractional { alpha, scale } => {
                let p = 1.0 - alpha;
                scale / gamma(p) * power_diff(lo, hi, p) / p
            }
            KernelSpec::PronySeries { terms } => terms
                .iter()
                .map(|&(c, r)| {
                    if r == 0.0 {
                        c * (b - a)
                    } else {
                        c * (-r * lo).exp() * (-(-r * (hi - lo)).exp_m1()) / r
                    }
                })
                .sum(),
            KernelSpec::Constant { value } => value * (b - a),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(KernelError::NotIntegrable)
        }
    }

    /// `int_a^b (s - a) G(epsilon_shift + s) ds`, in closed form.
    pub fn moment1(&self, a: f64, b: f64) -> Result<f64, KernelError> {
        check_interval(a, b, self.epsilon_shift)?;
        let lo = a + self.epsilon_shift;
        let hi = b + self.epsilon_shift;
        let value = match &self.spec {
            KernelSpec::Fractional { alpha, scale } => {
                let p1 = 1.0 - alpha;
                let p2 = 2.0 - alpha;
                scale / gamma(p1) * (power_diff(lo, hi, p2) / p2 - lo * power_diff(lo, hi, p1) / p1)
            }
            KernelSpec::PronySeries { terms } => terms
                .iter()
                .map(|&(c, r)| {
                    let len = hi - lo;
                    if r == 0.0 {
                        c * len * len / 2.0
                    } else {
                        let em = -(-r * len).exp_m1(); // 1 - exp(-r len)
                        c * (-r * lo).exp() * (em / (r * r) - len * (-r * len).exp() / r)
                    }
                })
                .sum(),
            KernelSpec::Constant { value } => value * (b - a) * (b - a) / 2.0,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(KernelError::NotIntegrable)
        }
    }

    /// `int_a^b G'(epsilon_shift + s) ds = G(b) - G(a)` through the shifted kernel.
    /// Requires a regular kernel when `a = 0`.
    pub fn moment0_dot(&self, a: f64, b: f64) -> Result<f64, KernelError> {
        check_interval(a, b, self.epsilon_shift)?;
        if a + self.epsilon_shift == 0.0 && self.spec.is_singular_at_origin() {
            return Err(KernelError::NotIntegrable);
        }
        Ok(self.eval(b)? - self.eval(a)?)
    }

    /// `int_a^b (s - a) G'(epsilon_shift + s) ds`, by parts:
    /// `(b - a) G(b) - int_a^b G`.
    pub fn moment1_dot(&self, a: f64, b: f64) -> Result<f64, KernelError> {
        check_interval(a, b, self.epsilon_shift)?;
        if a + self.epsilon_shift == 0.0 && self.spec.is_singular_at_origin() {
            return Err(KernelError::NotIntegrable);
        }
        Ok((b - a) * self.eval(b)? - self.moment0(a, b)?)
    }
}

fn check_interval(a: f64, b: f64, shift: f64) -> Result<(), KernelError> {
    if !(a >= 0.0 && b > a) || a + shift < 0.0 {
        return Err(KernelError::InvalidSpec(format!(
            "moment interval [{a}, {b}] must satisfy 0 <= a < b"
        )));
    }
    Ok(())
}

/// `hi^p - lo^p`, stable against cancellation for `0 < lo <= hi`.
fn power_diff(lo: f64, hi: f64, p: f64) -> f64 {
    if lo == 0.0 {
        if p > 0.0 {
            return hi.powf(p);
        }
        // Divergent endpoint: propagate the infinity so callers can reject.
        return hi.powf(p) - f64::INFINITY;
    }
    lo.powf(p) * (p * ((hi - lo) / lo).ln_1p()).exp_m1()
}

/// Samples the sign conditions on log-spaced points of `(0, T]` and checks
/// integrability of `G` near the origin through the closed-form moment.
///
/// A failing kernel yields a report, never an error.
pub fn validate(kernel: &RelaxationKernel, horizon: f64, samples: usize) -> KernelValidationReport {
    assert!(horizon > 0.0, "validation horizon must be positive");
    assert!(samples >= 2, "need at least two sample points");

    // Probe down to 1e-10 * T so the singular end is exercised.
    let t_min = horizon * 1e-10;
    let ratio = (horizon / t_min).ln();
    let mut sign_violations = Vec::new();
    for i in 0..samples {
        let frac = i as f64 / (samples - 1) as f64;
        let t = t_min * (ratio * frac).exp();
        let g = kernel.eval(t);
        let gd = kernel.eval_dot(t);
        let gdd = kernel.eval_ddot(t);
        match g {
            Ok(v) if v > 0.0 => {}
            _ => sign_violations.push((t, SignCondition::Positivity)),
        }
        match gd {
            Ok(v) if v <= 0.0 => {}
            _ => sign_violations.push((t, SignCondition::FirstDerivative)),
        }
        match gdd {
            Ok(v) if v >= 0.0 => {}
            _ => sign_violations.push((t, SignCondition::SecondDerivative)),
        }
    }

    let integrable_on_0t = kernel.moment0(0.0, horizon).is_ok();

    KernelValidationReport {
        integrable_on_0t,
        sign_violations,
        sampled_range: (t_min, horizon, samples),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    fn fractional(alpha: f64, scale: f64, shift: f64) -> RelaxationKernel {
        make_kernel(KernelSpec::Fractional { alpha, scale }, shift).unwrap()
    }

    #[test]
    fn constant_kernel_evaluates_to_its_value() {
        let k = make_kernel(KernelSpec::Constant { value: 2.0 }, 0.0).unwrap();
        assert_eq!(k.eval(0.7).unwrap(), 2.0);
        assert_eq!(k.eval_dot(0.7).unwrap(), 0.0);
        assert_eq!(k.eval_ddot(0.7).unwrap(), 0.0);
    }

    #[test]
    fn shifted_fractional_is_finite_from_zero() {
        let k = fractional(0.5, 1.0, 0.1);
        assert!(k.eval(0.0).unwrap().is_finite());
        assert!(!k.singular_at_zero());
        assert!(fractional(0.5, 1.0, 0.0).singular_at_zero());
    }

    #[test]
    fn out_of_range_alpha_is_rejected() {
        let err = make_kernel(KernelSpec::Fractional { alpha: 1.5, scale: 1.0 }, 0.0).unwrap_err();
        assert!(matches!(err, KernelError::InvalidSpec(_)));
        let err = make_kernel(KernelSpec::Constant { value: -1.0 }, 0.0).unwrap_err();
        assert!(matches!(err, KernelError::InvalidSpec(_)));
        let err = make_kernel(KernelSpec::PronySeries { terms: vec![(0.0, 1.0)] }, 0.0).unwrap_err();
        assert!(matches!(err, KernelError::InvalidSpec(_)));
    }

    #[test]
    fn fractional_closed_form_values() {
        // G(t) = t^(-1/2) / Gamma(1/2), Gamma(1/2) = sqrt(pi).
        let k = fractional(0.5, 1.0, 0.0);
        assert_relative_eq!(k.eval(1.0).unwrap(), 1.0 / SQRT_PI, max_relative = 1e-14);
        assert_relative_eq!(k.eval(0.25).unwrap(), 2.0 / SQRT_PI, max_relative = 1e-14);
        assert!(matches!(k.eval(0.0), Err(KernelError::EvalAtSingularity)));
    }

    #[test]
    fn fractional_moments_match_antiderivative() {
        let k = fractional(0.5, 1.0, 0.0);
        // int_0^1 t^(-1/2)/Gamma(1/2) dt = 2/sqrt(pi)
        assert_relative_eq!(k.moment0(0.0, 1.0).unwrap(), 2.0 / SQRT_PI, max_relative = 1e-13);
        let h = 0.01f64;
        assert_relative_eq!(
            k.moment0(0.0, h).unwrap(),
            2.0 * h.sqrt() / SQRT_PI,
            max_relative = 1e-13
        );
        // int_0^b s * s^(-1/2) ds = (2/3) b^(3/2)
        assert_relative_eq!(
            k.moment1(0.0, 1.0).unwrap(),
            (2.0 / 3.0) / SQRT_PI,
            max_relative = 1e-13
        );
    }

    #[test]
    fn constant_moments() {
        let k = make_kernel(KernelSpec::Constant { value: 3.0 }, 0.0).unwrap();
        assert_relative_eq!(k.moment0(0.2, 0.9).unwrap(), 3.0 * 0.7, max_relative = 1e-15);
        assert_relative_eq!(k.moment1(0.2, 0.9).unwrap(), 3.0 * 0.49 / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn prony_moments_match_exponential_antiderivative() {
        let k = make_kernel(KernelSpec::PronySeries { terms: vec![(1.0, 2.0)] }, 0.0).unwrap();
        // int_a^b e^(-2s) ds
        let exact = ((-2.0 * 0.1f64).exp() - (-2.0 * 0.7f64).exp()) / 2.0;
        assert_relative_eq!(k.moment0(0.1, 0.7).unwrap(), exact, max_relative = 1e-13);
    }

    #[test]
    fn dot_moments_telescope_to_kernel_difference() {
        let k = fractional(0.5, 1.0, 0.05);
        let m = k.moment0_dot(0.0, 0.4).unwrap();
        assert_relative_eq!(m, k.eval(0.4).unwrap() - k.eval(0.0).unwrap(), max_relative = 1e-13);
        let err = fractional(0.5, 1.0, 0.0).moment0_dot(0.0, 0.4).unwrap_err();
        assert_eq!(err, KernelError::NotIntegrable);
    }

    #[test]
    fn validation_accepts_admissible_families() {
        let report = validate(&fractional(0.5, 1.0, 0.0), 1.0, 200);
        assert!(report.integrable_on_0t);
        assert!(report.sign_violations.is_empty());

        let prony = make_kernel(KernelSpec::PronySeries { terms: vec![(1.0, 2.0)] }, 0.0).unwrap();
        let report = validate(&prony, 1.0, 200);
        assert!(report.is_clean());
    }

    #[test]
    fn validation_flags_divergent_pseudo_kernel() {
        // t^(-3/2) is not integrable near 0; constructed via the test bypass.
        let spec = KernelSpec::fractional_unchecked(1.5, 1.0);
        let kernel = RelaxationKernel { spec, epsilon_shift: 0.0 };
        let report = validate(&kernel, 1.0, 50);
        assert!(!report.integrable_on_0t);
    }

    #[test]
    fn translation_consistency_is_exact() {
        let base = fractional(0.3, 2.0, 0.0);
        let shifted = fractional(0.3, 2.0, 0.125);
        for i in 0..50 {
            let t = 0.02 * i as f64;
            assert_eq!(shifted.eval(t).unwrap(), base.eval(t + 0.125).unwrap());
        }
    }

    #[test]
    fn monotone_domination_in_shift() {
        let k1 = fractional(0.5, 1.0, 0.01);
        let k2 = fractional(0.5, 1.0, 0.2);
        for i in 0..100 {
            let t = 0.03 * i as f64;
            assert!(k1.eval(t).unwrap() >= k2.eval(t).unwrap());
        }
    }

    #[test]
    fn uniform_lower_bound_over_horizon() {
        // G(t + eps) > G(T + 1) for t in [0, T], eps in (0, 1].
        let base = fractional(0.5, 1.0, 0.0);
        let horizon = 2.0;
        let floor = base.eval(horizon + 1.0).unwrap();
        for &eps in &[1e-3, 0.05, 0.3, 1.0] {
            let k = fractional(0.5, 1.0, eps);
            for i in 0..=40 {
                let t = horizon * i as f64 / 40.0;
                assert!(k.eval(t).unwrap() >= floor);
            }
        }
    }

    #[test]
    fn moment_additivity() {
        let k = fractional(0.5, 1.0, 0.0);
        let (a, b, c) = (0.0, 0.37, 1.11);
        let whole = k.moment0(a, c).unwrap();
        let split = k.moment0(a, b).unwrap() + k.moment0(b, c).unwrap();
        assert_relative_eq!(whole, split, max_relative = 1e-12);
    }
}
