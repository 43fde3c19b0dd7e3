//! History storage and memory convolutions.
//!
//! The smooth factor (a stored history of `u_xx` profiles) is reconstructed
//! piecewise-linearly in time and integrated exactly against the kernel on
//! every lag interval via precomputed interval moments. The singular head
//! interval `[0, dt]` is always handled through the closed-form moments,
//! never by sampling.

use crate::kernel::{KernelError, RelaxationKernel};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("plan does not match history ({0})")]
    PlanMismatch(String),
    #[error("derivative kernel is singular at lag zero (epsilon_shift = 0)")]
    SingularDerivative,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Append-only record of past node profiles at `t_k = k * dt`.
#[derive(Debug, Clone)]
pub struct History {
    dt: f64,
    n_nodes: usize,
    levels: Vec<Vec<f64>>,
}

impl History {
    pub fn new(dt: f64, n_nodes: usize) -> Self {
        assert!(dt > 0.0, "history step must be positive");
        History {
            dt,
            n_nodes,
            levels: Vec::new(),
        }
    }

    pub fn push(&mut self, profile: Vec<f64>) -> Result<(), MemoryError> {
        if profile.len() != self.n_nodes {
            return Err(MemoryError::PlanMismatch(format!(
                "profile has {} nodes, history expects {}",
                profile.len(),
                self.n_nodes
            )));
        }
        self.levels.push(profile);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn profile(&self, level: usize) -> &[f64] {
        &self.levels[level]
    }
}

/// Which function the plan integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    /// The kernel `G` itself.
    Kernel,
    /// Its first derivative.
    KernelDot,
}

/// Precomputed product-integration weights.
///
/// On lag interval `[k dt, (k+1) dt]` the piecewise-linear reconstruction
/// `w(s) = w_k + (s - s_k)(w_{k+1} - w_k)/dt` integrates exactly against the
/// kernel as `w_k * near[k] + w_{k+1} * far[k]` with
/// `near = m0 - m1/dt`, `far = m1/dt`.
#[derive(Debug, Clone)]
pub struct ConvolutionPlan {
    kernel: RelaxationKernel,
    kind: PlanKind,
    dt: f64,
    near: Vec<f64>,
    far: Vec<f64>,
}

impl ConvolutionPlan {
    /// Builds weights for `max_intervals` lag intervals.
    pub fn new(
        kernel: &RelaxationKernel,
        kind: PlanKind,
        dt: f64,
        max_intervals: usize,
    ) -> Result<Self, MemoryError> {
        assert!(dt > 0.0, "plan step must be positive");
        if kind == PlanKind::KernelDot && kernel.singular_at_zero() {
            return Err(MemoryError::SingularDerivative);
        }
        let mut near = Vec::with_capacity(max_intervals);
        let mut far = Vec::with_capacity(max_intervals);
        for k in 0..max_intervals {
            let a = k as f64 * dt;
            let b = (k + 1) as f64 * dt;
            let (m0, m1) = match kind {
                PlanKind::Kernel => (kernel.moment0(a, b)?, kernel.moment1(a, b)?),
                PlanKind::KernelDot => (kernel.moment0_dot(a, b)?, kernel.moment1_dot(a, b)?),
            };
            let mut w_near = m0 - m1 / dt;
            let mut w_far = m1 / dt;
            // Both weights inherit the kernel's sign analytically
            // (0 <= m1 <= dt * m0 for G >= 0, reversed for G' <= 0);
            // rounding must not flip them.
            match kind {
                PlanKind::Kernel => {
                    w_near = w_near.max(0.0);
                    w_far = w_far.max(0.0);
                }
                PlanKind::KernelDot => {
                    w_near = w_near.min(0.0);
                    w_far = w_far.min(0.0);
                }
            }
            near.push(w_near);
            far.push(w_far);
        }
        Ok(ConvolutionPlan {
            kernel: kernel.clone(),
            kind,
            dt,
            near,
            far,
        })
    }

    pub fn kernel(&self) -> &RelaxationKernel {
        &self.kernel
    }

    pub fn kind(&self) -> PlanKind {
        self.kind
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_intervals(&self) -> usize {
        self.near.len()
    }

    /// Weight multiplying the lag-zero profile value on the head interval.
    pub fn head_weight(&self) -> f64 {
        self.near[0]
    }

    fn check(&self, history: &History, kind: PlanKind, level: usize) -> Result<(), MemoryError> {
        if self.kind != kind {
            return Err(MemoryError::PlanMismatch("plan built for the wrong integrand".into()));
        }
        if self.dt != history.dt() {
            return Err(MemoryError::PlanMismatch(format!(
                "plan dt = {} but history dt = {}",
                self.dt,
                history.dt()
            )));
        }
        if level > self.near.len() {
            return Err(MemoryError::PlanMismatch(format!(
                "plan holds {} intervals, level {level} requested",
                self.near.len()
            )));
        }
        Ok(())
    }
}

fn accumulate(history: &History, plan: &ConvolutionPlan, level: usize) -> Vec<f64> {
    let n_nodes = history.n_nodes();
    let mut out = vec![0.0; n_nodes];
    // Lag interval j covers tau in [t_{level-j-1}, t_{level-j}].
    for j in 0..level {
        let near = plan.near[j];
        let far = plan.far[j];
        let p_near = history.profile(level - j);
        let p_far = history.profile(level - j - 1);
        for i in 0..n_nodes {
            out[i] += near * p_near[i] + far * p_far[i];
        }
    }
    out
}

/// `int_0^{t_level} G(t_level - tau) w(tau) dtau` for the stored history `w`.
///
/// The history must be filled through `t_level`; the result at level 0 is the
/// zero profile.
pub fn convolve_g(
    history: &History,
    plan: &ConvolutionPlan,
    level: usize,
) -> Result<Vec<f64>, MemoryError> {
    plan.check(history, PlanKind::Kernel, level)?;
    if level >= history.len() {
        return Err(MemoryError::PlanMismatch(format!(
            "history has {} levels, convolution at level {level} requested",
            history.len()
        )));
    }
    Ok(accumulate(history, plan, level))
}

/// Same quadrature applied to the translated kernel's derivative.
pub fn convolve_dot_g(
    history: &History,
    plan: &ConvolutionPlan,
    level: usize,
) -> Result<Vec<f64>, MemoryError> {
    plan.check(history, PlanKind::KernelDot, level)?;
    if level >= history.len() {
        return Err(MemoryError::PlanMismatch(format!(
            "history has {} levels, convolution at level {level} requested",
            history.len()
        )));
    }
    Ok(accumulate(history, plan, level))
}

/// Convolution at `target_level = history.len()` split around the unknown
/// newest profile: returns every term that uses stored profiles plus the
/// scalar weight of the missing lag-zero value.
///
/// If `p_new` is the profile at the target level, the full convolution is
/// `known + head_weight * p_new`.
pub fn convolve_g_head_split(
    history: &History,
    plan: &ConvolutionPlan,
) -> Result<(Vec<f64>, f64), MemoryError> {
    let target = history.len();
    if target == 0 {
        return Err(MemoryError::PlanMismatch("history holds no levels yet".into()));
    }
    plan.check(history, PlanKind::Kernel, target)?;
    let n_nodes = history.n_nodes();
    let mut out = vec![0.0; n_nodes];
    for j in 0..target {
        let far = plan.far[j];
        let p_far = history.profile(target - j - 1);
        for i in 0..n_nodes {
            out[i] += far * p_far[i];
        }
        if j > 0 {
            let near = plan.near[j];
            let p_near = history.profile(target - j);
            for i in 0..n_nodes {
                out[i] += near * p_near[i];
            }
        }
    }
    Ok((out, plan.head_weight()))
}

/// `int_0^{t_level} G'(s + eps) [w(t_level) - w(t_level - s)] ds`, evaluated
/// by sampled trapezoid quadrature of the integrand (an independent route from
/// the exact-moment convolution, so the two sides of the equivalent-form
/// identity are genuinely distinct computations).
pub fn history_difference_form(
    history: &History,
    plan: &ConvolutionPlan,
    level: usize,
) -> Result<Vec<f64>, MemoryError> {
    plan.check(history, PlanKind::KernelDot, level)?;
    if plan.kernel.singular_at_zero() {
        return Err(MemoryError::SingularDerivative);
    }
    if level >= history.len() {
        return Err(MemoryError::PlanMismatch(format!(
            "history has {} levels, difference form at level {level} requested",
            history.len()
        )));
    }
    let n_nodes = history.n_nodes();
    let dt = history.dt();
    let current = history.profile(level);
    let mut out = vec![0.0; n_nodes];
    let g_dot: Vec<f64> = (0..=level)
        .map(|j| plan.kernel.eval_dot(j as f64 * dt))
        .collect::<Result<_, _>>()?;
    for j in 0..=level {
        // Trapezoid weights over [0, t_level].
        let w = if j == 0 || j == level { 0.5 } else { 1.0 };
        let past = history.profile(level - j);
        let coeff = w * dt * g_dot[j];
        for i in 0..n_nodes {
            out[i] += coeff * (current[i] - past[i]);
        }
    }
    Ok(out)
}
