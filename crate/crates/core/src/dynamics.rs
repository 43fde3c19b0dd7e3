//! Time integration of the coupled system: the regular translated problem
//! (second order in time), the singular-kernel evolution form (first order in
//! `u_t`), and the decoupled viscoelastic subproblem.

use crate::field::{
    dx_centered, dxx, BcType, FieldError, FieldState, ForcingTag, Grid, InitialData,
};
use crate::kernel::{KernelError, RelaxationKernel};
use crate::memory::{
    convolve_dot_g, convolve_g_head_split, ConvolutionPlan, History, MemoryError, PlanKind,
};
use crate::tridiag;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("time step {dt} exceeds the stability bound {bound} (h = {h}, G_eps(0) = {g0})")]
    CflViolation { dt: f64, bound: f64, h: f64, g0: f64 },
    #[error("tridiagonal solve broke down in the magnetization step")]
    SolverFailure,
    #[error("mode {0:?} requires a kernel shift {1}")]
    ModeMismatch(RunMode, String),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `Lambda(m) = (m2, m1)`: linear, self-adjoint coupling operator.
pub fn lambda_op(m: [f64; 2]) -> [f64; 2] {
    [m[1], m[0]]
}

/// `Lambda(m) . m = 2 m1 m2`.
pub fn lambda_dot(m: [f64; 2]) -> f64 {
    2.0 * m[0] * m[1]
}

/// Run parameters for one trajectory.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Coupling strength, `>= 0`.
    pub lambda: f64,
    /// Penalization parameter, `> 0`.
    pub delta: f64,
    pub kernel: RelaxationKernel,
    pub t_end: f64,
    pub dt: f64,
    pub grid: Grid,
}

impl ModelParams {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.delta > 0.0 && self.lambda >= 0.0) {
            return Err(DynamicsError::ModeMismatch(
                RunMode::RegularEps,
                "parameters must satisfy dt > 0, t_end > 0, delta > 0, lambda >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Hard stability ceiling `dt <= h / sqrt(G_eps(0))` for the explicit
    /// second-order stepper.
    pub fn cfl_bound(&self) -> Result<f64, DynamicsError> {
        let g0 = self.kernel.eval(0.0)?;
        Ok(self.grid.h() / g0.sqrt())
    }
}

/// Which problem a trajectory integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum RunMode {
    /// Translated problem, second order in time; requires `epsilon_shift > 0`.
    RegularEps,
    /// Evolution form with the (possibly singular) untranslated kernel.
    SingularEvolution,
    /// Viscoelastic subproblem with prescribed right-hand side; the
    /// magnetization is frozen at its initial value.
    ViscoelasticOnly,
}

/// A complete run: parameters, every state, and the `u_xx` history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub mode: RunMode,
    pub initial: InitialData,
    pub states: Vec<FieldState>,
    pub history: History,
}

impl Trajectory {
    pub fn n_levels(&self) -> usize {
        self.states.len()
    }

    pub fn u_profiles(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.u.clone()).collect()
    }
}

/// Scratch carried across steps: the cached acceleration and the running
/// time integrals of the magnetic flux and the forcing.
#[derive(Debug, Clone)]
pub struct StepContext {
    accel: Option<Vec<f64>>,
    flux_integral: Vec<f64>,
    forcing_integral: Vec<f64>,
    /// Magnetization evolves unless the run is the decoupled subproblem.
    evolve_m: bool,
}

impl StepContext {
    pub fn new(grid: &Grid) -> Self {
        StepContext {
            accel: None,
            flux_integral: vec![0.0; grid.n_nodes()],
            forcing_integral: vec![0.0; grid.n_nodes()],
            evolve_m: true,
        }
    }

    fn frozen_magnetization(grid: &Grid) -> Self {
        StepContext {
            evolve_m: false,
            ..StepContext::new(grid)
        }
    }
}

/// Magnetic flux term `(lambda / 2) (Lambda(m) . m)_x` as a node profile.
fn flux_profile(
    m1: &[f64],
    m2: &[f64],
    lambda: f64,
    grid: &Grid,
) -> Result<Vec<f64>, FieldError> {
    if lambda == 0.0 {
        return Ok(vec![0.0; grid.n_nodes()]);
    }
    let prod: Vec<f64> = m1
        .iter()
        .zip(m2)
        .map(|(a, b)| lambda_dot([*a, *b]))
        .collect();
    let mut d = dx_centered(&prod, grid)?;
    for v in &mut d {
        *v *= lambda / 2.0;
    }
    Ok(d)
}

/// One semi-implicit magnetization step: diffusion implicit (tridiagonal
/// solve), penalty as `m_new (|m_old|^2 - 1) / delta`, coupling explicit at
/// the old level. The discrete Neumann condition (one-sided difference zero)
/// is built into the boundary rows.
pub fn step_magnetization(
    state: &FieldState,
    params: &ModelParams,
) -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
    let grid = &params.grid;
    let n = grid.n_cells();
    let h2 = grid.h() * grid.h();
    let dt = params.dt;
    let ux = dx_centered(&state.u, grid)?;

    let mut diag = vec![0.0; n + 1];
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    diag[0] = 1.0;
    upper[0] = -1.0;
    diag[n] = 1.0;
    lower[n - 1] = -1.0;
    for j in 1..n {
        let q = state.m1[j] * state.m1[j] + state.m2[j] * state.m2[j] - 1.0;
        diag[j] = 1.0 / dt + q / params.delta + 2.0 / h2;
        lower[j - 1] = -1.0 / h2;
        upper[j] = -1.0 / h2;
    }

    let solve_component = |m_old: &[f64], coupling: &dyn Fn(usize) -> f64| {
        let mut rhs = vec![0.0; n + 1];
        for j in 1..n {
            rhs[j] = m_old[j] / dt - params.lambda * coupling(j) * ux[j];
        }
        tridiag::solve(&lower, &diag, &upper, &rhs).ok_or(DynamicsError::SolverFailure)
    };

    // Lambda swaps components: the m1 equation couples to m2 and vice versa.
    let m1_new = solve_component(&state.m1, &|j| state.m2[j])?;
    let m2_new = solve_component(&state.m2, &|j| state.m1[j])?;
    Ok((m1_new, m2_new))
}

fn acceleration(
    u: &[f64],
    m1: &[f64],
    m2: &[f64],
    history: &History,
    level: usize,
    params: &ModelParams,
    forcing: &ForcingTag,
    plan_dot: &ConvolutionPlan,
) -> Result<Vec<f64>, DynamicsError> {
    let grid = &params.grid;
    let g0 = params.kernel.eval(0.0)?;
    let uxx = dxx(u, grid, BcType::Dirichlet)?;
    let conv = convolve_dot_g(history, plan_dot, level)?;
    let flux = flux_profile(m1, m2, params.lambda, grid)?;
    let f = forcing.profile(grid, level)?;
    let n = grid.n_cells();
    let mut a = vec![0.0; n + 1];
    for j in 1..n {
        a[j] = g0 * uxx[j] + conv[j] + flux[j] + f[j];
    }
    // u vanishes on the boundary for all time, so u_tt does as well.
    Ok(a)
}

/// One step of the translated second-order problem: explicit central
/// differencing of `u` with the memory term at the current level, then the
/// magnetization update. Appends the new `u_xx` profile to the history.
pub fn step_coupled_eps(
    state: &FieldState,
    history: &mut History,
    ctx: &mut StepContext,
    params: &ModelParams,
    forcing: &ForcingTag,
    plan_dot: &ConvolutionPlan,
) -> Result<FieldState, DynamicsError> {
    if params.kernel.singular_at_zero() {
        return Err(DynamicsError::ModeMismatch(
            RunMode::RegularEps,
            "epsilon_shift > 0".into(),
        ));
    }
    let bound = params.cfl_bound()?;
    if params.dt > bound * (1.0 + 1e-12) {
        return Err(DynamicsError::CflViolation {
            dt: params.dt,
            bound,
            h: params.grid.h(),
            g0: params.kernel.eval(0.0)?,
        });
    }
    let grid = &params.grid;
    let n = grid.n_cells();
    let dt = params.dt;
    let level = (state.t / dt).round() as usize;
    if history.len() != level + 1 {
        return Err(MemoryError::PlanMismatch(format!(
            "state at level {level} but history holds {} profiles",
            history.len()
        ))
        .into());
    }

    let a_old = match ctx.accel.take() {
        Some(a) => a,
        None => acceleration(
            &state.u, &state.m1, &state.m2, history, level, params, forcing, plan_dot,
        )?,
    };

    let mut u_new = vec![0.0; n + 1];
    for j in 1..n {
        u_new[j] = state.u[j] + dt * state.v[j] + 0.5 * dt * dt * a_old[j];
    }
    history.push(dxx(&u_new, grid, BcType::Dirichlet)?)?;

    let (m1_new, m2_new) = if ctx.evolve_m {
        step_magnetization(state, params)?
    } else {
        (state.m1.clone(), state.m2.clone())
    };

    let a_new = acceleration(
        &u_new, &m1_new, &m2_new, history, level + 1, params, forcing, plan_dot,
    )?;
    let mut v_new = vec![0.0; n + 1];
    for j in 1..n {
        v_new[j] = state.v[j] + 0.5 * dt * (a_old[j] + a_new[j]);
    }
    ctx.accel = Some(a_new);

    Ok(FieldState {
        t: (level + 1) as f64 * dt,
        u: u_new,
        v: v_new,
        m1: m1_new,
        m2: m2_new,
    })
}

/// One step of the evolution form. The velocity identity
/// `v = u1 + int G u_xx + int flux + int f` is enforced at the new level with
/// the memory integral's lag-zero weight kept implicit, and `u` advances by
/// the trapezoid of `v`; the resulting system per step is tridiagonal.
pub fn step_evolution_singular(
    state: &FieldState,
    history: &mut History,
    ctx: &mut StepContext,
    params: &ModelParams,
    forcing: &ForcingTag,
    u1: &[f64],
    plan: &ConvolutionPlan,
) -> Result<FieldState, DynamicsError> {
    let grid = &params.grid;
    let n = grid.n_cells();
    let h2 = grid.h() * grid.h();
    let dt = params.dt;
    let level = (state.t / dt).round() as usize;
    if history.len() != level + 1 {
        return Err(MemoryError::PlanMismatch(format!(
            "state at level {level} but history holds {} profiles",
            history.len()
        ))
        .into());
    }

    // Magnetization first, so the flux integral can close its trapezoid.
    let (m1_new, m2_new) = if ctx.evolve_m {
        step_magnetization(state, params)?
    } else {
        (state.m1.clone(), state.m2.clone())
    };
    if ctx.evolve_m && params.lambda != 0.0 {
        let flux_old = flux_profile(&state.m1, &state.m2, params.lambda, grid)?;
        let flux_new = flux_profile(&m1_new, &m2_new, params.lambda, grid)?;
        for j in 0..=n {
            ctx.flux_integral[j] += 0.5 * dt * (flux_old[j] + flux_new[j]);
        }
    }
    if !forcing.is_zero() {
        let f_old = forcing.profile(grid, level)?;
        let f_new = forcing.profile(grid, level + 1)?;
        for j in 0..=n {
            ctx.forcing_integral[j] += 0.5 * dt * (f_old[j] + f_new[j]);
        }
    }

    let (conv_known, w_head) = convolve_g_head_split(history, plan)?;

    // Interior solve for u_new:
    //   u_new - (dt/2) w_head * D u_new = u + (dt/2) v
    //     + (dt/2) [u1 + conv_known + flux_int + forcing_int]
    let beta = 0.5 * dt * w_head / h2;
    let m = n - 1;
    let diag = vec![1.0 + 2.0 * beta; m];
    let off = vec![-beta; m - 1];
    let mut rhs = vec![0.0; m];
    for j in 1..n {
        rhs[j - 1] = state.u[j]
            + 0.5 * dt * state.v[j]
            + 0.5
                * dt
                * (u1[j] + conv_known[j] + ctx.flux_integral[j] + ctx.forcing_integral[j]);
    }
    let interior = tridiag::solve(&off, &diag, &off, &rhs).ok_or(DynamicsError::SolverFailure)?;
    let mut u_new = vec![0.0; n + 1];
    u_new[1..n].copy_from_slice(&interior);

    let uxx_new = dxx(&u_new, grid, BcType::Dirichlet)?;
    let mut v_new = vec![0.0; n + 1];
    for j in 1..n {
        v_new[j] = u1[j]
            + conv_known[j]
            + w_head * uxx_new[j]
            + ctx.flux_integral[j]
            + ctx.forcing_integral[j];
    }
    history.push(uxx_new)?;

    Ok(FieldState {
        t: (level + 1) as f64 * dt,
        u: u_new,
        v: v_new,
        m1: m1_new,
        m2: m2_new,
    })
}

/// Integrates a full trajectory in the requested mode.
pub fn run(
    initial: &InitialData,
    params: &ModelParams,
    mode: RunMode,
) -> Result<Trajectory, DynamicsError> {
    params.validate()?;
    let grid = &params.grid;
    let n_steps = params.n_steps();
    let shift = params.kernel.epsilon_shift();

    let use_second_order = match mode {
        RunMode::RegularEps => {
            if shift == 0.0 && params.kernel.singular_at_zero() {
                return Err(DynamicsError::ModeMismatch(mode, "epsilon_shift > 0".into()));
            }
            true
        }
        RunMode::SingularEvolution => false,
        // The subproblem uses whichever formulation its kernel admits.
        RunMode::ViscoelasticOnly => !params.kernel.singular_at_zero(),
    };

    if mode != RunMode::ViscoelasticOnly && params.dt > params.delta {
        // The semi-implicit penalty's radial mode amplifies by |1 - 2 dt/delta|
        // per step, so dt <= delta is needed for a clean delta -> 0 study.
        log::warn!(
            "dt = {} exceeds delta = {}: the penalty step may oscillate",
            params.dt,
            params.delta
        );
    }
    let mut history = History::new(params.dt, grid.n_nodes());
    history.push(vec![0.0; grid.n_nodes()])?;
    let mut ctx = if mode == RunMode::ViscoelasticOnly {
        StepContext::frozen_magnetization(grid)
    } else {
        StepContext::new(grid)
    };
    let params_run = if mode == RunMode::ViscoelasticOnly {
        let mut p = params.clone();
        p.lambda = 0.0;
        p
    } else {
        params.clone()
    };

    let plan = if use_second_order {
        ConvolutionPlan::new(&params.kernel, PlanKind::KernelDot, params.dt, n_steps + 1)?
    } else {
        ConvolutionPlan::new(&params.kernel, PlanKind::Kernel, params.dt, n_steps + 1)?
    };

    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(initial.initial_state(grid));
    for _ in 0..n_steps {
        let state = states.last().unwrap();
        let next = if use_second_order {
            step_coupled_eps(state, &mut history, &mut ctx, &params_run, &initial.forcing, &plan)?
        } else {
            step_evolution_singular(
                state,
                &mut history,
                &mut ctx,
                &params_run,
                &initial.forcing,
                &initial.u1,
                &plan,
            )?
        };
        states.push(next);
    }

    Ok(Trajectory {
        params: params.clone(),
        mode,
        initial: initial.clone(),
        states,
        history,
    })
}
