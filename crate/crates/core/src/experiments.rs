//! Parameter sweeps realizing the limit processes empirically: kernel
//! translation to zero (Cauchy-sequence convergence of the translated runs),
//! penalty saturation as delta shrinks, and grid refinement for observed
//! convergence orders.

use crate::diagnostics::{apriori_bounds, AprioriBounds, DiagnosticsError};
use crate::dynamics::{run, DynamicsError, ModelParams, RunMode, Trajectory};
use crate::field::{l2_norm_sq, qt_norm_sq, FieldError, ForcingTag, Grid, InitialData, ProfileTag};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("sweep values must be strictly decreasing and positive")]
    BadSweepValues,
    #[error("refinement levels must double the grid and halve the step")]
    BadRefinementLevels,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Per-parameter-value norms and pairwise differences of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub parameter: String,
    /// Strictly decreasing parameter values, one per run.
    pub values: Vec<f64>,
    pub bounds: Vec<AprioriBounds>,
    /// `||u^{v_i} - u^{v_{i+1}}||_{L^2(Q)}`
    pub pairwise_diff_u: Vec<f64>,
    /// Same for the magnetization (both components combined).
    pub pairwise_diff_m: Vec<f64>,
    /// Log-ratio slopes of the pairwise differences against the parameter.
    pub observed_orders: Vec<f64>,
    /// Translation sweep only: distance between the smallest-value run and
    /// the untranslated evolution run.
    pub singular_gap_u: Option<f64>,
    /// Penalty sweep only: `|| |m|^2 - 1 ||_{L^2(Omega)}` at the final time.
    pub penalty_norm_at_end: Option<Vec<f64>>,
    /// Penalty sweep only: fitted log-log slope of that norm against delta.
    pub penalty_slope: Option<f64>,
    /// Refinement study only: per-level error against the reference
    /// (analytic oracle where available, otherwise the finest run).
    pub errors: Option<Vec<f64>>,
}

impl SweepResult {
    /// True when the successive differences strictly decrease.
    pub fn cauchy_decreasing(&self) -> bool {
        self.pairwise_diff_u.windows(2).all(|w| w[1] < w[0])
    }

    /// Max/min ratio of each a priori constant across the sweep.
    pub fn bound_ratios(&self) -> [f64; 5] {
        let mut ratios = [1.0; 5];
        for (i, r) in ratios.iter_mut().enumerate() {
            let vals: Vec<f64> = self.bounds.iter().map(|b| b.as_array()[i]).collect();
            let max = vals.iter().cloned().fold(f64::MIN, f64::max);
            let min = vals.iter().cloned().fold(f64::MAX, f64::min);
            *r = if min > 0.0 { max / min } else if max == min { 1.0 } else { f64::INFINITY };
        }
        ratios
    }
}

fn check_descending(values: &[f64]) -> Result<(), ExperimentError> {
    if values.is_empty() || values.windows(2).any(|w| w[1] >= w[0]) || values.iter().any(|&v| v <= 0.0) {
        return Err(ExperimentError::BadSweepValues);
    }
    Ok(())
}

fn diff_profiles(a: &Trajectory, b: &Trajectory, field: fn(&crate::field::FieldState) -> &Vec<f64>) -> Vec<Vec<f64>> {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            field(sa)
                .iter()
                .zip(field(sb))
                .map(|(x, y)| x - y)
                .collect()
        })
        .collect()
}

fn l2q_diff(a: &Trajectory, b: &Trajectory, grid: &Grid, dt: f64) -> Result<(f64, f64), FieldError> {
    let du = diff_profiles(a, b, |s| &s.u);
    let dm1 = diff_profiles(a, b, |s| &s.m1);
    let dm2 = diff_profiles(a, b, |s| &s.m2);
    let u = qt_norm_sq(&du, grid, dt)?.sqrt();
    let m = (qt_norm_sq(&dm1, grid, dt)? + qt_norm_sq(&dm2, grid, dt)?).sqrt();
    Ok((u, m))
}

fn pairwise(trajs: &[Trajectory], grid: &Grid, dt: f64) -> Result<(Vec<f64>, Vec<f64>), FieldError> {
    let mut du = Vec::new();
    let mut dm = Vec::new();
    for w in trajs.windows(2) {
        let (u, m) = l2q_diff(&w[0], &w[1], grid, dt)?;
        du.push(u);
        dm.push(m);
    }
    Ok((du, dm))
}

fn order_slopes(diffs: &[f64], values: &[f64]) -> Vec<f64> {
    // Slope of ln(diff) against ln(value) between successive pairs; the
    // i-th difference is attributed to the i-th value.
    diffs
        .windows(2)
        .zip(values.windows(2))
        .map(|(d, v)| (d[1] / d[0]).ln() / (v[1] / v[0]).ln())
        .collect()
}

/// Runs the translated problem once per shift value (descending), computes
/// pairwise trajectory differences, and compares the smallest-shift run
/// against the untranslated evolution run on the same lattice.
pub fn epsilon_sweep(
    initial: &InitialData,
    base: &ModelParams,
    eps_values: &[f64],
) -> Result<SweepResult, ExperimentError> {
    check_descending(eps_values)?;
    let trajs: Vec<Trajectory> = eps_values
        .par_iter()
        .map(|&eps| {
            let mut p = base.clone();
            p.kernel = base.kernel.with_shift(eps).map_err(DynamicsError::from)?;
            run(initial, &p, RunMode::RegularEps)
        })
        .collect::<Result<_, _>>()?;

    let grid = &base.grid;
    let dt = base.dt;
    let bounds: Vec<AprioriBounds> = trajs
        .iter()
        .map(apriori_bounds)
        .collect::<Result<_, _>>()?;
    let (pairwise_diff_u, pairwise_diff_m) = pairwise(&trajs, grid, dt)?;

    let mut p0 = base.clone();
    p0.kernel = base.kernel.with_shift(0.0).map_err(DynamicsError::from)?;
    let singular = run(initial, &p0, RunMode::SingularEvolution)?;
    let (gap, _) = l2q_diff(trajs.last().unwrap(), &singular, grid, dt)?;

    let observed_orders = order_slopes(&pairwise_diff_u, eps_values);
    Ok(SweepResult {
        parameter: "epsilon".into(),
        values: eps_values.to_vec(),
        bounds,
        pairwise_diff_u,
        pairwise_diff_m,
        observed_orders,
        singular_gap_u: Some(gap),
        penalty_norm_at_end: None,
        penalty_slope: None,
        errors: None,
    })
}

/// Runs the coupled problem once per penalization value (descending) and
/// reports the final-time defect `|| |m|^2 - 1 ||_{L^2}` together with its
/// log-log slope against delta.
pub fn delta_sweep(
    initial: &InitialData,
    base: &ModelParams,
    delta_values: &[f64],
    mode: RunMode,
) -> Result<SweepResult, ExperimentError> {
    check_descending(delta_values)?;
    let trajs: Vec<Trajectory> = delta_values
        .par_iter()
        .map(|&delta| {
            let mut p = base.clone();
            p.delta = delta;
            run(initial, &p, mode)
        })
        .collect::<Result<_, _>>()?;

    let grid = &base.grid;
    let dt = base.dt;
    let bounds: Vec<AprioriBounds> = trajs
        .iter()
        .map(apriori_bounds)
        .collect::<Result<_, _>>()?;
    let (pairwise_diff_u, pairwise_diff_m) = pairwise(&trajs, grid, dt)?;

    let mut penalty_norms = Vec::with_capacity(trajs.len());
    for traj in &trajs {
        let s = traj.states.last().unwrap();
        let q: Vec<f64> = s
            .m1
            .iter()
            .zip(&s.m2)
            .map(|(a, b)| a * a + b * b - 1.0)
            .collect();
        penalty_norms.push(l2_norm_sq(&q, grid)?.sqrt());
    }
    // Least-squares slope of ln(norm) vs ln(delta).
    let slope = {
        let pairs: Vec<(f64, f64)> = delta_values
            .iter()
            .zip(&penalty_norms)
            .filter(|(_, &n)| n > 0.0)
            .map(|(&d, &n)| (d.ln(), n.ln()))
            .collect();
        if pairs.len() < 2 {
            f64::NAN
        } else {
            let n = pairs.len() as f64;
            let sx: f64 = pairs.iter().map(|p| p.0).sum();
            let sy: f64 = pairs.iter().map(|p| p.1).sum();
            let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
            (n * sxy - sx * sy) / (n * sxx - sx * sx)
        }
    };

    let observed_orders = order_slopes(&pairwise_diff_u, delta_values);
    Ok(SweepResult {
        parameter: "delta".into(),
        values: delta_values.to_vec(),
        bounds,
        pairwise_diff_u,
        pairwise_diff_m,
        observed_orders,
        singular_gap_u: None,
        penalty_norm_at_end: Some(penalty_norms),
        penalty_slope: Some(slope),
        errors: None,
    })
}

/// Restriction of a fine-lattice level sequence onto a coarser lattice whose
/// spacing is an integer multiple in both directions (plain subsampling, a
/// projection).
pub fn restrict_to_lattice(
    profiles: &[Vec<f64>],
    node_stride: usize,
    level_stride: usize,
) -> Vec<Vec<f64>> {
    profiles
        .iter()
        .step_by(level_stride.max(1))
        .map(|p| p.iter().step_by(node_stride.max(1)).cloned().collect())
        .collect()
}

/// Closed-form displacement for the undamped-wave configuration
/// (constant kernel `c`, no coupling, no forcing, `u1 = A sin(k pi x)`):
/// `u = A sin(k pi x) sin(k pi sqrt(c) t) / (k pi sqrt(c))`.
pub fn wave_oracle(
    amplitude: f64,
    mode: u32,
    stiffness: f64,
    x: f64,
    t: f64,
) -> f64 {
    let k = mode as f64 * std::f64::consts::PI;
    let c = stiffness.sqrt();
    amplitude * (k * x).sin() * (k * c * t).sin() / (k * c)
}

/// Scenario description a refinement study can rebuild at any resolution.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub u1: ProfileTag,
    pub theta: ProfileTag,
    pub forcing: ForcingTag,
    pub lambda: f64,
    pub delta: f64,
    pub kernel: crate::kernel::RelaxationKernel,
    pub t_end: f64,
    pub mode: RunMode,
}

impl Scenario {
    pub fn build(&self, n_cells: usize, dt: f64) -> Result<(InitialData, ModelParams), ExperimentError> {
        let grid = Grid::new(n_cells).map_err(DynamicsError::from)?;
        let initial = InitialData::new(&grid, &self.u1, &self.theta, self.forcing.clone())
            .map_err(DynamicsError::from)?;
        let params = ModelParams {
            lambda: self.lambda,
            delta: self.delta,
            kernel: self.kernel.clone(),
            t_end: self.t_end,
            dt,
            grid,
        };
        Ok((initial, params))
    }

    /// The analytic displacement solution, when this scenario has one.
    pub fn oracle(&self) -> Option<(f64, u32, f64)> {
        if self.lambda != 0.0 || !matches!(self.forcing, ForcingTag::Zero) {
            return None;
        }
        let stiffness = match self.kernel.spec() {
            crate::kernel::KernelSpec::Constant { value } => *value,
            _ => return None,
        };
        match self.u1 {
            ProfileTag::Sine { amplitude, mode } => Some((amplitude, mode, stiffness)),
            _ => None,
        }
    }
}

/// Reruns a scenario at each `(n_cells, dt)` level and reports per-level
/// errors: max-norm against the analytic oracle when one exists, otherwise
/// `L^2(Q)` self-differences against the finest run on the coarsest lattice.
pub fn refinement_study(
    scenario: &Scenario,
    levels: &[(usize, f64)],
) -> Result<SweepResult, ExperimentError> {
    if levels.len() < 2 {
        return Err(ExperimentError::BadRefinementLevels);
    }
    for w in levels.windows(2) {
        let ((n0, dt0), (n1, dt1)) = (w[0], w[1]);
        if n1 != 2 * n0 || (dt0 / dt1 - 2.0).abs() > 1e-9 {
            return Err(ExperimentError::BadRefinementLevels);
        }
    }
    let trajs: Vec<Trajectory> = levels
        .par_iter()
        .map(|&(n, dt)| {
            let (initial, params) = scenario.build(n, dt)?;
            run(&initial, &params, scenario.mode).map_err(ExperimentError::from)
        })
        .collect::<Result<_, _>>()?;

    let bounds: Vec<AprioriBounds> = trajs
        .iter()
        .map(apriori_bounds)
        .collect::<Result<_, _>>()?;

    let coarse_grid = trajs[0].params.grid;
    let coarse_dt = trajs[0].params.dt;

    let errors: Vec<f64> = if let Some((amp, mode, stiffness)) = scenario.oracle() {
        trajs
            .iter()
            .map(|traj| {
                let grid = &traj.params.grid;
                let mut max_err: f64 = 0.0;
                for s in &traj.states {
                    for (j, x) in grid.nodes().enumerate() {
                        let exact = wave_oracle(amp, mode, stiffness, x, s.t);
                        max_err = max_err.max((s.u[j] - exact).abs());
                    }
                }
                max_err
            })
            .collect()
    } else {
        let finest = trajs.last().unwrap();
        let fine_n = finest.params.grid.n_cells();
        let fine_u = finest.u_profiles();
        trajs[..trajs.len() - 1]
            .iter()
            .map(|traj| {
                let n = traj.params.grid.n_cells();
                let node_stride_self = n / coarse_grid.n_cells();
                let level_stride_self =
                    (coarse_dt / traj.params.dt).round() as usize;
                let a = restrict_to_lattice(&traj.u_profiles(), node_stride_self, level_stride_self);
                let node_stride_fine = fine_n / coarse_grid.n_cells();
                let level_stride_fine = (coarse_dt / finest.params.dt).round() as usize;
                let b = restrict_to_lattice(&fine_u, node_stride_fine, level_stride_fine);
                let d: Vec<Vec<f64>> = a
                    .iter()
                    .zip(&b)
                    .map(|(pa, pb)| pa.iter().zip(pb).map(|(x, y)| x - y).collect())
                    .collect();
                Ok(qt_norm_sq(&d, &coarse_grid, coarse_dt)?.sqrt())
            })
            .collect::<Result<_, ExperimentError>>()?
    };

    // Observed order per successive pair (refinement factor 2).
    let observed_orders: Vec<f64> = errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect();

    let (pairwise_diff_u, pairwise_diff_m) = {
        // Differences of successive levels on the coarsest lattice.
        let mut du = Vec::new();
        let mut dm = Vec::new();
        for w in trajs.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let stride_a_nodes = a.params.grid.n_cells() / coarse_grid.n_cells();
            let stride_a_levels = (coarse_dt / a.params.dt).round() as usize;
            let stride_b_nodes = b.params.grid.n_cells() / coarse_grid.n_cells();
            let stride_b_levels = (coarse_dt / b.params.dt).round() as usize;
            let ua = restrict_to_lattice(&a.u_profiles(), stride_a_nodes, stride_a_levels);
            let ub = restrict_to_lattice(&b.u_profiles(), stride_b_nodes, stride_b_levels);
            let d: Vec<Vec<f64>> = ua
                .iter()
                .zip(&ub)
                .map(|(pa, pb)| pa.iter().zip(pb).map(|(x, y)| x - y).collect())
                .collect();
            du.push(qt_norm_sq(&d, &coarse_grid, coarse_dt)?.sqrt());
            dm.push(0.0);
        }
        (du, dm)
    };

    Ok(SweepResult {
        parameter: "resolution".into(),
        values: levels.iter().map(|&(n, _)| n as f64).collect(),
        bounds,
        pairwise_diff_u,
        pairwise_diff_m,
        observed_orders,
        singular_gap_u: None,
        penalty_norm_at_end: None,
        penalty_slope: None,
        errors: Some(errors),
    })
}
