//! Uniform grid on (0, 1), discrete field storage, boundary handling, and the
//! difference/quadrature operators used everywhere else.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("field length {found} does not match grid with {expected} nodes")]
    SizeMismatch { expected: usize, found: usize },
    #[error("grid needs at least 4 cells, got {0}")]
    GridTooCoarse(usize),
    #[error("forcing sample table has wrong shape: {0}")]
    BadSamples(String),
}

/// Uniform grid with nodes `x_j = j * h`, `j = 0..=n_cells`, `h = 1/n_cells`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_cells: usize,
    h: f64,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self, FieldError> {
        if n_cells < 4 {
            return Err(FieldError::GridTooCoarse(n_cells));
        }
        Ok(Grid {
            n_cells,
            h: 1.0 / n_cells as f64,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |j| self.node(j))
    }

    fn check_len(&self, field: &[f64]) -> Result<(), FieldError> {
        if field.len() != self.n_nodes() {
            return Err(FieldError::SizeMismatch {
                expected: self.n_nodes(),
                found: field.len(),
            });
        }
        Ok(())
    }
}

/// Boundary handling for the second-difference operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcType {
    Dirichlet,
    Neumann,
}

/// Second-order central second derivative. Interior nodes use the standard
/// three-point stencil. Dirichlet fields get a one-sided second-order formula
/// at the ends; Neumann fields use a mirrored ghost node.
pub fn dxx(field: &[f64], grid: &Grid, bc: BcType) -> Result<Vec<f64>, FieldError> {
    grid.check_len(field)?;
    let n = grid.n_cells();
    let h2 = grid.h() * grid.h();
    let mut out = vec![0.0; n + 1];
    for j in 1..n {
        out[j] = (field[j - 1] - 2.0 * field[j] + field[j + 1]) / h2;
    }
    match bc {
        BcType::Dirichlet => {
            out[0] = (2.0 * field[0] - 5.0 * field[1] + 4.0 * field[2] - field[3]) / h2;
            out[n] = (2.0 * field[n] - 5.0 * field[n - 1] + 4.0 * field[n - 2] - field[n - 3]) / h2;
        }
        BcType::Neumann => {
            out[0] = 2.0 * (field[1] - field[0]) / h2;
            out[n] = 2.0 * (field[n - 1] - field[n]) / h2;
        }
    }
    Ok(out)
}

/// Second-order first derivative: central in the interior, one-sided at the ends.
pub fn dx_centered(field: &[f64], grid: &Grid) -> Result<Vec<f64>, FieldError> {
    grid.check_len(field)?;
    let n = grid.n_cells();
    let h = grid.h();
    let mut out = vec![0.0; n + 1];
    for j in 1..n {
        out[j] = (field[j + 1] - field[j - 1]) / (2.0 * h);
    }
    out[0] = (-3.0 * field[0] + 4.0 * field[1] - field[2]) / (2.0 * h);
    out[n] = (3.0 * field[n] - 4.0 * field[n - 1] + field[n - 2]) / (2.0 * h);
    Ok(out)
}

/// `int_0^1 field^2 dx` by the trapezoid rule.
pub fn l2_norm_sq(field: &[f64], grid: &Grid) -> Result<f64, FieldError> {
    grid.check_len(field)?;
    let n = grid.n_cells();
    let mut sum = 0.5 * (field[0] * field[0] + field[n] * field[n]);
    for v in &field[1..n] {
        sum += v * v;
    }
    Ok(sum * grid.h())
}

/// `int_0^1 a * b dx` by the trapezoid rule.
pub fn l2_inner(a: &[f64], b: &[f64], grid: &Grid) -> Result<f64, FieldError> {
    grid.check_len(a)?;
    grid.check_len(b)?;
    let n = grid.n_cells();
    let mut sum = 0.5 * (a[0] * b[0] + a[n] * b[n]);
    for j in 1..n {
        sum += a[j] * b[j];
    }
    Ok(sum * grid.h())
}

/// Space-time `L^2(Q)` square norm of a level sequence: trapezoid in space,
/// trapezoid in time with step `dt`.
pub fn qt_norm_sq(profiles: &[Vec<f64>], grid: &Grid, dt: f64) -> Result<f64, FieldError> {
    if profiles.is_empty() {
        return Ok(0.0);
    }
    let last = profiles.len() - 1;
    let mut sum = 0.0;
    for (k, p) in profiles.iter().enumerate() {
        let w = if k == 0 || k == last { 0.5 } else { 1.0 };
        sum += w * l2_norm_sq(p, grid)?;
    }
    Ok(sum * dt)
}

/// All fields of the coupled system at one time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldState {
    pub t: f64,
    /// Displacement; zero at both boundary nodes.
    pub u: Vec<f64>,
    /// Velocity `u_t`; zero at both boundary nodes.
    pub v: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

impl FieldState {
    pub fn magnetization_sq(&self) -> Vec<f64> {
        self.m1
            .iter()
            .zip(&self.m2)
            .map(|(a, b)| a * a + b * b)
            .collect()
    }
}

/// Closed-form node profiles for initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum ProfileTag {
    Zero,
    /// `amplitude * sin(mode * pi * x)`.
    Sine { amplitude: f64, mode: u32 },
    /// Constant value at every node.
    Uniform { value: f64 },
    /// `theta_max * x^2 (3 - 2x)`; derivative vanishes at both ends.
    SmoothstepAngle { theta_max: f64 },
    /// Explicit node samples.
    Samples { values: Vec<f64> },
}

impl ProfileTag {
    pub fn build(&self, grid: &Grid) -> Result<Vec<f64>, FieldError> {
        match self {
            ProfileTag::Zero => Ok(vec![0.0; grid.n_nodes()]),
            ProfileTag::Sine { amplitude, mode } => Ok(grid
                .nodes()
                .map(|x| amplitude * (*mode as f64 * std::f64::consts::PI * x).sin())
                .collect()),
            ProfileTag::Uniform { value } => Ok(vec![*value; grid.n_nodes()]),
            ProfileTag::SmoothstepAngle { theta_max } => Ok(grid
                .nodes()
                .map(|x| theta_max * x * x * (3.0 - 2.0 * x))
                .collect()),
            ProfileTag::Samples { values } => {
                grid.check_len(values)?;
                Ok(values.clone())
            }
        }
    }
}

/// External force tag: `f` is constant in time for the closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum ForcingTag {
    Zero,
    /// `amplitude * sin(mode * pi * x)`, independent of time.
    SineX { amplitude: f64, mode: u32 },
    /// Tabulated `values[level][node]`.
    Samples { values: Vec<Vec<f64>> },
}

impl ForcingTag {
    /// Node profile of `f` at time level `level`.
    pub fn profile(&self, grid: &Grid, level: usize) -> Result<Vec<f64>, FieldError> {
        match self {
            ForcingTag::Zero => Ok(vec![0.0; grid.n_nodes()]),
            ForcingTag::SineX { amplitude, mode } => Ok(grid
                .nodes()
                .map(|x| amplitude * (*mode as f64 * std::f64::consts::PI * x).sin())
                .collect()),
            ForcingTag::Samples { values } => {
                let row = values.get(level).ok_or_else(|| {
                    FieldError::BadSamples(format!(
                        "level {level} outside table with {} rows",
                        values.len()
                    ))
                })?;
                grid.check_len(row)?;
                Ok(row.clone())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForcingTag::Zero)
    }
}

/// Initial data for the coupled system. `u_0 = 0` is hard-coded; `|m_0| = 1`
/// holds exactly because the magnetization is built from an angle profile.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u1: Vec<f64>,
    pub theta: Vec<f64>,
    pub m0: (Vec<f64>, Vec<f64>),
    pub forcing: ForcingTag,
}

impl InitialData {
    pub fn new(
        grid: &Grid,
        u1: &ProfileTag,
        theta: &ProfileTag,
        forcing: ForcingTag,
    ) -> Result<Self, FieldError> {
        let mut u1 = u1.build(grid)?;
        // u = 0 on the boundary for all time, so u_t must vanish there too.
        let n = grid.n_cells();
        u1[0] = 0.0;
        u1[n] = 0.0;

        let theta = theta.build(grid)?;
        let slope0 = (theta[1] - theta[0]) / grid.h();
        let slope1 = (theta[n] - theta[n - 1]) / grid.h();
        if slope0.abs() > 1e-8 || slope1.abs() > 1e-8 {
            log::warn!(
                "initial magnetization angle is not Neumann-compatible \
                 (boundary slopes {slope0:.3e}, {slope1:.3e})"
            );
        }
        let m0 = (
            theta.iter().map(|a| a.cos()).collect(),
            theta.iter().map(|a| a.sin()).collect(),
        );
        Ok(InitialData {
            u1,
            theta,
            m0,
            forcing,
        })
    }

    pub fn initial_state(&self, grid: &Grid) -> FieldState {
        FieldState {
            t: 0.0,
            u: vec![0.0; grid.n_nodes()],
            v: self.u1.clone(),
            m1: self.m0.0.clone(),
            m2: self.m0.1.clone(),
        }
    }
}
