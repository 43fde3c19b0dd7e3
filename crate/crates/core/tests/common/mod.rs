//! Shared test helpers: adaptive quadrature and smooth random histories.

use magvisc::memory::History;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// A smooth space-time function built from a few random Fourier terms.
pub struct SmoothField {
    coeffs: Vec<(f64, f64, f64)>,
}

impl SmoothField {
    pub fn random(seed: u64, terms: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..terms)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.5..4.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        SmoothField { coeffs }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|&(a, w, phase)| a * (w * t + phase).sin() * (1.0 + 0.3 * (2.0 * x).cos()))
            .sum()
    }
}

/// Samples a smooth field into a history with `levels + 1` stored profiles.
pub fn sampled_history(field: &SmoothField, dt: f64, levels: usize, nodes: usize) -> History {
    let mut h = History::new(dt, nodes);
    for k in 0..=levels {
        let t = k as f64 * dt;
        let profile = (0..nodes)
            .map(|j| field.eval(j as f64 / (nodes.max(2) - 1) as f64, t))
            .collect();
        h.push(profile).unwrap();
    }
    h
}

/// Piecewise-linear reconstruction in lag `s` of the node-`i` history column,
/// looking back from `t_level`.
pub fn pl_reconstruction(history: &History, level: usize, node: usize, s: f64) -> f64 {
    let dt = history.dt();
    let j = ((s / dt).floor() as usize).min(level.saturating_sub(1));
    let s_j = j as f64 * dt;
    let w_near = history.profile(level - j)[node];
    let w_far = history.profile(level - j - 1)[node];
    w_near + (s - s_j) / dt * (w_far - w_near)
}

#[allow(dead_code)]
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
