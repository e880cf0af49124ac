//! The deterministic two-player game whose value approximates the curvature
//! G-equation. Player I picks `η` in the closed unit ball, player II picks a
//! sign `b`, and the position moves by
//!
//! ```text
//! x' = x + τ√(2d)·b·η + τ²|η|η⊥ - τ²V(x),    η⊥ = (-η₂, η₁).
//! ```
//!
//! The value after `k` backward sweeps from terminal data `p·x` is stored as a
//! periodic grid plus the exact affine part `p·x`.

use crate::error::{Error, Result};
use crate::flowfield::CellularFlow;
use crate::geom::{Sym2, Vec2};
use crate::grid::Grid2;
use crate::par;
use std::f64::consts::TAU;

pub const DEFAULT_ANGLES: usize = 64;
pub const DEFAULT_RADII: usize = 3;

/// Player II's sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub tau: f64,
    pub d: f64,
    pub n_steps: usize,
    pub n_angles: usize,
    pub n_radii: usize,
    pub flow: CellularFlow,
}

impl GameParams {
    /// Default control set: `{0} ∪ {0, ½, 1} × 64 angles`.
    pub fn new(tau: f64, d: f64, n_steps: usize, flow: CellularFlow) -> Result<Self> {
        let p = GameParams {
            tau,
            d,
            n_steps,
            n_angles: DEFAULT_ANGLES,
            n_radii: DEFAULT_RADII,
            flow,
        };
        p.validate()?;
        Ok(p)
    }

    /// Steps covering a game time of at least `t`.
    pub fn for_duration(tau: f64, d: f64, t: f64, flow: CellularFlow) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid("game", "T", format!("must be >= 0, got {t}")));
        }
        let steps = (t / (tau * tau) - 1e-9).ceil().max(0.0) as usize;
        Self::new(tau, d, steps, flow)
    }

    pub fn with_controls(mut self, n_angles: usize, n_radii: usize) -> Result<Self> {
        self.n_angles = n_angles;
        self.n_radii = n_radii;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid("game", "tau", format!("must be > 0, got {}", self.tau)));
        }
        if !(self.d.is_finite() && self.d >= 0.0) {
            return Err(Error::invalid("game", "d", format!("must be >= 0, got {}", self.d)));
        }
        if self.n_angles < 8 {
            return Err(Error::invalid("game", "n_angles", "must be at least 8"));
        }
        if self.n_radii < 2 {
            return Err(Error::invalid("game", "n_radii", "must be at least 2"));
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.tau * self.tau
    }

    /// `η = 0` followed by the nonzero radii `r_k = k/(n_radii-1)` times
    /// `n_angles` equally spaced directions starting at angle 0.
    pub fn controls(&self) -> Vec<Vec2> {
        let mut out = vec![Vec2::ZERO];
        for k in 1..self.n_radii {
            let r = k as f64 / (self.n_radii - 1) as f64;
            for a in 0..self.n_angles {
                out.push(Vec2::from_angle(TAU * a as f64 / self.n_angles as f64) * r);
            }
        }
        out
    }

    fn diffusive_scale(&self) -> f64 {
        self.tau * (2.0 * self.d).sqrt()
    }
}

/// Displacement `τ√(2d)·b·η + τ²|η|η⊥ - τ²V(x)` without validation.
#[inline]
pub(crate) fn displacement(x: Vec2, eta: Vec2, b: f64, params: &GameParams) -> Vec2 {
    let t2 = params.tau * params.tau;
    eta * (params.diffusive_scale() * b) + eta.perp() * (t2 * eta.norm()) - params.flow.velocity(x) * t2
}

/// One move of the game.
pub fn step_position(x: Vec2, eta: Vec2, b: Sign, params: &GameParams) -> Result<Vec2> {
    if !x.is_finite() || !eta.is_finite() {
        return Err(Error::invalid("game", "x/eta", "must be finite"));
    }
    if eta.norm() > 1.0 + 1e-12 {
        return Err(Error::invalid(
            "game",
            "eta",
            format!("|eta| = {} exceeds 1", eta.norm()),
        ));
    }
    Ok(x + displacement(x, eta, b.value(), params))
}

/// Game value `u(x) = base(x) + p·x` after `k` backward sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    pub base: Grid2,
    pub p: Vec2,
    pub k: usize,
}

impl ValueGrid {
    /// Terminal data `g(x) = p·x`.
    pub fn terminal(p: Vec2, n1: usize, n2: usize) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::invalid("game", "p", "must be finite"));
        }
        Ok(ValueGrid {
            base: Grid2::zeros(n1, n2)?,
            p,
            k: 0,
        })
    }

    pub fn value_at(&self, x: Vec2) -> f64 {
        self.base.interpolate(x) + self.p.dot(x)
    }

    /// Writes the periodic part as GFLM to `path` and `p1,p2,k,tau` to the
    /// sidecar `<path>.p.csv`.
    pub fn save(&self, path: &std::path::Path, tau: f64) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.base.write_gflm(std::io::BufWriter::new(f))?;
        let mut side = path.as_os_str().to_owned();
        side.push(".p.csv");
        std::fs::write(
            side,
            format!("p1,p2,k,tau\n{},{},{},{}\n", self.p.x, self.p.y, self.k, tau),
        )?;
        Ok(())
    }
}

struct ControlTable {
    /// `τ√(2d)·η`
    spread: Vec<Vec2>,
    /// `τ²|η|η⊥`
    turn: Vec<Vec2>,
}

impl ControlTable {
    fn new(params: &GameParams) -> Self {
        let t2 = params.tau * params.tau;
        let s = params.diffusive_scale();
        let controls = params.controls();
        ControlTable {
            spread: controls.iter().map(|&e| e * s).collect(),
            turn: controls.iter().map(|&e| e.perp() * (t2 * e.norm())).collect(),
        }
    }
}

/// Backward sweeps from terminal data `p·x` on an `n1 × n2` grid.
pub fn dp_backward(terminal_p: Vec2, params: &GameParams, n1: usize, n2: usize) -> Result<ValueGrid> {
    dp_backward_with(terminal_p, params, n1, n2, |_| {})
}

/// [`dp_backward`] calling `on_sweep` after every sweep.
pub fn dp_backward_with(
    terminal_p: Vec2,
    params: &GameParams,
    n1: usize,
    n2: usize,
    on_sweep: impl FnMut(&ValueGrid),
) -> Result<ValueGrid> {
    let start = ValueGrid::terminal(terminal_p, n1, n2)?;
    continue_backward(start, params, params.n_steps, on_sweep)
}

/// Applies `sweeps` more backward sweeps to an existing value.
pub fn continue_backward(
    start: ValueGrid,
    params: &GameParams,
    sweeps: usize,
    mut on_sweep: impl FnMut(&ValueGrid),
) -> Result<ValueGrid> {
    params.validate()?;
    if let Some((i, j)) = start.base.first_non_finite() {
        return Err(Error::non_finite("game", format!("value at node ({i}, {j})")));
    }
    let table = ControlTable::new(params);
    let base = &start.base;
    let t2 = params.tau * params.tau;
    let drift: Vec<Vec2> = (0..base.n2())
        .flat_map(|j| (0..base.n1()).map(move |i| (i, j)))
        .map(|(i, j)| params.flow.velocity(base.node(i, j)) * (-t2))
        .collect();

    let mut cur = start;
    let mut next = cur.base.clone();
    for _ in 0..sweeps {
        sweep(&cur, next.as_mut_slice(), &table, &drift);
        std::mem::swap(&mut cur.base, &mut next);
        cur.k += 1;
        if let Some((i, j)) = cur.base.first_non_finite() {
            return Err(Error::non_finite("game", format!("sweep {} at node ({i}, {j})", cur.k)));
        }
        on_sweep(&cur);
    }
    Ok(cur)
}

fn sweep(prev: &ValueGrid, out: &mut [f64], table: &ControlTable, drift: &[Vec2]) {
    let base = &prev.base;
    let p = prev.p;
    let n1 = base.n1();
    par::for_each_row(out, n1, |j, row| {
        for (i, o) in row.iter_mut().enumerate() {
            let x = base.node(i, j);
            let shift = drift[j * n1 + i];
            let mut best = f64::INFINITY;
            for (a, c) in table.spread.iter().zip(&table.turn) {
                let off = *c + shift;
                let plus = off + *a;
                let minus = off - *a;
                let vp = base.interpolate(x + plus) + p.dot(plus);
                let vm = base.interpolate(x + minus) + p.dot(minus);
                best = best.min(vp.max(vm));
            }
            *o = best;
        }
    });
}

/// `-mean(base) / (k τ²)`: average decrease of `u - p·x` per unit game time.
pub fn speed_from_value(value: &ValueGrid, params: &GameParams) -> Result<f64> {
    if value.k == 0 {
        return Err(Error::invalid("game", "k", "no sweeps performed"));
    }
    Ok(-value.base.mean() / (value.k as f64 * params.tau * params.tau))
}

/// Quadratic test function through its increment
/// `φ(x+δ) - φ(x) = g·δ + ½ δᵀHδ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub grad: Vec2,
    pub hess: Sym2,
}

impl Quadratic {
    pub fn increment(&self, delta: Vec2) -> f64 {
        self.grad.dot(delta) + 0.5 * self.hess.quad(delta)
    }
}

/// Lower and upper envelopes of `F(X, q) = (|q| - d q⊥ᵀXq⊥/|q|²)₊`.
/// At `q = 0` they are `0` and `2·d·n·‖X‖` with `n = 2`.
pub fn envelope_bracket(hess: &Sym2, grad: Vec2, d: f64) -> (f64, f64) {
    let q2 = grad.norm_sq();
    if q2 == 0.0 {
        return (0.0, 4.0 * d * hess.spectral_norm());
    }
    let f = (grad.norm() - d * hess.quad(grad.perp()) / q2).max(0.0);
    (f, f)
}

/// `max_b [φ(x') - φ(x)]` for a fixed `η`.
pub fn worst_sign_increment(phi: &Quadratic, x: Vec2, eta: Vec2, params: &GameParams) -> f64 {
    Sign::BOTH
        .iter()
        .map(|b| phi.increment(displacement(x, eta, b.value(), params)))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// `min_η max_b [φ(x') - φ(x)] / τ²` over the game's control set.
    pub discrete: f64,
    /// Same over the closed unit ball (enumeration plus local refinement).
    pub refined: f64,
    /// `-(F̄ + V·Dφ)`
    pub lower: f64,
    /// `-(F̲ + V·Dφ)`
    pub upper: f64,
    /// Bound on the discrete set's angular bias, in units of `τ²`.
    pub angular_slack: f64,
}

impl ConsistencyReport {
    /// Distance of `value` outside `[lower, upper]` (0 if inside).
    pub fn excess_of(&self, value: f64) -> f64 {
        (self.lower - value).max(value - self.upper).max(0.0)
    }

    pub fn refined_excess(&self) -> f64 {
        self.excess_of(self.refined)
    }

    pub fn discrete_excess(&self) -> f64 {
        self.excess_of(self.discrete)
    }
}

/// Compares the one-step min-max increment of a quadratic at `x` with the
/// bracket `-τ²[F̲ + V·Dφ, F̄ + V·Dφ]`.
pub fn consistency_residual(phi: &Quadratic, x: Vec2, params: &GameParams) -> ConsistencyReport {
    let t2 = params.tau * params.tau;
    let eval = |r: f64, th: f64| worst_sign_increment(phi, x, Vec2::from_angle(th) * r, params);

    let controls = params.controls();
    let discrete = controls
        .iter()
        .map(|&e| worst_sign_increment(phi, x, e, params))
        .fold(f64::INFINITY, f64::min);

    // dense enumeration, then golden-section polishing of the best candidates
    let n_r = 33;
    let dth = TAU / params.n_angles as f64;
    let dr = 1.0 / (n_r - 1) as f64;
    let mut cands: Vec<(f64, f64, f64)> = Vec::new();
    for k in 0..n_r {
        let r = k as f64 * dr;
        for a in 0..params.n_angles {
            let th = a as f64 * dth;
            cands.push((eval(r, th), r, th));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut refined = discrete.min(cands[0].0);
    for &(_, r0, th0) in cands.iter().take(6) {
        let (mut r, mut th) = (r0, th0);
        for _ in 0..4 {
            th = golden_min(|t| eval(r, t), th - dth, th + dth);
            r = golden_min(|s| eval(s, th), (r - dr).max(0.0), (r + dr).min(1.0));
        }
        refined = refined.min(eval(r, th));
    }

    let g = phi.grad;
    let (f_lo, f_hi) = envelope_bracket(&phi.hess, g, params.d);
    let drift = params.flow.velocity(x).dot(g);
    ConsistencyReport {
        discrete: discrete / t2,
        refined: refined / t2,
        lower: -(f_hi + drift),
        upper: -(f_lo + drift),
        angular_slack: params.diffusive_scale() * g.norm() * (0.5 * dth).sin() / t2,
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params(tau: f64, d: f64, n: usize, a: f64) -> GameParams {
        GameParams::new(tau, d, n, CellularFlow::new(a).unwrap()).unwrap()
    }

    #[test]
    fn pure_drift() {
        let g = params(0.1, 0.3, 1, 2.0);
        let x = Vec2::new(0.3, 1.1);
        let v = g.flow.velocity(x);
        for b in Sign::BOTH {
            let y = step_position(x, Vec2::ZERO, b, &g).unwrap();
            assert_eq!(y, x - v * 0.01);
        }
    }

    #[test]
    fn hand_substituted_step() {
        let g = params(0.1, 0.5, 1, 1.0);
        // V vanishes at the cell centre
        let x = Vec2::new(FRAC_PI_2, FRAC_PI_2);
        let y = step_position(x, Vec2::new(1.0, 0.0), Sign::Plus, &g).unwrap();
        assert!((y - x - Vec2::new(0.1, 0.01)).norm() < 1e-15);
    }

    #[test]
    fn sign_symmetry() {
        // the pair for -η is the point reflection of the pair for η through x - τ²V(x)
        let g = params(0.07, 0.4, 1, 1.5);
        let x = Vec2::new(2.0, 0.4);
        let eta = Vec2::new(0.3, -0.5);
        let c = x - g.flow.velocity(x) * (g.tau * g.tau);
        let a = [
            step_position(x, eta, Sign::Plus, &g).unwrap(),
            step_position(x, eta, Sign::Minus, &g).unwrap(),
        ];
        let b = [
            step_position(x, -eta, Sign::Plus, &g).unwrap(),
            step_position(x, -eta, Sign::Minus, &g).unwrap(),
        ];
        for k in 0..2 {
            assert!((a[k] - c + (b[k] - c)).norm() < 1e-15);
        }
        // b only multiplies the diffusive term
        let mid = (a[0] + a[1]) * 0.5;
        let q = eta.perp() * (g.tau * g.tau * eta.norm());
        assert!((mid - c - q).norm() < 1e-15);
    }

    #[test]
    fn rejects_large_eta() {
        let g = params(0.1, 0.5, 1, 1.0);
        assert!(step_position(Vec2::ZERO, Vec2::new(1.0, 1e-3), Sign::Plus, &g).is_err());
        assert!(step_position(Vec2::ZERO, Vec2::new(1.0 + 1e-13, 0.0), Sign::Plus, &g).is_ok());
    }

    #[test]
    fn param_validation() {
        let f = CellularFlow::new(1.0).unwrap();
        assert!(GameParams::new(0.0, 0.1, 1, f).is_err());
        assert!(GameParams::new(0.1, -0.1, 1, f).is_err());
        assert!(GameParams::new(0.1, 0.1, 1, f).unwrap().with_controls(4, 3).is_err());
        assert!(GameParams::new(0.1, 0.1, 1, f).unwrap().with_controls(8, 1).is_err());
        let g = GameParams::for_duration(0.1, 0.1, 1.0, f).unwrap();
        assert_eq!(g.n_steps, 100);
        let c = g.controls();
        assert_eq!(c.len(), 1 + 2 * DEFAULT_ANGLES);
        assert_eq!(c[0], Vec2::ZERO);
        assert!(c.iter().all(|e| e.norm() <= 1.0 + 1e-15));
    }

    #[test]
    fn zero_steps_is_terminal_data() {
        let g = params(0.1, 0.1, 0, 1.0);
        let v = dp_backward(Vec2::new(1.0, 0.5), &g, 8, 8).unwrap();
        assert_eq!(v.k, 0);
        assert_eq!(v.base.max_abs(), 0.0);
        let x = Vec2::new(0.7, 5.0);
        assert!((v.value_at(x) - (0.7 + 2.5)).abs() < 1e-15);
        assert!(speed_from_value(&v, &g).is_err());
    }

    #[test]
    fn one_step_laminar_matches_enumeration() {
        let tau = 0.1;
        let g = params(tau, 0.01, 1, 0.0);
        let v = dp_backward(Vec2::new(1.0, 0.0), &g, 16, 16).unwrap();
        // exhaustive min-max at a node, terminal data x₁
        let phi = Quadratic {
            grad: Vec2::new(1.0, 0.0),
            hess: Sym2::new(0.0, 0.0, 0.0),
        };
        let x = v.base.node(3, 5);
        let oracle = g
            .controls()
            .iter()
            .map(|&e| worst_sign_increment(&phi, x, e, &g))
            .fold(f64::INFINITY, f64::min);
        assert!((v.base.get(3, 5) - oracle).abs() < 1e-15);
        assert!((oracle + tau * tau).abs() < tau * tau * tau);
    }

    #[test]
    fn laminar_value_decreases() {
        let g = params(0.2, 0.1, 3, 0.0);
        let mut means = vec![0.0];
        let mut prev = ValueGrid::terminal(Vec2::new(0.0, 1.0), 8, 8).unwrap();
        for _ in 0..3 {
            let next = continue_backward(prev.clone(), &g, 1, |_| {}).unwrap();
            for (a, b) in next.base.as_slice().iter().zip(prev.base.as_slice()) {
                assert!(a <= b);
            }
            means.push(next.base.mean());
            prev = next;
        }
        assert!(means.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn laminar_speed_is_one() {
        let g = GameParams::for_duration(0.1, 0.0, 1.0, CellularFlow::quiescent()).unwrap();
        let v = dp_backward(Vec2::new(1.0, 0.0), &g, 16, 16).unwrap();
        let s = speed_from_value(&v, &g).unwrap();
        assert!((s - 1.0).abs() < 0.02, "speed {s}");
    }

    #[test]
    fn constant_shift_commutes() {
        let g = params(0.15, 0.2, 2, 1.0);
        let a = ValueGrid::terminal(Vec2::new(1.0, 0.0), 16, 16).unwrap();
        let mut b = a.clone();
        b.base = b.base.map(|v| v + 0.5);
        let ra = continue_backward(a, &g, 2, |_| {}).unwrap();
        let rb = continue_backward(b, &g, 2, |_| {}).unwrap();
        assert!(ra.base.map(|v| v + 0.5).max_abs_diff(&rb.base) < 1e-14);
    }

    #[test]
    fn flat_consistency() {
        let g = params(0.01, 0.25, 1, 0.0).with_controls(256, 3).unwrap();
        let phi = Quadratic {
            grad: Vec2::new(1.0, 0.0),
            hess: Sym2::new(0.0, 0.0, 0.0),
        };
        let r = consistency_residual(&phi, Vec2::new(1.0, 1.0), &g);
        assert!((r.discrete + 1.0).abs() < 1e-9, "{r:?}");
        assert!((r.refined + 1.0).abs() < 1e-9);
        assert_eq!((r.lower, r.upper), (-1.0, -1.0));
    }

    #[test]
    fn critical_point_consistency() {
        let g = params(0.01, 0.25, 1, 0.0);
        let phi = Quadratic {
            grad: Vec2::ZERO,
            hess: Sym2::identity(),
        };
        let r = consistency_residual(&phi, Vec2::new(PI, 0.2), &g);
        assert_eq!(r.refined_excess(), 0.0, "{r:?}");
        assert_eq!(r.discrete_excess(), 0.0);
    }

    #[test]
    fn snapshot_sidecar() {
        let dir = std::env::temp_dir().join(format!("cellflame-game-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v.gflm");
        let g = params(0.2, 0.1, 2, 1.0);
        let v = dp_backward(Vec2::new(0.0, 1.0), &g, 8, 8).unwrap();
        v.save(&path, g.tau).unwrap();
        let back = Grid2::read_gflm(std::fs::File::open(&path).unwrap()).unwrap();
        assert_eq!(back, v.base);
        let side = std::fs::read_to_string(dir.join("v.gflm.p.csv")).unwrap();
        assert_eq!(side, "p1,p2,k,tau\n0,1,2,0.2\n");
        std::fs::remove_dir_all(dir).ok();
    }
}
