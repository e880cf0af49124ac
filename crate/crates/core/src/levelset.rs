//! Explicit finite-difference evolution of the periodic corrector
//! `w = G - p·x` for
//!
//! ```text
//! G_t + (1 - d·div(DG/|DG|))₊ |DG| + V·DG = 0,   G(x, 0) = p·x + w(x, 0),
//! ```
//!
//! and a pseudo-time marcher for the discounted stationary problem
//! `λv + (1 - d·κ)₊|p + Dv| + V·(p + Dv) = 0`.
//!
//! Discretization: curvature by second-order central differences with the
//! gradient norm regularized as `√(|DG|² + ε²)`; the speed factor
//! `s = (1 - dκ)₊` is frozen per node and multiplies the Godunov upwind norm
//! of `p + Dw`; the drift `V·(p + Dw)` is upwinded on the sign of each
//! velocity component. With the speed frozen the update is monotone under
//! the step bound of [`max_stable_dt`].

use crate::error::{Error, Result};
use crate::flowfield::CellularFlow;
use crate::geom::Vec2;
use crate::grid::Grid2;
use crate::par;

/// Smallest grid the solver accepts.
pub const MIN_SOLVER_NODES: usize = 16;

/// Safety factor in the step bound.
pub const CFL_SAFETY: f64 = 0.4;

/// `0.4 · min(h²/(4d), h/(1 + A + |p|))`, with the parabolic term dropped
/// when `d = 0`.
pub fn max_stable_dt(h: f64, d: f64, amplitude: f64, p: Vec2) -> f64 {
    let hyperbolic = h / (1.0 + amplitude + p.norm());
    let parabolic = if d > 0.0 { h * h / (4.0 * d) } else { f64::INFINITY };
    CFL_SAFETY * hyperbolic.min(parabolic)
}

/// Time-stepping state: the periodic corrector and the problem data.
#[derive(Debug, Clone)]
pub struct CorrectorState {
    pub w: Grid2,
    pub p: Vec2,
    pub d: f64,
    pub flow: CellularFlow,
    /// Curvature regularization; defaults to the grid spacing.
    pub eps: f64,
    pub t: f64,
}

/// One record of [`CorrectorState::evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub mean_w: f64,
    pub min_w: f64,
    pub max_w: f64,
}

impl Checkpoint {
    pub fn oscillation(&self) -> f64 {
        self.max_w - self.min_w
    }

    fn of(state: &CorrectorState) -> Self {
        Checkpoint {
            t: state.t,
            mean_w: state.w.mean(),
            min_w: state.w.min(),
            max_w: state.w.max(),
        }
    }
}

/// Writes checkpoints as CSV with columns `t,mean_w,min_w,max_w,osc`.
pub fn write_checkpoints_csv<W: std::io::Write>(
    mut out: W,
    checkpoints: &[Checkpoint],
    provenance: &[String],
) -> Result<()> {
    writeln!(out, "t,mean_w,min_w,max_w,osc")?;
    for line in provenance {
        writeln!(out, "# {line}")?;
    }
    for c in checkpoints {
        writeln!(out, "{},{},{},{},{}", c.t, c.mean_w, c.min_w, c.max_w, c.oscillation())?;
    }
    Ok(())
}

impl CorrectorState {
    /// Starts at `t = 0` with `eps = h`.
    pub fn new(w: Grid2, p: Vec2, d: f64, flow: CellularFlow) -> Result<Self> {
        if w.n1() < MIN_SOLVER_NODES || w.n2() < MIN_SOLVER_NODES {
            return Err(Error::invalid(
                "levelset",
                "grid",
                format!("need at least {MIN_SOLVER_NODES} nodes per axis"),
            ));
        }
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::invalid(
                "levelset",
                "d",
                format!("must be finite and >= 0, got {d}"),
            ));
        }
        if !p.is_finite() {
            return Err(Error::invalid("levelset", "p", "must be finite"));
        }
        if let Some((i, j)) = w.first_non_finite() {
            return Err(Error::non_finite(
                "levelset",
                format!("initial data at node ({i}, {j})"),
            ));
        }
        let eps = w.h();
        Ok(CorrectorState {
            w,
            p,
            d,
            flow,
            eps,
            t: 0.0,
        })
    }

    /// Flat initial corrector `w ≡ 0` on an `n × n` grid, i.e. `G(x,0) = p·x`.
    pub fn flat(n: usize, p: Vec2, d: f64, flow: CellularFlow) -> Result<Self> {
        Self::new(Grid2::zeros(n, n)?, p, d, flow)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid("levelset", "eps", format!("must be > 0, got {eps}")));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn max_stable_dt(&self) -> f64 {
        max_stable_dt(self.w.h(), self.d, self.flow.amplitude(), self.p)
    }

    /// Node values of the level-set function `G = p·x + w`.
    pub fn level_set_values(&self) -> Grid2 {
        let mut g = self.w.clone();
        let (h1, h2) = (g.h1(), g.h2());
        let n1 = g.n1();
        par::for_each_row(g.as_mut_slice(), n1, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                *v += self.p.x * i as f64 * h1 + self.p.y * j as f64 * h2;
            }
        });
        g
    }

    /// Mean curvature `div(DG/√(|DG|² + ε²))` at every node.
    pub fn curvature_field(&self, eps: f64) -> Result<Grid2> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid("levelset", "eps", format!("must be > 0, got {eps}")));
        }
        if let Some((i, j)) = self.w.first_non_finite() {
            return Err(Error::non_finite("levelset", format!("corrector at node ({i}, {j})")));
        }
        let st = Stencil::new(&self.w, self.p);
        let mut out = self.w.same_shape(0.0);
        let n1 = self.w.n1();
        let w = self.w.as_slice();
        par::for_each_row(out.as_mut_slice(), n1, |j, row| {
            for (i, k) in row.iter_mut().enumerate() {
                *k = st.at(w, i, j).curvature(eps);
            }
        });
        Ok(out)
    }

    /// The frozen speed factor `(1 - dκ)₊` at every node.
    pub fn speed_field(&self) -> Grid2 {
        let st = Stencil::new(&self.w, self.p);
        let mut out = self.w.same_shape(0.0);
        let n1 = self.w.n1();
        let w = self.w.as_slice();
        par::for_each_row(out.as_mut_slice(), n1, |j, row| {
            for (i, s) in row.iter_mut().enumerate() {
                *s = st.at(w, i, j).speed(self.d, self.eps);
            }
        });
        out
    }

    /// One explicit Euler step of size `dt`.
    pub fn step(&self, dt: f64) -> Result<CorrectorState> {
        let op = Operator::new(self);
        let mut next = self.clone();
        op.check_dt(dt)?;
        op.advance(&self.w, next.w.as_mut_slice(), dt);
        next.t += dt;
        if let Some((i, j)) = next.w.first_non_finite() {
            return Err(Error::non_finite(
                "levelset",
                format!("step produced a non-finite value at node ({i}, {j}), t = {}", next.t),
            ));
        }
        Ok(next)
    }

    /// Advances to `t + duration`, recording a checkpoint at the start, every
    /// `checkpoint_every` units of time and at the end.
    pub fn evolve(&self, duration: f64, checkpoint_every: f64) -> Result<(CorrectorState, Vec<Checkpoint>)> {
        self.evolve_with(duration, checkpoint_every, |_| {})
    }

    /// [`evolve`](Self::evolve) with a callback invoked on the state at every
    /// checkpoint, including the initial one.
    pub fn evolve_with(
        &self,
        duration: f64,
        checkpoint_every: f64,
        mut on_checkpoint: impl FnMut(&CorrectorState),
    ) -> Result<(CorrectorState, Vec<Checkpoint>)> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::invalid("levelset", "T", format!("must be >= 0, got {duration}")));
        }
        if !(checkpoint_every.is_finite() && checkpoint_every > 0.0) {
            return Err(Error::invalid(
                "levelset",
                "checkpoint_every",
                format!("must be > 0, got {checkpoint_every}"),
            ));
        }
        let op = Operator::new(self);
        let dt_max = self.max_stable_dt();
        let mut cur = self.clone();
        let mut buf = self.w.clone();
        let mut checkpoints = vec![Checkpoint::of(&cur)];
        on_checkpoint(&cur);

        let t0 = self.t;
        let n_marks = (duration / checkpoint_every).ceil().max(1.0) as usize;
        for mark in 1..=n_marks {
            let target = (mark as f64 * checkpoint_every).min(duration);
            // absolute step count keeps the marks free of accumulated drift
            while cur.t - t0 < target * (1.0 - 1e-14) - 1e-300 {
                let dt = dt_max.min(target - (cur.t - t0));
                op.advance(&cur.w, buf.as_mut_slice(), dt);
                std::mem::swap(&mut cur.w, &mut buf);
                cur.t += dt;
            }
            cur.t = t0 + target;
            if let Some((i, j)) = cur.w.first_non_finite() {
                return Err(Error::non_finite(
                    "levelset",
                    format!("evolution blew up at node ({i}, {j}) before t = {}", cur.t),
                ));
            }
            checkpoints.push(Checkpoint::of(&cur));
            on_checkpoint(&cur);
            if target >= duration {
                break;
            }
        }
        if duration == 0.0 {
            checkpoints.truncate(1);
        }
        Ok((cur, checkpoints))
    }
}

/// Converged (or final) discounted solution.
#[derive(Debug, Clone)]
pub struct DiscountedState {
    pub v: Grid2,
    pub lambda: f64,
    pub p: Vec2,
    pub d: f64,
    pub flow: CellularFlow,
    pub iterations: usize,
    /// Max-norm update per unit pseudo-time at the last iteration.
    pub residual: f64,
}

impl DiscountedState {
    /// `λ·v` at every node.
    pub fn scaled(&self) -> Grid2 {
        self.v.map(|x| self.lambda * x)
    }

    /// `max |λ v|`.
    pub fn max_abs_scaled(&self) -> f64 {
        self.lambda * self.v.max_abs()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiscountedConfig {
    /// Stop when `max |Δv| / Δτ ≤ tol`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Curvature regularization; `None` means the grid spacing.
    pub eps: Option<f64>,
}

impl Default for DiscountedConfig {
    fn default() -> Self {
        DiscountedConfig {
            tol: 1e-6,
            max_iterations: 5_000_000,
            eps: None,
        }
    }
}

/// Marches `v' = -(λv + F[v])` from `v ≡ 0` to a fixed point on an `n × n`
/// grid.
pub fn solve_discounted(
    p: Vec2,
    d: f64,
    flow: CellularFlow,
    lambda: f64,
    n: usize,
    config: DiscountedConfig,
) -> Result<DiscountedState> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(
            "levelset",
            "lambda",
            format!("must be > 0, got {lambda}"),
        ));
    }
    if !(config.tol.is_finite() && config.tol > 0.0) {
        return Err(Error::invalid("levelset", "tol", "must be > 0"));
    }
    let mut state = CorrectorState::new(Grid2::zeros(n, n)?, p, d, flow)?;
    if let Some(eps) = config.eps {
        state = state.with_eps(eps)?;
    }
    let op = Operator::new(&state);
    let dt = state.max_stable_dt() / (1.0 + lambda);
    let mut v = state.w;
    let mut next = v.clone();
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iterations {
        let max_update = op.advance_discounted(&v, next.as_mut_slice(), dt, lambda);
        std::mem::swap(&mut v, &mut next);
        residual = max_update / dt;
        if !residual.is_finite() {
            return Err(Error::non_finite("levelset", format!("discounted iteration {it}")));
        }
        if it % 1000 == 0 {
            history.push(residual);
        }
        if residual <= config.tol {
            return Ok(DiscountedState {
                v,
                lambda,
                p,
                d,
                flow,
                iterations: it,
                residual,
            });
        }
    }
    history.push(residual);
    Err(Error::NotConverged {
        module: "levelset",
        iterations: config.max_iterations,
        last: residual,
        residuals: history,
    })
}

/// Precomputed neighbour tables for periodic stencils.
struct Stencil {
    n1: usize,
    n2: usize,
    inv_h1: f64,
    inv_h2: f64,
    p: Vec2,
    im: Vec<usize>,
    ip: Vec<usize>,
    jm: Vec<usize>,
    jp: Vec<usize>,
}

/// Finite differences of `G = p·x + w` at one node.
#[derive(Debug, Clone, Copy)]
struct Local {
    dxm: f64,
    dxp: f64,
    dym: f64,
    dyp: f64,
    gx: f64,
    gy: f64,
    wxx: f64,
    wyy: f64,
    wxy: f64,
}

impl Stencil {
    fn new(w: &Grid2, p: Vec2) -> Self {
        let (n1, n2) = (w.n1(), w.n2());
        Stencil {
            n1,
            n2,
            inv_h1: 1.0 / w.h1(),
            inv_h2: 1.0 / w.h2(),
            p,
            im: (0..n1).map(|i| (i + n1 - 1) % n1).collect(),
            ip: (0..n1).map(|i| (i + 1) % n1).collect(),
            jm: (0..n2).map(|j| (j + n2 - 1) % n2).collect(),
            jp: (0..n2).map(|j| (j + 1) % n2).collect(),
        }
    }

    #[inline(always)]
    fn at(&self, w: &[f64], i: usize, j: usize) -> Local {
        let n1 = self.n1;
        let (r, rm, rp) = (j * n1, self.jm[j] * n1, self.jp[j] * n1);
        let (im, ip) = (self.im[i], self.ip[i]);
        let c = w[r + i];
        let (e, west) = (w[r + ip], w[r + im]);
        let (north, south) = (w[rp + i], w[rm + i]);
        let (ih1, ih2) = (self.inv_h1, self.inv_h2);
        Local {
            dxm: self.p.x + (c - west) * ih1,
            dxp: self.p.x + (e - c) * ih1,
            dym: self.p.y + (c - south) * ih2,
            dyp: self.p.y + (north - c) * ih2,
            gx: self.p.x + 0.5 * (e - west) * ih1,
            gy: self.p.y + 0.5 * (north - south) * ih2,
            wxx: (e - 2.0 * c + west) * ih1 * ih1,
            wyy: (north - 2.0 * c + south) * ih2 * ih2,
            wxy: 0.25 * (w[rp + ip] - w[rm + ip] - w[rp + im] + w[rm + im]) * ih1 * ih2,
        }
    }
}

impl Local {
    #[inline(always)]
    fn curvature(&self, eps: f64) -> f64 {
        let (gx2, gy2, e2) = (self.gx * self.gx, self.gy * self.gy, eps * eps);
        let q = gx2 + gy2 + e2;
        ((gy2 + e2) * self.wxx - 2.0 * self.gx * self.gy * self.wxy + (gx2 + e2) * self.wyy) / (q * q.sqrt())
    }

    #[inline(always)]
    fn speed(&self, d: f64, eps: f64) -> f64 {
        if d == 0.0 {
            1.0
        } else {
            (1.0 - d * self.curvature(eps)).max(0.0)
        }
    }

    /// Godunov norm for a non-negative normal speed.
    #[inline(always)]
    fn godunov(&self) -> f64 {
        let ax = self.dxm.max(0.0);
        let bx = self.dxp.min(0.0);
        let ay = self.dym.max(0.0);
        let by = self.dyp.min(0.0);
        ((ax * ax).max(bx * bx) + (ay * ay).max(by * by)).sqrt()
    }

    #[inline(always)]
    fn drift(&self, v: Vec2) -> f64 {
        let fx = if v.x > 0.0 { self.dxm } else { self.dxp };
        let fy = if v.y > 0.0 { self.dym } else { self.dyp };
        v.x * fx + v.y * fy
    }
}

/// The spatial operator `F[w] = s·|p + Dw|_G + V·(p + Dw)_up` with the
/// velocity sampled once at the nodes.
struct Operator {
    stencil: Stencil,
    d: f64,
    eps: f64,
    dt_max: f64,
    velocity: Vec<Vec2>,
}

impl Operator {
    fn new(state: &CorrectorState) -> Self {
        let w = &state.w;
        let velocity = (0..w.n2())
            .flat_map(|j| (0..w.n1()).map(move |i| (i, j)))
            .map(|(i, j)| state.flow.velocity(w.node(i, j)))
            .collect();
        Operator {
            stencil: Stencil::new(w, state.p),
            d: state.d,
            eps: state.eps,
            dt_max: state.max_stable_dt(),
            velocity,
        }
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("levelset", "dt", format!("must be > 0, got {dt}")));
        }
        if dt > self.dt_max * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                dt,
                max_dt: self.dt_max,
            });
        }
        Ok(())
    }

    #[inline(always)]
    fn rate(&self, w: &[f64], i: usize, j: usize) -> f64 {
        let l = self.stencil.at(w, i, j);
        l.speed(self.d, self.eps) * l.godunov() + l.drift(self.velocity[j * self.stencil.n1 + i])
    }

    fn advance(&self, w: &Grid2, out: &mut [f64], dt: f64) {
        let src = w.as_slice();
        let n1 = self.stencil.n1;
        par::for_each_row(out, n1, |j, row| {
            for (i, o) in row.iter_mut().enumerate() {
                *o = src[j * n1 + i] - dt * self.rate(src, i, j);
            }
        });
    }

    /// One pseudo-time step of the discounted problem; returns `max |Δv|`.
    fn advance_discounted(&self, v: &Grid2, out: &mut [f64], dt: f64, lambda: f64) -> f64 {
        let src = v.as_slice();
        let n1 = self.stencil.n1;
        debug_assert_eq!(src.len(), n1 * self.stencil.n2);
        par::for_each_row_max(out, n1, |j, row| {
            let mut m = 0.0f64;
            for (i, o) in row.iter_mut().enumerate() {
                let c = src[j * n1 + i];
                let delta = dt * (lambda * c + self.rate(src, i, j));
                *o = c - delta;
                m = m.max(delta.abs());
            }
            m
        })
    }
}

/// Periodic signed distance `|x - c|_torus - R` to a circle, sampled on an
/// `n × n` grid (negative inside).
pub fn circle_level_set(n: usize, center: Vec2, radius: f64) -> Result<Grid2> {
    Grid2::from_fn(n, n, |x| crate::geom::torus_distance(x, center) - radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flow(a: f64) -> CellularFlow {
        CellularFlow::new(a).unwrap()
    }

    #[test]
    fn flat_front_has_zero_curvature() {
        let s = CorrectorState::flat(32, Vec2::new(1.0, 0.0), 0.3, flow(0.0)).unwrap();
        let k = s.curvature_field(s.eps).unwrap();
        assert_eq!(k.max_abs(), 0.0);
        // a constant corrector is the same front
        let c = CorrectorState::new(Grid2::filled(32, 32, 2.5).unwrap(), Vec2::new(1.0, 0.0), 0.3, flow(0.0)).unwrap();
        assert_eq!(c.curvature_field(c.eps).unwrap(), k);
    }

    #[test]
    fn curvature_of_a_circle() {
        let n = 128;
        let c = Vec2::new(PI, PI);
        let w = circle_level_set(n, c, 1.0).unwrap();
        let s = CorrectorState::new(w, Vec2::ZERO, 0.1, flow(0.0)).unwrap();
        let h = s.w.h();
        let k = s.curvature_field(h).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let r = crate::geom::torus_distance(s.w.node(i, j), c);
                if (r - 1.0).abs() < h {
                    worst = worst.max((k.get(i, j) - 1.0 / r).abs());
                }
            }
        }
        assert!(worst <= 2.0 * (h + h), "max curvature error {worst}");
    }

    #[test]
    fn curvature_rejects_bad_input() {
        let mut s = CorrectorState::flat(16, Vec2::new(1.0, 0.0), 0.1, flow(0.0)).unwrap();
        assert!(s.curvature_field(0.0).is_err());
        s.w.set(3, 4, f64::NAN);
        assert!(matches!(s.curvature_field(0.1), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn plane_front_moves_at_unit_speed() {
        let s = CorrectorState::flat(32, Vec2::new(1.0, 0.0), 0.7, flow(0.0)).unwrap();
        let dt = s.max_stable_dt();
        let next = s.step(dt).unwrap();
        for v in next.w.as_slice() {
            assert_eq!(*v, -dt);
        }
        assert_eq!(next.t, dt);
    }

    #[test]
    fn plane_wave_exact_over_time() {
        let p = Vec2::new(0.6, 0.8);
        let s = CorrectorState::flat(32, p, 0.2, flow(0.0)).unwrap();
        let (end, _) = s.evolve(2.0, 0.5).unwrap();
        assert!((end.t - 2.0).abs() < 1e-12);
        let err = end.w.as_slice().iter().fold(0.0f64, |m, v| m.max((v + end.t).abs()));
        assert!(err <= 1e-10, "plane wave error {err}");
    }

    #[test]
    fn rejects_unstable_steps_and_bad_input() {
        let s = CorrectorState::flat(32, Vec2::new(1.0, 0.0), 0.1, flow(2.0)).unwrap();
        let dt = s.max_stable_dt();
        match s.step(1.5 * dt) {
            Err(Error::Cfl { max_dt, .. }) => assert_eq!(max_dt, dt),
            other => panic!("expected a CFL rejection, got {other:?}"),
        }
        assert!(CorrectorState::flat(8, Vec2::new(1.0, 0.0), 0.1, flow(1.0)).is_err());
        assert!(CorrectorState::flat(16, Vec2::new(1.0, 0.0), -0.1, flow(1.0)).is_err());
        let mut bad = Grid2::zeros(16, 16).unwrap();
        bad.set(0, 0, f64::INFINITY);
        assert!(CorrectorState::new(bad, Vec2::ZERO, 0.1, flow(1.0)).is_err());
    }

    #[test]
    fn step_bound_formula() {
        let h = 2.0 * PI / 128.0;
        let dt = max_stable_dt(h, 0.1, 2.0, Vec2::new(1.0, 0.0));
        let expect = 0.4 * (h * h / 0.4).min(h / 4.0);
        assert!((dt - expect).abs() < 1e-18);
        assert_eq!(max_stable_dt(h, 0.0, 0.0, Vec2::new(1.0, 0.0)), 0.4 * h / 2.0);
    }

    #[test]
    fn evolve_zero_duration_is_identity() {
        let s = CorrectorState::flat(16, Vec2::new(1.0, 0.0), 0.1, flow(1.0)).unwrap();
        let (end, cps) = s.evolve(0.0, 0.1).unwrap();
        assert_eq!(end.w, s.w);
        assert_eq!(end.t, 0.0);
        assert_eq!(cps.len(), 1);
    }

    #[test]
    fn evolve_hits_checkpoint_times() {
        let s = CorrectorState::flat(16, Vec2::new(1.0, 0.0), 0.1, flow(1.0)).unwrap();
        let (_, cps) = s.evolve(1.0, 0.3).unwrap();
        let times: Vec<f64> = cps.iter().map(|c| c.t).collect();
        let want = [0.0, 0.3, 0.6, 0.9, 1.0];
        assert_eq!(times.len(), want.len());
        for (a, b) in times.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{times:?}");
        }
    }

    #[test]
    fn translation_commutes_with_step() {
        let w = Grid2::from_fn(32, 32, |x| 0.3 * (x.x + 2.0 * x.y).sin() + 0.1 * x.y.cos()).unwrap();
        let s = CorrectorState::new(w.clone(), Vec2::new(1.0, 0.0), 0.1, flow(2.0)).unwrap();
        let shifted = CorrectorState::new(w.map(|v| v + 0.75), s.p, s.d, s.flow).unwrap();
        let dt = s.max_stable_dt();
        let a = s.step(dt).unwrap().w;
        let b = shifted.step(dt).unwrap().w.map(|v| v - 0.75);
        assert!(a.max_abs_diff(&b) < 1e-13);
    }

    #[test]
    fn positive_part_clamps_speed_on_small_circles() {
        let n = 128;
        let c = Vec2::new(PI, PI);
        let s = CorrectorState::new(circle_level_set(n, c, 0.1).unwrap(), Vec2::ZERO, 0.5, flow(0.0)).unwrap();
        let speed = s.speed_field();
        let h = s.w.h();
        let mut front_nodes = 0;
        for j in 0..n {
            for i in 0..n {
                let r = crate::geom::torus_distance(s.w.node(i, j), c);
                if (r - 0.1).abs() <= h {
                    front_nodes += 1;
                    assert_eq!(speed.get(i, j), 0.0, "node at r = {r}");
                }
            }
        }
        assert!(front_nodes > 8);
    }

    #[test]
    fn discounted_laminar_is_constant() {
        let st = solve_discounted(
            Vec2::new(0.0, 1.0),
            0.0,
            flow(0.0),
            0.5,
            16,
            DiscountedConfig {
                tol: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        let lv = st.scaled();
        for v in lv.as_slice() {
            assert!((v + 1.0).abs() < 1e-9, "λv = {v}");
        }
    }

    #[test]
    fn discounted_reports_non_convergence() {
        let err = solve_discounted(
            Vec2::new(1.0, 0.0),
            0.1,
            flow(1.0),
            0.1,
            16,
            DiscountedConfig {
                tol: 1e-12,
                max_iterations: 2500,
                eps: None,
            },
        )
        .unwrap_err();
        match err {
            Error::NotConverged {
                iterations, residuals, ..
            } => {
                assert_eq!(iterations, 2500);
                assert_eq!(residuals.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(solve_discounted(Vec2::new(1.0, 0.0), 0.1, flow(1.0), 0.0, 16, Default::default()).is_err());
    }

    #[test]
    fn checkpoint_csv_layout() {
        let cps = [Checkpoint {
            t: 0.5,
            mean_w: -0.5,
            min_w: -0.75,
            max_w: -0.25,
        }];
        let mut out = Vec::new();
        write_checkpoints_csv(&mut out, &cps, &["grid=16".into()]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "t,mean_w,min_w,max_w,osc\n# grid=16\n0.5,-0.5,-0.75,-0.25,0.5\n");
    }
}
