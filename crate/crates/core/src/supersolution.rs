//! Shrinking-ellipse supersolutions near the separatrix `x₁ = 0` and the
//! containment check of the level-set solver against them.
//!
//! The ellipse `(x₁ - a₀ - ν)²/a(t)² + (x₂ - θ)²/b(t)² = 1` with
//! `a(t) = a₀ + t/2`, `b(t) = b₀ - Lt` moves slower than the front speed
//! `1 - κ + V·n` for `t ≤ t_δ = min(2a₀, b₀/(2L))`, so the burnt region of a
//! front started from the unit square must contain it.

use crate::error::{Error, PreconditionError, Result};
use crate::flowfield::CellularFlow;
use crate::geom::{periodic_delta, Vec2};
use crate::grid::Grid2;
use crate::levelset::CorrectorState;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_3, PI};

/// `ab / (a² sin²φ + b² cos²φ)^{3/2}` at `(a cos φ, b sin φ)`.
pub fn ellipse_curvature(a: f64, b: f64, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    a * b / (a * a * s * s + b * b * c * c).powf(1.5)
}

/// Outward normal speed of the ellipse at `(a cos φ, b sin φ)` when the
/// semi-axes change at rates `da`, `db`.
pub fn ellipse_normal_velocity(a: f64, b: f64, da: f64, db: f64, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    (da * b * c * c + a * db * s * s) / (a * a * s * s + b * b * c * c).sqrt()
}

/// Unit outward normal at `(a cos φ, b sin φ)`.
pub fn ellipse_normal(a: f64, b: f64, phi: f64) -> Vec2 {
    let (s, c) = phi.sin_cos();
    let n = Vec2::new(b * c, a * s);
    n * (1.0 / n.norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupersolutionParams {
    pub delta: f64,
    /// Bound on `|V|`.
    pub m0: f64,
    pub a0: f64,
    pub b0: f64,
    pub l: f64,
    /// Vertical centre `θ ∈ [δ, 1-δ]`.
    pub theta: f64,
    /// Horizontal offset `ν ≥ 0`.
    pub nu: f64,
}

fn precondition(inequality: &'static str, lhs: f64, rhs: f64) -> Result<()> {
    if lhs < rhs {
        Ok(())
    } else {
        Err(Error::Precondition {
            module: "supersolution",
            inner: PreconditionError { inequality, lhs, rhs },
        })
    }
}

impl SupersolutionParams {
    /// Checks every constraint of the construction.
    pub fn new(delta: f64, m0: f64, a0: f64, b0: f64, l: f64, theta: f64, nu: f64) -> Result<Self> {
        let p = SupersolutionParams {
            delta,
            m0,
            a0,
            b0,
            l,
            theta,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let SupersolutionParams {
            delta,
            m0,
            a0,
            b0,
            l,
            theta,
            nu,
        } = *self;
        if ![delta, m0, a0, b0, l, theta, nu].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("supersolution", "params", "must be finite"));
        }
        precondition("0 < delta", 0.0, delta + f64::MIN_POSITIVE)?;
        precondition("delta < 1/2", delta, 0.5)?;
        precondition("0 < a0", 0.0, a0)?;
        precondition("4 a0 < b0", 4.0 * a0, b0)?;
        precondition("0 < L", 0.0, l)?;
        if m0 < 0.0 || nu < 0.0 {
            return Err(Error::invalid("supersolution", "m0/nu", "must be >= 0"));
        }
        precondition(
            "64 a0/b0^2 + 4 sqrt(3) M0 a0/b0 < 1/8",
            64.0 * a0 / (b0 * b0) + 4.0 * 3f64.sqrt() * m0 * a0 / b0,
            0.125,
        )?;
        // |V·(1,0)| ≤ M0 |sin x₁| ≤ 4 a0 M0 on [-4a0, 4a0] × [0,1]
        precondition("4 a0 M0 < 1/8", 4.0 * a0 * m0, 0.125)?;
        precondition(
            "1/2 - 3 L a0/(4 b0) < 1 - b0/a0^2 - M0",
            0.5 - 3.0 * l * a0 / (4.0 * b0),
            1.0 - b0 / (a0 * a0) - m0,
        )?;
        precondition("delta <= theta", delta - 1e-15, theta)?;
        precondition("theta <= 1 - delta", theta, 1.0 - delta + 1e-15)?;
        Ok(())
    }

    /// `b0 = δ/2`, `a0` at half of its largest admissible value and `L`
    /// twice its lower bound.
    pub fn admissible(delta: f64, m0: f64, theta: f64) -> Result<Self> {
        let b0 = 0.5 * delta;
        let a_curv = 0.125 / (64.0 / (b0 * b0) + 4.0 * 3f64.sqrt() * m0 / b0);
        let a_flow = if m0 > 0.0 { 0.125 / (4.0 * m0) } else { f64::INFINITY };
        let a0 = 0.5 * a_curv.min(a_flow).min(0.25 * b0);
        let l_min = 4.0 * b0 / (3.0 * a0) * (b0 / (a0 * a0) + m0 - 0.5);
        let l = if l_min > 0.0 { 2.0 * l_min } else { 1.0 };
        Self::new(delta, m0, a0, b0, l, theta, 0.0)
    }

    pub fn t_max(&self) -> f64 {
        (2.0 * self.a0).min(self.b0 / (2.0 * self.l))
    }

    pub fn a(&self, t: f64) -> f64 {
        self.a0 + 0.5 * t
    }

    pub fn b(&self, t: f64) -> f64 {
        self.b0 - self.l * t
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.a0 + self.nu, self.theta)
    }

    pub fn point(&self, phi: f64, t: f64) -> Vec2 {
        self.center() + Vec2::new(self.a(t) * phi.cos(), self.b(t) * phi.sin())
    }

    /// `1 - dκ + V·n - v_n` at angle `φ` and time `t`.
    pub fn margin_at(&self, flow: &CellularFlow, d: f64, phi: f64, t: f64) -> f64 {
        let (a, b) = (self.a(t), self.b(t));
        let kappa = ellipse_curvature(a, b, phi);
        let vn = ellipse_normal_velocity(a, b, 0.5, -self.l, phi);
        let flux = flow.velocity(self.point(phi, t)).dot(ellipse_normal(a, b, phi));
        1.0 - d * kappa + flux - vn
    }
}

/// Angles `2πk/n` plus the four angles with `|sin φ| = √3/2`.
pub fn margin_angles(n_phi: usize) -> Vec<f64> {
    let mut phis: Vec<f64> = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
    phis.extend([FRAC_PI_3, 2.0 * FRAC_PI_3, 4.0 * FRAC_PI_3, 5.0 * FRAC_PI_3]);
    phis
}

/// Minimum of `1 - κ + V·n - v_n` over `n_phi` angles (plus the case-split
/// angles) and `n_t` equally spaced times in `[0, t_δ]`. The curvature
/// enters with unit weight, which bounds the margin from below for every
/// `d ≤ 1`.
pub fn supersolution_margin(
    params: &SupersolutionParams,
    flow: &CellularFlow,
    n_phi: usize,
    n_t: usize,
) -> Result<f64> {
    params.validate()?;
    if flow.max_speed() > params.m0 {
        return Err(Error::Precondition {
            module: "supersolution",
            inner: PreconditionError {
                inequality: "max |V| <= M0",
                lhs: flow.max_speed(),
                rhs: params.m0,
            },
        });
    }
    if n_phi == 0 || n_t < 2 {
        return Err(Error::invalid(
            "supersolution",
            "n_phi/n_t",
            "need n_phi >= 1 and n_t >= 2",
        ));
    }
    let phis = margin_angles(n_phi);
    let tmax = params.t_max();
    let mut worst = f64::INFINITY;
    for k in 0..n_t {
        let t = tmax * k as f64 / (n_t - 1) as f64;
        for &phi in &phis {
            worst = worst.min(params.margin_at(flow, 1.0, phi, t));
        }
    }
    Ok(worst)
}

/// `∓(2/π) arctan(dist(x, ∂S))` for the unit square `S = (0,1)²`, negative
/// inside; coordinates are read periodically around the origin.
pub fn square_initial_data(x: Vec2) -> f64 {
    let y = Vec2::new(periodic_delta(x.x), periodic_delta(x.y));
    let inside = y.x > 0.0 && y.x < 1.0 && y.y > 0.0 && y.y < 1.0;
    let dist = if inside {
        y.x.min(1.0 - y.x).min(y.y).min(1.0 - y.y)
    } else {
        let dx = (-y.x).max(0.0).max(y.x - 1.0);
        let dy = (-y.y).max(0.0).max(y.y - 1.0);
        dx.hypot(dy)
    };
    let g = FRAC_2_PI * dist.atan();
    if inside {
        -g
    } else {
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentRow {
    pub t: f64,
    /// Analytic supersolution margin at this time.
    pub min_margin: f64,
    /// Nodes inside the ellipse shrunk by `2h` on both axes.
    pub nodes_checked: usize,
    /// Checked nodes with `G ≥ 0`.
    pub violations: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentReport {
    pub params: SupersolutionParams,
    pub t_max: f64,
    pub h: f64,
    pub rows: Vec<ContainmentRow>,
    /// `(θ, G((0,θ), t_δ))` read off the final grid.
    pub boundary_values: Vec<(f64, f64)>,
}

impl ContainmentReport {
    pub fn contained(&self) -> bool {
        self.rows.iter().all(|r| r.violations.is_empty())
    }

    pub fn boundary_burnt(&self) -> bool {
        self.boundary_values.iter().all(|&(_, g)| g < 0.0)
    }

    pub fn nodes_checked(&self) -> usize {
        self.rows.iter().map(|r| r.nodes_checked).sum()
    }

    /// Columns `t,min_margin,violations,nodes_checked`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W, provenance: &[String]) -> Result<()> {
        writeln!(out, "t,min_margin,violations,nodes_checked")?;
        for line in provenance {
            writeln!(out, "# {line}")?;
        }
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                r.t,
                r.min_margin,
                r.violations.len(),
                r.nodes_checked
            )?;
        }
        Ok(())
    }
}

/// Evolves the square's initial data on an `n × n` grid up to `t_δ` and
/// checks, at `t_δ/4`, `t_δ/2`, `3t_δ/4` and `t_δ`, that every node inside
/// the `2h`-shrunk ellipse is burnt. Also reads `G((0,θ), t_δ)` for each
/// `θ` in `thetas`.
pub fn containment_check(
    flow: CellularFlow,
    d: f64,
    delta: f64,
    n: usize,
    thetas: &[f64],
) -> Result<ContainmentReport> {
    let theta0 = *thetas
        .first()
        .ok_or_else(|| Error::invalid("supersolution", "thetas", "need at least one θ"))?;
    let params = SupersolutionParams::admissible(delta, flow.max_speed(), theta0)?;
    let t_max = params.t_max();
    let g0 = Grid2::from_fn(n, n, square_initial_data)?;
    let state = CorrectorState::new(g0, Vec2::ZERO, d, flow)?;
    let h = state.w.h();

    let mut rows = Vec::new();
    let phis = margin_angles(512);
    let (end, _) = state.evolve_with(t_max, 0.25 * t_max, |s| {
        let t = s.t;
        let (a, b) = (params.a(t) - 2.0 * h, params.b(t) - 2.0 * h);
        let mut checked = 0;
        let mut violations = Vec::new();
        if a > 0.0 && b > 0.0 {
            for j in 0..n {
                for i in 0..n {
                    let x = s.w.node(i, j);
                    let y = Vec2::new(periodic_delta(x.x), x.y) - params.center();
                    if (y.x / a).powi(2) + (y.y / b).powi(2) < 1.0 {
                        checked += 1;
                        if s.w.get(i, j) >= 0.0 {
                            violations.push((i, j));
                        }
                    }
                }
            }
        }
        let min_margin = phis
            .iter()
            .map(|&phi| params.margin_at(&flow, 1.0, phi, t))
            .fold(f64::INFINITY, f64::min);
        rows.push(ContainmentRow {
            t,
            min_margin,
            nodes_checked: checked,
            violations,
        });
    })?;
    let boundary_values = thetas
        .iter()
        .map(|&th| (th, end.w.interpolate(Vec2::new(0.0, th))))
        .collect();
    Ok(ContainmentReport {
        params,
        t_max,
        h,
        rows,
        boundary_values,
    })
}
