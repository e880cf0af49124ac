//! Forward simulation of game paths under explicit strategies for both
//! players, and reachability measurements.

use crate::error::{Error, Result};
use crate::flowfield::{stream, stream_gradient, CellRegion};
use crate::game::{displacement, step_position, GameParams, Sign};
use crate::geom::Vec2;
use std::f64::consts::TAU;

/// Below this `|DH|` the descent direction is undefined.
pub const STAGNATION_EPS: f64 = 1e-14;

/// A set the game tries to enter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Region(CellRegion),
    Ball {
        center: Vec2,
        radius: f64,
    },
    /// `{|H| ≤ μ}`
    LevelAtMost(f64),
}

impl Target {
    pub fn contains(&self, x: Vec2) -> bool {
        match *self {
            Target::Region(r) => r.contains(x),
            Target::Ball { center, radius } => (x - center).norm() <= radius,
            Target::LevelAtMost(mu) => stream(x).abs() <= mu,
        }
    }

    /// Distance surrogate, zero inside.
    pub fn distance(&self, x: Vec2) -> f64 {
        match *self {
            Target::Region(r) => r.distance(x),
            Target::Ball { center, radius } => ((x - center).norm() - radius).max(0.0),
            Target::LevelAtMost(mu) => (stream(x).abs() - mu).max(0.0),
        }
    }
}

/// Condition ending a phase of a composite strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Switch {
    Never,
    AbsLevelBelow(f64),
    Enter(Target),
    InBox { lo: Vec2, hi: Vec2 },
    AfterTime(f64),
}

impl Switch {
    fn fires(&self, x: Vec2, t: f64) -> bool {
        match *self {
            Switch::Never => false,
            Switch::AbsLevelBelow(mu) => stream(x).abs() <= mu,
            Switch::Enter(target) => target.contains(x),
            Switch::InBox { lo, hi } => x.x >= lo.x && x.x <= hi.x && x.y >= lo.y && x.y <= hi.y,
            Switch::AfterTime(s) => t >= s,
        }
    }
}

/// Player I's policies.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyI {
    /// `η = sign(H)·(DH)⊥/|DH|`, so that `η⊥` points down `|H|`; equal to
    /// `V/|V|` inside `[0,π]²` when `A > 0`.
    Descent,
    /// `η = 0`: pure transport by `-V`.
    FollowFlow,
    /// `η ⊥ (x - center)`, `|η| = 1`, with `η⊥` pointing away from the
    /// centre when `outward` and towards it otherwise.
    Exit { center: Vec2, outward: bool },
    /// `|η| = 1` with `η⊥` equal to the unit `direction`.
    AxisPush { direction: Vec2 },
    /// Phases played in order; each ends when its switch fires. The last
    /// phase runs until the game stops. Phases may not be composite.
    Composite(Vec<(StrategyI, Switch)>),
}

impl StrategyI {
    pub fn label(&self) -> String {
        match self {
            StrategyI::Descent => "descent".into(),
            StrategyI::FollowFlow => "follow_flow".into(),
            StrategyI::Exit { outward, .. } => if *outward { "exit_out" } else { "exit_in" }.into(),
            StrategyI::AxisPush { direction } => format!("axis_push({},{})", direction.x, direction.y),
            StrategyI::Composite(phases) => {
                let names: Vec<String> = phases.iter().map(|(s, _)| s.label()).collect();
                format!("composite[{}]", names.join(">"))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            StrategyI::AxisPush { direction } if !(direction.norm() > 0.0 && direction.is_finite()) => Err(
                Error::invalid("trajectory", "direction", "must be a nonzero finite vector"),
            ),
            StrategyI::Composite(phases) => {
                if phases.is_empty() {
                    return Err(Error::invalid("trajectory", "strategy", "empty composite"));
                }
                for (s, _) in phases {
                    if matches!(s, StrategyI::Composite(_)) {
                        return Err(Error::invalid("trajectory", "strategy", "nested composite"));
                    }
                    s.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// What player II maximizes in [`StrategyII::WorstCaseEnum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Level,
    AbsLevel,
    DistanceTo(Target),
    DistanceFrom(Vec2),
}

impl Objective {
    fn eval(&self, x: Vec2) -> f64 {
        match *self {
            Objective::Level => stream(x),
            Objective::AbsLevel => stream(x).abs(),
            Objective::DistanceTo(t) => t.distance(x),
            Objective::DistanceFrom(c) => (x - c).norm(),
        }
    }
}

/// Player II's policies. Ties go to `b = +1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyII {
    /// `b` maximizing `H` at the successor.
    MaxSign,
    MinSign,
    /// `b·η·axis ≤ 0`.
    OpposeAxis {
        axis: Vec2,
    },
    /// `b·η·(x - center) ≤ 0`.
    Toward {
        center: Vec2,
    },
    Fixed(Sign),
    /// Greedy one-step maximization of the objective.
    WorstCaseEnum(Objective),
}

impl StrategyII {
    pub fn label(&self) -> String {
        match self {
            StrategyII::MaxSign => "max_sign".into(),
            StrategyII::MinSign => "min_sign".into(),
            StrategyII::OpposeAxis { axis } => format!("oppose_axis({},{})", axis.x, axis.y),
            StrategyII::Toward { .. } => "toward".into(),
            StrategyII::Fixed(s) => format!("fixed({})", s.value()),
            StrategyII::WorstCaseEnum(o) => format!(
                "worst_case({})",
                match o {
                    Objective::Level => "level",
                    Objective::AbsLevel => "abs_level",
                    Objective::DistanceTo(_) => "distance_to_target",
                    Objective::DistanceFrom(_) => "distance_from",
                }
            ),
        }
    }

    fn choose(&self, x: Vec2, eta: Vec2, params: &GameParams) -> Sign {
        let sign_against = |v: f64| if v > 0.0 { Sign::Minus } else { Sign::Plus };
        let greedy = |f: &dyn Fn(Vec2) -> f64| {
            let plus = f(x + displacement(x, eta, 1.0, params));
            let minus = f(x + displacement(x, eta, -1.0, params));
            if minus > plus {
                Sign::Minus
            } else {
                Sign::Plus
            }
        };
        match *self {
            StrategyII::MaxSign => greedy(&stream),
            StrategyII::MinSign => greedy(&|y| -stream(y)),
            StrategyII::OpposeAxis { axis } => sign_against(eta.dot(axis)),
            StrategyII::Toward { center } => sign_against(eta.dot(x - center)),
            StrategyII::Fixed(s) => s,
            StrategyII::WorstCaseEnum(obj) => greedy(&|y| obj.eval(y)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryMeta {
    pub strategy_i: String,
    pub strategy_ii: String,
    /// Steps at which descent hit a stagnation point and switched to the
    /// exit fallback.
    pub fallbacks: Vec<usize>,
    /// Step at which each composite phase after the first began.
    pub phase_starts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Vec2>,
    pub controls: Vec<(Vec2, Sign)>,
    pub tau: f64,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn time(&self) -> f64 {
        self.steps() as f64 * self.tau * self.tau
    }

    pub fn last(&self) -> Vec2 {
        *self.points.last().expect("trajectory has a start point")
    }

    /// Columns `step,x1,x2,eta1,eta2,b,H`; the final row has no control.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W, provenance: &[String]) -> Result<()> {
        writeln!(out, "step,x1,x2,eta1,eta2,b,H")?;
        for line in provenance {
            writeln!(out, "# {line}")?;
        }
        for (k, x) in self.points.iter().enumerate() {
            match self.controls.get(k) {
                Some((eta, b)) => writeln!(
                    out,
                    "{k},{},{},{},{},{},{}",
                    x.x,
                    x.y,
                    eta.x,
                    eta.y,
                    b.value(),
                    stream(*x)
                )?,
                None => writeln!(out, "{k},{},{},,,,{}", x.x, x.y, stream(*x))?,
            }
        }
        Ok(())
    }
}

/// Largest `r = 2^-k` with `max |V| ≤ ¼` on the closed ball `B_r(c)`,
/// checked on a polar sample.
pub fn stagnation_exit_radius(c: Vec2, params: &GameParams) -> f64 {
    let mut r = 1.0;
    for _ in 0..40 {
        let mut worst: f64 = 0.0;
        for ring in 0..=4 {
            let rr = r * ring as f64 / 4.0;
            for k in 0..64 {
                let y = c + Vec2::from_angle(TAU * k as f64 / 64.0) * rr;
                worst = worst.max(params.flow.velocity(y).norm());
            }
        }
        if worst <= 0.25 {
            return r;
        }
        r *= 0.5;
    }
    r
}

struct PolicyI<'a> {
    strategy: &'a StrategyI,
    phase: usize,
    /// Active stagnation fallback: centre and radius.
    escape: Option<(Vec2, f64)>,
}

impl<'a> PolicyI<'a> {
    fn new(strategy: &'a StrategyI) -> Self {
        PolicyI {
            strategy,
            phase: 0,
            escape: None,
        }
    }

    fn choose(&mut self, x: Vec2, t: f64, step: usize, params: &GameParams, meta: &mut TrajectoryMeta) -> Vec2 {
        let current = match self.strategy {
            StrategyI::Composite(phases) => {
                while self.phase + 1 < phases.len() && phases[self.phase].1.fires(x, t) {
                    self.phase += 1;
                    meta.phase_starts.push(step);
                }
                &phases[self.phase].0
            }
            other => other,
        };
        self.basic(current, x, step, params, meta)
    }

    fn basic(&mut self, s: &StrategyI, x: Vec2, step: usize, params: &GameParams, meta: &mut TrajectoryMeta) -> Vec2 {
        match s {
            StrategyI::FollowFlow => Vec2::ZERO,
            StrategyI::Exit { center, outward } => exit_direction(x, *center, *outward),
            StrategyI::AxisPush { direction } => -direction.normalized().expect("validated").perp(),
            StrategyI::Descent => {
                if let Some((c, r)) = self.escape {
                    if (x - c).norm() < r {
                        return exit_direction(x, c, true);
                    }
                    self.escape = None;
                }
                let g = stream_gradient(x);
                let n = g.norm();
                if n < STAGNATION_EPS {
                    let r = stagnation_exit_radius(x, params);
                    self.escape = Some((x, r));
                    meta.fallbacks.push(step);
                    return exit_direction(x, x, true);
                }
                let sign = if stream(x) < 0.0 { -1.0 } else { 1.0 };
                g.perp() * (sign / n)
            }
            StrategyI::Composite(_) => unreachable!("nested composites are rejected"),
        }
    }
}

/// `η ⊥ (x - c)` with `η⊥ = ±(x - c)/|x - c|`.
fn exit_direction(x: Vec2, c: Vec2, outward: bool) -> Vec2 {
    let u = (x - c).normalized().unwrap_or(Vec2::new(1.0, 0.0));
    // (u⊥)⊥ = -u
    if outward {
        -u.perp()
    } else {
        u.perp()
    }
}

/// Plays up to `params.n_steps` moves from `x0`, stopping early as soon as
/// `stop` holds at the current point.
pub fn run(
    x0: Vec2,
    s1: &StrategyI,
    s2: &StrategyII,
    params: &GameParams,
    stop: impl Fn(Vec2) -> bool,
) -> Result<Trajectory> {
    params.validate()?;
    s1.validate()?;
    if !x0.is_finite() {
        return Err(Error::invalid("trajectory", "x0", "must be finite"));
    }
    let mut meta = TrajectoryMeta {
        strategy_i: s1.label(),
        strategy_ii: s2.label(),
        ..Default::default()
    };
    let mut policy = PolicyI::new(s1);
    let mut points = vec![x0];
    let mut controls = Vec::new();
    let t2 = params.tau * params.tau;
    let mut x = x0;
    for n in 0..params.n_steps {
        if stop(x) {
            break;
        }
        let eta = policy.choose(x, n as f64 * t2, n, params, &mut meta);
        let b = s2.choose(x, eta, params);
        x = step_position(x, eta, b, params)?;
        points.push(x);
        controls.push((eta, b));
    }
    Ok(Trajectory {
        points,
        controls,
        tau: params.tau,
        meta,
    })
}

/// Closed-form solution `sin²(max(arcsin √s₀ - t/√2, 0))` of
/// `ṡ = -√(2s(1-s))`, `s(0) = s₀`.
pub fn descent_level_ode(s0: f64, t: f64) -> Result<f64> {
    if !(s0 > 0.0 && s0 <= 1.0) {
        return Err(Error::invalid(
            "trajectory",
            "s0",
            format!("must lie in (0, 1], got {s0}"),
        ));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("trajectory", "t", format!("must be >= 0, got {t}")));
    }
    let phase = (s0.sqrt().asin() - t / std::f64::consts::SQRT_2).max(0.0);
    Ok(phase.sin().powi(2))
}

/// Time for the ODE to go from `s0` down to `s1`.
pub fn descent_ode_time(s0: f64, s1: f64) -> f64 {
    std::f64::consts::SQRT_2 * (s0.sqrt().asin() - s1.max(0.0).sqrt().asin()).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachReport {
    pub start: Vec2,
    pub target: Target,
    pub end: Vec2,
    pub steps_used: usize,
    pub time_used: f64,
    pub success: bool,
    pub adversary: String,
}

pub const REACH_CSV_HEADER: &str = "start1,start2,end1,end2,steps,time,success,adversary";

impl ReachReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.start.x,
            self.start.y,
            self.end.x,
            self.end.y,
            self.steps_used,
            self.time_used,
            self.success,
            self.adversary
        )
    }
}

/// Plays until the target is entered or the time budget runs out.
pub fn measure_reach(
    start: Vec2,
    target: Target,
    s1: &StrategyI,
    s2: &StrategyII,
    params: &GameParams,
    budget: f64,
) -> Result<(ReachReport, Trajectory)> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::invalid(
            "trajectory",
            "budget",
            format!("must be finite and >= 0, got {budget}"),
        ));
    }
    let mut p = *params;
    p.n_steps = (budget / (p.tau * p.tau)).floor() as usize;
    let traj = run(start, s1, s2, &p, |x| target.contains(x))?;
    let end = traj.last();
    Ok((
        ReachReport {
            start,
            target,
            end,
            steps_used: traj.steps(),
            time_used: traj.time(),
            success: target.contains(end),
            adversary: s2.label(),
        },
        traj,
    ))
}

/// Largest `(H(x_{n+1}) - H(x_n) + |DH(x_n)|τ²)/τ³` over the steps where
/// `H(x_n) > floor`; the constant `K` of the descent domination bound.
pub fn descent_defect(traj: &Trajectory, floor: f64) -> f64 {
    let t2 = traj.tau * traj.tau;
    traj.points
        .windows(2)
        .filter(|w| stream(w[0]) > floor)
        .map(|w| (stream(w[1]) - stream(w[0]) + stream_gradient(w[0]).norm() * t2) / (t2 * traj.tau))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest excess `H(x_n) - s(nτ²)` of the level sequence over the ODE
/// envelope, while the ODE is above `floor`.
pub fn ode_envelope_excess(traj: &Trajectory, floor: f64) -> Result<f64> {
    let s0 = stream(traj.points[0]);
    let t2 = traj.tau * traj.tau;
    let mut worst = f64::NEG_INFINITY;
    for (n, x) in traj.points.iter().enumerate() {
        let s = descent_level_ode(s0, n as f64 * t2)?;
        if s <= floor {
            break;
        }
        worst = worst.max(stream(*x) - s);
    }
    Ok(worst)
}

/// Least-squares fit `T = a + b·|log μ|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLawFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    /// Smallest `C` with `T(μ) ≤ C(|log μ| + 1)` for every sample.
    pub c_bound: f64,
}

pub fn fit_log_law(mus: &[f64], times: &[f64]) -> Result<LogLawFit> {
    if mus.len() != times.len() || mus.len() < 2 {
        return Err(Error::invalid(
            "trajectory",
            "samples",
            "need at least two (μ, T) pairs",
        ));
    }
    let xs: Vec<f64> = mus.iter().map(|m| m.ln().abs()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = times.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(times).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = times.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("trajectory", "samples", "all μ are equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(times)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    let c_bound = xs.iter().zip(times).map(|(x, y)| y / (x + 1.0)).fold(0.0, f64::max);
    Ok(LogLawFit {
        intercept,
        slope,
        r_squared,
        c_bound,
    })
}

/// Per-step displacement audit along `axis` against [`StrategyII::OpposeAxis`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingReport {
    /// Largest single-step displacement along the axis, per unit time.
    pub max_rate: f64,
    /// Net displacement along the axis over the run, per unit time.
    pub mean_rate: f64,
    /// `1 + max|V|`
    pub speed_bound: f64,
    pub steps: usize,
}

/// Player I plays `s1` against the adversary opposing progress along
/// `axis` for `params.n_steps` moves from `start`.
pub fn crossing_defense(start: Vec2, axis: Vec2, s1: &StrategyI, params: &GameParams) -> Result<CrossingReport> {
    let axis = axis
        .normalized()
        .ok_or_else(|| Error::invalid("trajectory", "axis", "must be nonzero"))?;
    let traj = run(start, s1, &StrategyII::OpposeAxis { axis }, params, |_| false)?;
    let t2 = params.tau * params.tau;
    let max_rate = traj
        .points
        .windows(2)
        .map(|w| (w[1] - w[0]).dot(axis) / t2)
        .fold(f64::NEG_INFINITY, f64::max);
    let mean_rate = if traj.steps() == 0 {
        0.0
    } else {
        (traj.last() - start).dot(axis) / traj.time()
    };
    Ok(CrossingReport {
        max_rate,
        mean_rate,
        speed_bound: 1.0 + params.flow.max_speed(),
        steps: traj.steps(),
    })
}

/// Largest `|x_n - x₀| / (√t_n + t_n)` along a trajectory.
pub fn dependence_constant(traj: &Trajectory) -> f64 {
    let x0 = traj.points[0];
    let t2 = traj.tau * traj.tau;
    traj.points
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, x)| {
            let t = n as f64 * t2;
            (*x - x0).norm() / (t.sqrt() + t)
        })
        .fold(0.0, f64::max)
}

/// Phases moving a point of `U₁` into the neighbouring cell across the edge
/// `x₁ = 0` (to `U₂`), `x₂ = 0` (to `U₃`), or both in turn (to `U₄`).
///
/// Each crossing descends to the band `|H| ≤ band`, rides the flow to the
/// half of the shared edge where `-V` points away from it on the far side,
/// and then pushes straight across.
pub fn cell_transition_strategy(to: usize, band: f64) -> Result<StrategyI> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let left_edge = Switch::InBox {
        lo: Vec2::new(0.0, 0.15),
        hi: Vec2::new(0.6, FRAC_PI_2 - 0.15),
    };
    let bottom_edge_right = Switch::InBox {
        lo: Vec2::new(FRAC_PI_2 + 0.15, 0.0),
        hi: Vec2::new(PI - 0.15, 0.6),
    };
    let bottom_edge_left = Switch::InBox {
        lo: Vec2::new(-PI + 0.15, 0.0),
        hi: Vec2::new(-FRAC_PI_2 - 0.15, 0.6),
    };
    let cell = |i| Switch::Enter(Target::Region(CellRegion::cell(i)));
    let push = |x: f64, y: f64| StrategyI::AxisPush {
        direction: Vec2::new(x, y),
    };
    let phases = match to {
        2 => vec![
            (StrategyI::Descent, Switch::AbsLevelBelow(band)),
            (StrategyI::FollowFlow, left_edge),
            (push(-1.0, 0.0), cell(2)),
            (StrategyI::FollowFlow, Switch::Never),
        ],
        3 => vec![
            (StrategyI::Descent, Switch::AbsLevelBelow(band)),
            (StrategyI::FollowFlow, bottom_edge_right),
            (push(0.0, -1.0), cell(3)),
            (StrategyI::FollowFlow, Switch::Never),
        ],
        4 => vec![
            (StrategyI::Descent, Switch::AbsLevelBelow(band)),
            (StrategyI::FollowFlow, left_edge),
            (push(-1.0, 0.0), cell(2)),
            (StrategyI::FollowFlow, bottom_edge_left),
            (push(0.0, -1.0), cell(4)),
            (StrategyI::FollowFlow, Switch::Never),
        ],
        _ => return Err(Error::invalid("trajectory", "to", "target cell must be 2, 3 or 4")),
    };
    Ok(StrategyI::Composite(phases))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowfield::CellularFlow;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params(tau: f64, d: f64, a: f64, n: usize) -> GameParams {
        GameParams::new(tau, d, n, CellularFlow::new(a).unwrap()).unwrap()
    }

    /// RK4 for `ξ' = -V(ξ)`.
    fn flow_rk4(flow: &CellularFlow, x0: Vec2, t: f64, n: usize) -> Vec2 {
        let h = t / n as f64;
        let f = |x: Vec2| -flow.velocity(x);
        let mut x = x0;
        for _ in 0..n {
            let k1 = f(x);
            let k2 = f(x + k1 * (0.5 * h));
            let k3 = f(x + k2 * (0.5 * h));
            let k4 = f(x + k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        x
    }

    #[test]
    fn follow_flow_tracks_level_set() {
        let tau = 0.02;
        let g = params(tau, 0.3, 1.0, (8.0 / (tau * tau)) as usize);
        let x0 = Vec2::new(FRAC_PI_2, PI / 4.0);
        let tr = run(x0, &StrategyI::FollowFlow, &StrategyII::Fixed(Sign::Plus), &g, |_| {
            false
        })
        .unwrap();
        let h0 = stream(x0);
        let drift = tr.points.iter().map(|x| (stream(*x) - h0).abs()).fold(0.0, f64::max);
        assert!(drift < 2.0 * tau, "level drift {drift}");
        let oracle = flow_rk4(&g.flow, x0, tr.time(), 20_000);
        assert!((tr.last() - oracle).norm() < 5.0 * tau);
    }

    #[test]
    fn follow_flow_converges_under_refinement() {
        let x0 = Vec2::new(1.0, 0.7);
        let t = 2.0;
        let flow = CellularFlow::new(1.0).unwrap();
        let oracle = flow_rk4(&flow, x0, t, 20_000);
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&tau| {
                let g = GameParams::for_duration(tau, 0.2, t, flow).unwrap();
                let tr = run(x0, &StrategyI::FollowFlow, &StrategyII::MaxSign, &g, |_| false).unwrap();
                (tr.last() - oracle).norm()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn descent_decreases_level() {
        let tau = 0.005;
        let g = params(tau, 0.5, 1.0, (3.0 / (tau * tau)) as usize);
        // H(x0) = 0.9 on the diagonal
        let s = 0.9f64.sqrt().asin();
        let x0 = Vec2::new(s, s);
        let floor = 0.05;
        let tr = run(x0, &StrategyI::Descent, &StrategyII::MaxSign, &g, |x| {
            stream(x) <= floor
        })
        .unwrap();
        assert!(stream(tr.last()) <= floor);
        for w in tr.points.windows(2) {
            assert!(stream(w[1]) < stream(w[0]));
        }
    }

    #[test]
    fn ode_closed_form() {
        assert_eq!(descent_level_ode(1.0, 0.0).unwrap(), 1.0);
        assert!(descent_level_ode(1.0, PI / 2f64.sqrt()).unwrap() < 1e-30);
        assert!(descent_level_ode(0.0, 1.0).is_err());
        assert!(descent_level_ode(1.5, 1.0).is_err());
        // RK4 on ṡ = -√(2s(1-s))
        let f = |s: f64| -(2.0 * s * (1.0 - s)).max(0.0).sqrt();
        let (mut s, n) = (0.5, 10_000);
        let h = 0.1 / n as f64;
        for _ in 0..n {
            let k1 = f(s);
            let k2 = f(s + 0.5 * h * k1);
            let k3 = f(s + 0.5 * h * k2);
            let k4 = f(s + h * k3);
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let closed = descent_level_ode(0.5, 0.1).unwrap();
        assert!((closed - s).abs() < 1e-12, "{closed} vs {s}");
        assert!((closed - 0.429_524_8).abs() < 1e-6);
        assert!((descent_ode_time(0.5, closed) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn immediate_success_at_target() {
        let g = params(0.05, 0.2, 1.0, 100);
        let c = Vec2::new(FRAC_PI_2, FRAC_PI_2);
        let target = Target::Ball {
            center: c,
            radius: 5.0 * g.tau,
        };
        let (rep, tr) = measure_reach(c, target, &StrategyI::FollowFlow, &StrategyII::MaxSign, &g, 1.0).unwrap();
        assert!(rep.success);
        assert_eq!(rep.steps_used, 0);
        assert_eq!(tr.points.len(), 1);
    }

    #[test]
    fn descent_falls_back_at_stagnation() {
        let g = params(0.05, 0.2, 1.0, 4000);
        let c = Vec2::new(FRAC_PI_2, FRAC_PI_2);
        let r = stagnation_exit_radius(c, &g);
        assert!(r > 0.0 && r <= 0.25);
        let tr = run(c, &StrategyI::Descent, &StrategyII::MaxSign, &g, |x| stream(x) < 0.5).unwrap();
        assert_eq!(tr.meta.fallbacks, vec![0]);
        assert!(stream(tr.last()) < 0.5);
        for (eta, _) in &tr.controls {
            assert!(eta.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let g = params(0.03, 0.2, 2.0, 2000);
        let s = cell_transition_strategy(4, 0.05).unwrap();
        let adv = StrategyII::WorstCaseEnum(Objective::DistanceTo(Target::Region(CellRegion::cell(4))));
        let a = run(Vec2::new(1.9, 1.2), &s, &adv, &g, |_| false).unwrap();
        let b = run(Vec2::new(1.9, 1.2), &s, &adv, &g, |_| false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oppose_axis_caps_progress() {
        for a in [0.0, 2.0] {
            let g = params(0.05, 0.3, a, 400);
            for s in [
                StrategyI::AxisPush {
                    direction: Vec2::new(1.0, 0.0),
                },
                StrategyI::Exit {
                    center: Vec2::new(-1.0, 0.3),
                    outward: true,
                },
                StrategyI::Descent,
            ] {
                let rep = crossing_defense(Vec2::new(0.4, 1.0), Vec2::new(1.0, 0.0), &s, &g).unwrap();
                assert!(rep.max_rate <= rep.speed_bound + 1e-9, "{rep:?}");
            }
        }
        // η⊥ horizontal: the sign cannot touch horizontal progress
        let g = params(0.05, 0.3, 0.0, 100);
        let rep = crossing_defense(
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            &StrategyI::AxisPush {
                direction: Vec2::new(1.0, 0.0),
            },
            &g,
        )
        .unwrap();
        assert!((rep.mean_rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_fit() {
        let mus = [0.3, 0.1, 0.03, 0.01];
        let times: Vec<f64> = mus.iter().map(|m: &f64| 0.5 + 0.25 * m.ln().abs()).collect();
        let fit = fit_log_law(&mus, &times).unwrap();
        assert!((fit.slope - 0.25).abs() < 1e-12);
        assert!((fit.intercept - 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_log_law(&[0.1], &[1.0]).is_err());
    }

    #[test]
    fn csv_rows() {
        let g = params(0.1, 0.2, 1.0, 2);
        let tr = run(
            Vec2::new(1.0, 1.0),
            &StrategyI::Descent,
            &StrategyII::MaxSign,
            &g,
            |_| false,
        )
        .unwrap();
        let mut out = Vec::new();
        tr.write_csv(&mut out, &[]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "step,x1,x2,eta1,eta2,b,H");
        assert!(lines[3].starts_with("2,") && lines[3].contains(",,,,"));
    }
}
