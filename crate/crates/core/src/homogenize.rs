//! Estimators of the effective burning velocity `H̄_A(p)` and the checks
//! built on them.

use crate::error::{Error, Result};
use crate::flowfield::CellularFlow;
use crate::game::{self, GameParams};
use crate::geom::Vec2;
use crate::levelset::{self, Checkpoint, CorrectorState, DiscountedConfig};
use crate::par;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    FrontSpeed,
    Discounted,
    Game,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::FrontSpeed => "front_speed",
            Method::Discounted => "discounted",
            Method::Game => "game",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Discretization {
    FrontSpeed {
        grid: usize,
        dt: f64,
        t_final: f64,
        burn_in: f64,
    },
    Discounted {
        grid: usize,
        lambdas: Vec<f64>,
        tol: f64,
    },
    Game {
        grid: usize,
        tau: f64,
        n_steps: usize,
        burn_in_steps: usize,
        n_angles: usize,
        n_radii: usize,
    },
}

impl Discretization {
    pub fn grid(&self) -> usize {
        match self {
            Discretization::FrontSpeed { grid, .. }
            | Discretization::Discounted { grid, .. }
            | Discretization::Game { grid, .. } => *grid,
        }
    }
}

impl fmt::Display for Discretization {
    /// `key=value` pairs separated by `;`, safe inside a CSV field.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discretization::FrontSpeed {
                dt, t_final, burn_in, ..
            } => {
                write!(f, "dt={dt};T={t_final};burn_in={burn_in}")
            }
            Discretization::Discounted { lambdas, tol, .. } => {
                let l: Vec<String> = lambdas.iter().map(|l| l.to_string()).collect();
                write!(f, "lambda={};tol={tol}", l.join("/"))
            }
            Discretization::Game {
                tau,
                n_steps,
                burn_in_steps,
                n_angles,
                n_radii,
                ..
            } => write!(
                f,
                "tau={tau};N={n_steps};burn_in_steps={burn_in_steps};n_angles={n_angles};n_radii={n_radii}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbarEstimate {
    pub p: Vec2,
    pub amplitude: f64,
    pub d: f64,
    pub method: Method,
    pub value: f64,
    pub discretization: Discretization,
    pub error_indicator: f64,
}

impl HbarEstimate {
    /// Positive estimates are valid for `p ≠ 0`; `p = 0` must give zero.
    pub fn is_valid(&self) -> bool {
        self.value.is_finite()
            && if self.p.norm() > 0.0 {
                self.value > 0.0
            } else {
                self.value == 0.0
            }
    }
}

pub const SWEEP_CSV_HEADER: &str = "p1,p2,A,d,method,hbar,err,grid,discretization";

pub fn write_sweep_csv<W: std::io::Write>(mut out: W, rows: &[HbarEstimate], provenance: &[String]) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for line in provenance {
        writeln!(out, "# {line}")?;
    }
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.p.x,
            r.p.y,
            r.amplitude,
            r.d,
            r.method,
            r.value,
            r.error_indicator,
            r.discretization.grid(),
            r.discretization
        )?;
    }
    Ok(())
}

/// Front-speed run: the estimate plus the checkpoints it was computed from.
#[derive(Debug, Clone)]
pub struct FrontSpeedRun {
    pub estimate: HbarEstimate,
    pub checkpoints: Vec<Checkpoint>,
}

impl FrontSpeedRun {
    /// Oscillation of `w` at the checkpoint closest to time `t`.
    pub fn oscillation_at(&self, t: f64) -> f64 {
        self.checkpoints
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(Checkpoint::oscillation)
            .unwrap_or(f64::NAN)
    }
}

/// Slope of the mean corrector between `burn_in` and `t_final`, evolving
/// from `w ≡ 0` on an `n × n` grid with unit-time checkpoints.
pub fn hbar_front_speed(
    p: Vec2,
    flow: CellularFlow,
    d: f64,
    n: usize,
    t_final: f64,
    burn_in: f64,
) -> Result<FrontSpeedRun> {
    if !(burn_in >= 0.0 && t_final > burn_in && t_final.is_finite()) {
        return Err(Error::invalid(
            "homogenize",
            "T",
            format!("need T > burn_in >= 0, got T = {t_final}, burn_in = {burn_in}"),
        ));
    }
    let start = CorrectorState::flat(n, p, d, flow)?;
    let (warm, mut checkpoints) = start.evolve(burn_in, 1.0)?;
    let (end, tail) = warm.evolve(t_final - burn_in, 1.0)?;
    let at_burn = checkpoints.pop().expect("evolve records the final state");
    checkpoints.extend(tail);
    let value = -(end.w.mean() - at_burn.mean_w) / (t_final - burn_in);
    let error_indicator = checkpoints
        .iter()
        .filter(|c| c.t >= burn_in)
        .map(Checkpoint::oscillation)
        .fold(0.0, f64::max);
    Ok(FrontSpeedRun {
        estimate: HbarEstimate {
            p,
            amplitude: flow.amplitude(),
            d,
            method: Method::FrontSpeed,
            value,
            discretization: Discretization::FrontSpeed {
                grid: n,
                dt: start.max_stable_dt(),
                t_final,
                burn_in,
            },
            error_indicator,
        },
        checkpoints,
    })
}

/// Summary of one discounted solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedLevel {
    pub lambda: f64,
    pub mean_scaled: f64,
    pub max_abs_scaled: f64,
    pub oscillation_scaled: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct DiscountedRun {
    pub estimate: HbarEstimate,
    pub levels: Vec<DiscountedLevel>,
}

/// `-mean(λv_λ)` at the smallest `λ`; the error indicator adds the spread
/// over the list to the spatial oscillation at the smallest `λ`.
pub fn hbar_discounted(
    p: Vec2,
    flow: CellularFlow,
    d: f64,
    lambdas: &[f64],
    n: usize,
    config: DiscountedConfig,
) -> Result<DiscountedRun> {
    if lambdas.is_empty() {
        return Err(Error::invalid("homogenize", "lambda", "empty list"));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid(
            "homogenize",
            "lambda",
            "values must be strictly decreasing",
        ));
    }
    let solved = par::map_jobs(lambdas, |&lambda| {
        levelset::solve_discounted(p, d, flow, lambda, n, config)
    });
    let mut levels = Vec::with_capacity(lambdas.len());
    for s in solved {
        let s = s?;
        let lv = s.scaled();
        levels.push(DiscountedLevel {
            lambda: s.lambda,
            mean_scaled: lv.mean(),
            max_abs_scaled: lv.max_abs(),
            oscillation_scaled: lv.oscillation(),
            iterations: s.iterations,
            residual: s.residual,
        });
    }
    let last = *levels.last().expect("non-empty");
    let means = levels.iter().map(|l| l.mean_scaled);
    let spread = means.clone().fold(f64::NEG_INFINITY, f64::max) - means.fold(f64::INFINITY, f64::min);
    Ok(DiscountedRun {
        estimate: HbarEstimate {
            p,
            amplitude: flow.amplitude(),
            d,
            method: Method::Discounted,
            value: -last.mean_scaled,
            discretization: Discretization::Discounted {
                grid: n,
                lambdas: lambdas.to_vec(),
                tol: config.tol,
            },
            error_indicator: spread + last.oscillation_scaled,
        },
        levels,
    })
}

/// Game estimate from the slope of the mean periodic value between sweep
/// `burn_in_steps` and the last sweep.
pub fn hbar_game(p: Vec2, params: &GameParams, n: usize, burn_in_steps: usize) -> Result<HbarEstimate> {
    if burn_in_steps >= params.n_steps {
        return Err(Error::invalid(
            "homogenize",
            "burn_in_steps",
            format!("must be below n_steps = {}", params.n_steps),
        ));
    }
    let mut at_burn = 0.0;
    let value = game::dp_backward_with(p, params, n, n, |v| {
        if v.k == burn_in_steps {
            at_burn = v.base.mean();
        }
    })?;
    let t2 = params.tau * params.tau;
    let slope = -(value.base.mean() - at_burn) / ((params.n_steps - burn_in_steps) as f64 * t2);
    Ok(HbarEstimate {
        p,
        amplitude: params.flow.amplitude(),
        d: params.d,
        method: Method::Game,
        value: slope,
        discretization: Discretization::Game {
            grid: n,
            tau: params.tau,
            n_steps: params.n_steps,
            burn_in_steps,
            n_angles: params.n_angles,
            n_radii: params.n_radii,
        },
        error_indicator: value.base.oscillation(),
    })
}

/// Resolution knobs shared by sweeps and probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontSpeedSettings {
    pub grid: usize,
    pub t_final: f64,
    pub burn_in: f64,
}

impl Default for FrontSpeedSettings {
    fn default() -> Self {
        FrontSpeedSettings {
            grid: 128,
            t_final: 40.0,
            burn_in: 10.0,
        }
    }
}

/// Front-speed estimates for every amplitude, run as independent jobs.
pub fn sweep(p: Vec2, d: f64, amplitudes: &[f64], settings: FrontSpeedSettings) -> Result<Vec<HbarEstimate>> {
    if amplitudes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "homogenize",
            "A",
            "amplitudes must be strictly increasing",
        ));
    }
    let runs = par::map_jobs(amplitudes, |&a| {
        let flow = CellularFlow::new(a)?;
        hbar_front_speed(p, flow, d, settings.grid, settings.t_final, settings.burn_in).map(|r| r.estimate)
    });
    runs.into_iter().collect()
}

/// Shape fit of `H̄ = Aπ(|p₁|+|p₂|)/(2 log A + C)` over a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    /// Per-row `C = Aπ(|p₁|+|p₂|)/H̄ - 2 log A`.
    pub constants: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    /// `H̄·(2 log A)/(Aπ(|p₁|+|p₂|))` per row.
    pub normalized: Vec<f64>,
    /// Largest relative misfit of the single-constant law with the mean `C`.
    pub residual: f64,
}

impl GrowthFit {
    /// Every row lies in the bracket, i.e. all denominators `2 log A + C_i`
    /// are positive and the constants are ordered.
    pub fn is_bracketed(&self, rows: &[HbarEstimate]) -> bool {
        self.c1 <= self.c2
            && rows
                .iter()
                .all(|r| 2.0 * r.amplitude.ln() + self.c1 > 0.0 && 2.0 * r.amplitude.ln() + self.c2 > 0.0)
    }
}

pub fn growth_law_fit(rows: &[HbarEstimate]) -> Result<GrowthFit> {
    if rows.is_empty() {
        return Err(Error::invalid("homogenize", "rows", "empty sweep"));
    }
    let mut constants = Vec::new();
    let mut normalized = Vec::new();
    for r in rows {
        if !(r.amplitude > 1.0 && r.value > 0.0) {
            return Err(Error::invalid(
                "homogenize",
                "rows",
                format!(
                    "growth law needs A > 1 and H̄ > 0 (A = {}, H̄ = {})",
                    r.amplitude, r.value
                ),
            ));
        }
        let scale = r.amplitude * std::f64::consts::PI * (r.p.x.abs() + r.p.y.abs());
        constants.push(scale / r.value - 2.0 * r.amplitude.ln());
        normalized.push(r.value * 2.0 * r.amplitude.ln() / scale);
    }
    let c1 = constants.iter().copied().fold(f64::INFINITY, f64::min);
    let c2 = constants.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c_mean = constants.iter().sum::<f64>() / constants.len() as f64;
    let residual = rows
        .iter()
        .map(|r| {
            let scale = r.amplitude * std::f64::consts::PI * (r.p.x.abs() + r.p.y.abs());
            let fit = scale / (2.0 * r.amplitude.ln() + c_mean);
            ((fit - r.value) / r.value).abs()
        })
        .fold(0.0, f64::max);
    Ok(GrowthFit {
        constants,
        c1,
        c2,
        normalized,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub values: Vec<f64>,
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub median_gap: f64,
    /// Indices `k` with `gaps[k] > 3 × median`.
    pub jumps: Vec<usize>,
}

/// Differences of `estimate(p)` between consecutive directions.
pub fn continuity_probe(
    directions: &[Vec2],
    estimate: impl Fn(Vec2) -> Result<f64> + Sync,
) -> Result<ContinuityReport> {
    let values: Vec<f64> = par::map_jobs(directions, |&p| estimate(p))
        .into_iter()
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let median_gap = if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    };
    let max_gap = sorted.last().copied().unwrap_or(0.0);
    let jumps = gaps
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > 3.0 * median_gap && g > 0.0)
        .map(|(k, _)| k)
        .collect();
    Ok(ContinuityReport {
        values,
        gaps,
        max_gap,
        median_gap,
        jumps,
    })
}

/// `n` unit vectors at angles `start + k·span/(n-1)`.
pub fn directions_on_arc(start: f64, span: f64, n: usize) -> Vec<Vec2> {
    match n {
        0 => Vec::new(),
        1 => vec![Vec2::from_angle(start)],
        _ => (0..n)
            .map(|k| Vec2::from_angle(start + span * k as f64 / (n - 1) as f64))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laminar_front_speed() {
        for d in [0.0, 0.2] {
            let r = hbar_front_speed(Vec2::new(1.0, 0.0), CellularFlow::quiescent(), d, 32, 2.0, 1.0).unwrap();
            assert!((r.estimate.value - 1.0).abs() < 1e-6, "d = {d}: {}", r.estimate.value);
            assert!(r.estimate.is_valid());
        }
        let diag = Vec2::new(0.6, 0.8);
        let r = hbar_front_speed(diag, CellularFlow::quiescent(), 0.0, 32, 2.0, 1.0).unwrap();
        assert!((r.estimate.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn laminar_discounted() {
        let run = hbar_discounted(
            Vec2::new(0.0, 1.0),
            CellularFlow::quiescent(),
            0.0,
            &[0.2, 0.1],
            16,
            DiscountedConfig {
                tol: 1e-9,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((run.estimate.value - 1.0).abs() < 1e-6);
        assert!(run.estimate.error_indicator < 1e-6);
        assert!(hbar_discounted(
            Vec2::new(0.0, 1.0),
            CellularFlow::quiescent(),
            0.0,
            &[0.1, 0.2],
            16,
            Default::default()
        )
        .is_err());
    }

    #[test]
    fn laminar_game() {
        let g = GameParams::for_duration(0.2, 0.0, 2.0, CellularFlow::quiescent()).unwrap();
        let e = hbar_game(Vec2::new(1.0, 0.0), &g, 16, 10).unwrap();
        assert!((e.value - 1.0).abs() < 0.02, "{}", e.value);
        assert!(hbar_game(Vec2::new(1.0, 0.0), &g, 16, g.n_steps).is_err());
    }

    #[test]
    fn growth_fit_recovers_constant() {
        let rows: Vec<HbarEstimate> = [4.0f64, 8.0, 16.0]
            .iter()
            .map(|&a| HbarEstimate {
                p: Vec2::new(1.0, 0.0),
                amplitude: a,
                d: 0.0,
                method: Method::FrontSpeed,
                value: a * std::f64::consts::PI / (2.0 * a.ln() + 1.5),
                discretization: Discretization::FrontSpeed {
                    grid: 16,
                    dt: 0.1,
                    t_final: 1.0,
                    burn_in: 0.0,
                },
                error_indicator: 0.0,
            })
            .collect();
        let fit = growth_law_fit(&rows).unwrap();
        for c in &fit.constants {
            assert!((c - 1.5).abs() < 1e-12);
        }
        assert!(fit.residual < 1e-12);
        assert!(fit.is_bracketed(&rows));
    }

    #[test]
    fn continuity_flags_jumps() {
        let dirs = directions_on_arc(0.0, 1.0, 6);
        let rep = continuity_probe(&dirs, |p| Ok(if p.y > 0.7 { 2.0 } else { 1.0 + 0.01 * p.y })).unwrap();
        assert_eq!(rep.jumps.len(), 1);
        let flat = continuity_probe(&dirs, |_| Ok(1.0)).unwrap();
        assert_eq!(flat.max_gap, 0.0);
        assert!(flat.jumps.is_empty());
    }

    #[test]
    fn sweep_csv_layout() {
        let run = hbar_front_speed(Vec2::new(1.0, 0.0), CellularFlow::quiescent(), 0.0, 16, 1.0, 0.5).unwrap();
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &[run.estimate], &["seedless".into()]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines[1], "# seedless");
        assert!(lines[2].starts_with("1,0,0,0,front_speed,"));
        assert_eq!(lines[2].split(',').count(), 9);
    }
}
