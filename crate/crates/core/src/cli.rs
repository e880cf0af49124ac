//! Batch runs driven by flat `key=value` config files.
//!
//! Every command has a fixed set of keys; unknown keys, keys that belong to
//! another command and missing required keys are rejected with the offending
//! line number. Outputs are CSV files (header row, then `#` provenance lines
//! echoing the effective config, then data) and optional GFLM snapshots.

use crate::error::{Error, Result};
use crate::flowfield::{CellRegion, CellularFlow};
use crate::game::{self, GameParams, Sign};
use crate::homogenize::{self, FrontSpeedSettings, HbarEstimate};
use crate::levelset::{self, CorrectorState, DiscountedConfig};
use crate::supersolution::{self, SupersolutionParams};
use crate::trajectory::{self, Objective, StrategyI, StrategyII, Target};
use crate::Vec2;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Evolve,
    Hbar,
    Game,
    Trajectory,
    Sweep,
    AppendixCheck,
}

impl Command {
    const ALL: [Command; 6] = [
        Command::Evolve,
        Command::Hbar,
        Command::Game,
        Command::Trajectory,
        Command::Sweep,
        Command::AppendixCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Hbar => "hbar",
            Command::Game => "game",
            Command::Trajectory => "trajectory",
            Command::Sweep => "sweep",
            Command::AppendixCheck => "appendix-check",
        }
    }

    fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// Any finite real.
    Real,
    NonNeg,
    Pos,
    /// Integer at least the given bound.
    Count(usize),
    /// Comma-separated list of positive reals.
    PosList,
    /// Comma-separated list of reals in `(0, 1)`.
    UnitList,
    Word(&'static [&'static str]),
    /// Comma-separated subset of the given words.
    Words(&'static [&'static str]),
    Path,
}

#[derive(Debug, Clone, Copy)]
enum Need {
    Required,
    Default(&'static str),
    Optional,
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    need: Need,
    commands: &'static [Command],
}

use Command::*;

const PHYSICAL: &[Command] = &[Evolve, Hbar, Game, Trajectory, Sweep, AppendixCheck];
const METHODS: &[&str] = &["front_speed", "discounted", "game"];
const STRATEGIES_I: &[&str] = &["descent", "follow_flow", "cell2", "cell3", "cell4"];
const STRATEGIES_II: &[&str] = &[
    "max_sign",
    "min_sign",
    "plus",
    "minus",
    "worst_abs_level",
    "worst_distance",
];

macro_rules! key {
    ($name:literal, $kind:expr, $need:expr, $cmds:expr) => {
        KeySpec {
            name: $name,
            kind: $kind,
            need: $need,
            commands: $cmds,
        }
    };
}

// Order here is the order of --print-config and of the provenance lines.
const KEYS: &[KeySpec] = &[
    key!(
        "A",
        Kind::NonNeg,
        Need::Required,
        &[Evolve, Hbar, Game, Trajectory, AppendixCheck]
    ),
    key!("A", Kind::PosList, Need::Required, &[Sweep]),
    key!("d", Kind::NonNeg, Need::Required, PHYSICAL),
    key!("p1", Kind::Real, Need::Required, &[Evolve, Hbar, Game, Sweep]),
    key!("p2", Kind::Real, Need::Required, &[Evolve, Hbar, Game, Sweep]),
    key!(
        "grid",
        Kind::Count(levelset::MIN_SOLVER_NODES),
        Need::Default("128"),
        &[Evolve, Hbar, Sweep, AppendixCheck]
    ),
    key!("grid", Kind::Count(8), Need::Default("64"), &[Game]),
    key!("T", Kind::Pos, Need::Required, &[Evolve]),
    key!("T", Kind::Pos, Need::Default("40"), &[Hbar, Sweep]),
    key!("T", Kind::Pos, Need::Default("16"), &[Game]),
    key!("T", Kind::Pos, Need::Default("10"), &[Trajectory]),
    key!("every", Kind::Pos, Need::Default("1"), &[Evolve]),
    key!(
        "init",
        Kind::Word(&["flat", "circle"]),
        Need::Default("flat"),
        &[Evolve]
    ),
    key!("radius", Kind::Pos, Need::Default("1"), &[Evolve]),
    key!("eps", Kind::Pos, Need::Optional, &[Evolve]),
    key!("burn_in", Kind::NonNeg, Need::Default("10"), &[Hbar, Sweep]),
    key!(
        "methods",
        Kind::Words(METHODS),
        Need::Default("front_speed,discounted,game"),
        &[Hbar]
    ),
    key!("lambda", Kind::PosList, Need::Default("0.2,0.1,0.05"), &[Hbar]),
    key!("tol", Kind::Pos, Need::Default("1e-6"), &[Hbar]),
    key!("max_iter", Kind::Count(1), Need::Default("5000000"), &[Hbar]),
    key!("tau", Kind::Pos, Need::Default("0.3"), &[Hbar, Game]),
    key!("tau", Kind::Pos, Need::Default("0.01"), &[Trajectory]),
    key!("n_angles", Kind::Count(8), Need::Default("128"), &[Hbar]),
    key!("n_angles", Kind::Count(8), Need::Default("64"), &[Game]),
    key!("n_radii", Kind::Count(2), Need::Default("3"), &[Hbar, Game]),
    key!("game_grid", Kind::Count(8), Need::Default("64"), &[Hbar]),
    key!("game_T", Kind::Pos, Need::Default("16"), &[Hbar]),
    key!("x1", Kind::Real, Need::Required, &[Trajectory]),
    key!("x2", Kind::Real, Need::Required, &[Trajectory]),
    key!(
        "strategy_i",
        Kind::Word(STRATEGIES_I),
        Need::Default("descent"),
        &[Trajectory]
    ),
    key!(
        "strategy_ii",
        Kind::Word(STRATEGIES_II),
        Need::Default("max_sign"),
        &[Trajectory]
    ),
    key!("mu", Kind::Pos, Need::Default("0.01"), &[Trajectory]),
    key!("band", Kind::Pos, Need::Default("0.05"), &[Trajectory]),
    key!("delta", Kind::Pos, Need::Default("0.4"), &[AppendixCheck]),
    key!("theta", Kind::UnitList, Need::Default("0.4,0.5,0.6"), &[AppendixCheck]),
    key!("n_phi", Kind::Count(1), Need::Default("512"), &[AppendixCheck]),
    key!("n_t", Kind::Count(2), Need::Default("64"), &[AppendixCheck]),
    key!("out", Kind::Path, Need::Optional, PHYSICAL),
    key!("snapshot", Kind::Path, Need::Optional, &[Evolve, Hbar, Game]),
];

fn spec_for(name: &str, command: Command) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name && k.commands.contains(&command))
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Count(usize),
    List(Vec<f64>),
    Word(String),
    Words(Vec<String>),
    Path(PathBuf),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Count(n) => write!(f, "{n}"),
            Value::List(v) => f.write_str(&join(v)),
            Value::Word(w) => f.write_str(w),
            Value::Words(w) => f.write_str(&w.join(",")),
            Value::Path(p) => write!(f, "{}", p.display()),
        }
    }
}

fn parse_value(kind: Kind, name: &str, raw: &str) -> std::result::Result<Value, String> {
    let real = |s: &str| -> std::result::Result<f64, String> {
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("{name}: malformed number {s:?}"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("{name}: must be finite, got {s}"))
        }
    };
    let list = |pred: fn(f64) -> bool, rule: &str| -> std::result::Result<Value, String> {
        let v = raw.split(',').map(real).collect::<std::result::Result<Vec<_>, _>>()?;
        match v.iter().find(|&&x| !pred(x)) {
            Some(x) => Err(format!("{name}: every entry must be {rule}, got {x}")),
            None => Ok(Value::List(v)),
        }
    };
    match kind {
        Kind::Real => real(raw).map(Value::Num),
        Kind::NonNeg => match real(raw)? {
            x if x >= 0.0 => Ok(Value::Num(x)),
            x => Err(format!("{name}: must be >= 0, got {x}")),
        },
        Kind::Pos => match real(raw)? {
            x if x > 0.0 => Ok(Value::Num(x)),
            x => Err(format!("{name}: must be > 0, got {x}")),
        },
        Kind::Count(min) => match raw.parse::<usize>() {
            Ok(n) if n >= min => Ok(Value::Count(n)),
            Ok(n) => Err(format!("{name}: must be >= {min}, got {n}")),
            Err(_) => Err(format!("{name}: malformed integer {raw:?}")),
        },
        Kind::PosList => list(|x| x > 0.0, "> 0"),
        Kind::UnitList => list(|x| x > 0.0 && x < 1.0, "in (0, 1)"),
        Kind::Word(choices) => {
            if choices.contains(&raw) {
                Ok(Value::Word(raw.to_string()))
            } else {
                Err(format!("{name}: expected one of {}, got {raw:?}", choices.join("|")))
            }
        }
        Kind::Words(choices) => {
            let words: Vec<String> = raw.split(',').map(|w| w.trim().to_string()).collect();
            if let Some(w) = words.iter().find(|w| !choices.contains(&w.as_str())) {
                return Err(format!(
                    "{name}: expected entries from {}, got {w:?}",
                    choices.join("|")
                ));
            }
            Ok(Value::Words(words))
        }
        Kind::Path => {
            if raw.is_empty() {
                Err(format!("{name}: empty path"))
            } else {
                Ok(Value::Path(PathBuf::from(raw)))
            }
        }
    }
}

/// A validated config: the command plus every effective key, defaults
/// filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<&'static str, Value>,
}

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// Parses `key=value` lines; `#` starts a comment. Errors carry the 1-based
/// line number (0 when the problem is not tied to a line).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut raw: Vec<(usize, String, String)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_error(lineno, format!("expected key=value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(config_error(lineno, "empty key"));
        }
        if let Some((prev, ..)) = raw.iter().find(|(_, k, _)| k == key) {
            return Err(config_error(
                lineno,
                format!("duplicate key {key} (first on line {prev})"),
            ));
        }
        raw.push((lineno, key.to_string(), value.to_string()));
    }

    let command = match raw.iter().find(|(_, k, _)| k == "command") {
        None => return Err(config_error(0, "missing command")),
        Some((line, _, v)) => match Command::parse(v) {
            Some(c) => c,
            None => {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                return Err(config_error(
                    *line,
                    format!("unknown command {v:?}, expected one of {}", names.join("|")),
                ));
            }
        },
    };

    let mut values = BTreeMap::new();
    for (line, key, value) in raw.iter().filter(|(_, k, _)| k != "command") {
        let spec = match spec_for(key, command) {
            Some(s) => s,
            None if KEYS.iter().any(|k| k.name == key) => {
                return Err(config_error(
                    *line,
                    format!("key {key} does not apply to command {command}"),
                ))
            }
            None => return Err(config_error(*line, format!("unknown key {key}"))),
        };
        let v = parse_value(spec.kind, key, value).map_err(|m| config_error(*line, m))?;
        values.insert(spec.name, v);
    }
    for spec in KEYS.iter().filter(|k| k.commands.contains(&command)) {
        if values.contains_key(spec.name) {
            continue;
        }
        match spec.need {
            Need::Required => return Err(config_error(0, format!("missing required key {}", spec.name))),
            Need::Default(d) => {
                let v = parse_value(spec.kind, spec.name, d).expect("defaults are valid");
                values.insert(spec.name, v);
            }
            Need::Optional => {}
        }
    }
    let cfg = RunConfig { command, values };
    cfg.cross_check()?;
    Ok(cfg)
}

impl RunConfig {
    fn num(&self, key: &str) -> f64 {
        match self.values.get(key) {
            Some(Value::Num(x)) => *x,
            other => panic!("config key {key} is not a number: {other:?}"),
        }
    }

    fn opt_num(&self, key: &str) -> Option<f64> {
        self.values.get(key).map(|_| self.num(key))
    }

    fn count(&self, key: &str) -> usize {
        match self.values.get(key) {
            Some(Value::Count(n)) => *n,
            other => panic!("config key {key} is not a count: {other:?}"),
        }
    }

    fn list(&self, key: &str) -> &[f64] {
        match self.values.get(key) {
            Some(Value::List(v)) => v,
            other => panic!("config key {key} is not a list: {other:?}"),
        }
    }

    fn word(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(Value::Word(w)) => w,
            other => panic!("config key {key} is not a word: {other:?}"),
        }
    }

    fn words(&self, key: &str) -> &[String] {
        match self.values.get(key) {
            Some(Value::Words(w)) => w,
            other => panic!("config key {key} is not a word list: {other:?}"),
        }
    }

    fn path(&self, key: &str) -> Option<&Path> {
        match self.values.get(key) {
            Some(Value::Path(p)) => Some(p),
            _ => None,
        }
    }

    /// Output CSV path; defaults to `<command>.csv`.
    pub fn out_path(&self) -> PathBuf {
        self.path("out")
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(format!("{}.csv", self.command)))
    }

    pub fn snapshot_path(&self) -> Option<&Path> {
        self.path("snapshot")
    }

    fn p(&self) -> Vec2 {
        Vec2::new(self.num("p1"), self.num("p2"))
    }

    fn cross_check(&self) -> Result<()> {
        match self.command {
            Command::Hbar => {
                if self.list("lambda").windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(config_error(0, "lambda: values must be strictly decreasing"));
                }
                if self.num("burn_in") >= self.num("T") {
                    return Err(config_error(0, "burn_in: must be below T"));
                }
            }
            Command::Sweep => {
                if self.list("A").windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(config_error(0, "A: amplitudes must be strictly increasing"));
                }
                if self.num("burn_in") >= self.num("T") {
                    return Err(config_error(0, "burn_in: must be below T"));
                }
            }
            Command::AppendixCheck => {
                if self.num("delta") >= 0.5 {
                    return Err(config_error(0, "delta: must be < 0.5"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Canonical `key=value` text of the effective config; parsing it back
    /// yields the same config.
    pub fn to_text(&self) -> String {
        let mut s = format!("command={}\n", self.command);
        for line in self.provenance_keys() {
            s.push_str(&line);
            s.push('\n');
        }
        s
    }

    fn provenance_keys(&self) -> Vec<String> {
        KEYS.iter()
            .filter(|k| k.commands.contains(&self.command))
            .filter_map(|k| self.values.get(k.name).map(|v| format!("{}={v}", k.name)))
            .collect()
    }

    fn provenance(&self) -> Vec<String> {
        let mut lines = vec![
            format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            format!("command={}", self.command),
        ];
        lines.extend(self.provenance_keys());
        lines
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Short human-readable summary lines.
    pub summary: Vec<String>,
    /// For checks with a pass/fail verdict (`appendix-check`).
    pub check_passed: Option<bool>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn flow(cfg: &RunConfig) -> Result<CellularFlow> {
    CellularFlow::new(cfg.num("A"))
}

/// Runs the configured experiment and writes its artifacts.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Evolve => run_evolve(cfg),
        Command::Hbar => run_hbar(cfg),
        Command::Game => run_game(cfg),
        Command::Trajectory => run_trajectory(cfg),
        Command::Sweep => run_sweep(cfg),
        Command::AppendixCheck => run_appendix(cfg),
    }
}

fn run_evolve(cfg: &RunConfig) -> Result<Outcome> {
    let n = cfg.count("grid");
    let (p, d, flow) = (cfg.p(), cfg.num("d"), flow(cfg)?);
    let w = match cfg.word("init") {
        "circle" => {
            let c = Vec2::new(std::f64::consts::PI, std::f64::consts::PI);
            levelset::circle_level_set(n, c, cfg.num("radius"))?
        }
        _ => crate::Grid2::zeros(n, n)?,
    };
    let mut state = CorrectorState::new(w, p, d, flow)?;
    if let Some(eps) = cfg.opt_num("eps") {
        state = state.with_eps(eps)?;
    }
    let (end, checkpoints) = state.evolve(cfg.num("T"), cfg.num("every"))?;
    let out = cfg.out_path();
    let mut prov = cfg.provenance();
    prov.push(format!("h={} dt={} eps={}", end.w.h(), end.max_stable_dt(), end.eps));
    let mut f = create(&out)?;
    levelset::write_checkpoints_csv(&mut f, &checkpoints, &prov)?;
    f.flush()?;
    let mut files = vec![out];
    if let Some(snap) = cfg.snapshot_path() {
        let mut g = create(snap)?;
        end.w.write_gflm(&mut g)?;
        g.flush()?;
        files.push(snap.to_path_buf());
    }
    let last = checkpoints.last().expect("at least the initial checkpoint");
    Ok(Outcome {
        files,
        summary: vec![format!(
            "t={} mean_w={} osc={}",
            last.t,
            last.mean_w,
            last.oscillation()
        )],
        check_passed: None,
    })
}

fn game_params(cfg: &RunConfig, tau_key: &str, t_key: &str, angles_key: &str) -> Result<GameParams> {
    GameParams::for_duration(cfg.num(tau_key), cfg.num("d"), cfg.num(t_key), flow(cfg)?)?
        .with_controls(cfg.count(angles_key), cfg.count("n_radii"))
}

fn run_hbar(cfg: &RunConfig) -> Result<Outcome> {
    let (p, d, flow) = (cfg.p(), cfg.num("d"), flow(cfg)?);
    let n = cfg.count("grid");
    let mut rows: Vec<HbarEstimate> = Vec::new();
    let mut extra = Vec::new();
    for method in cfg.words("methods") {
        match method.as_str() {
            "front_speed" => {
                let run = homogenize::hbar_front_speed(p, flow, d, n, cfg.num("T"), cfg.num("burn_in"))?;
                rows.push(run.estimate);
            }
            "discounted" => {
                let config = DiscountedConfig {
                    tol: cfg.num("tol"),
                    max_iterations: cfg.count("max_iter"),
                    ..DiscountedConfig::default()
                };
                let run = homogenize::hbar_discounted(p, flow, d, cfg.list("lambda"), n, config)?;
                for l in &run.levels {
                    extra.push(format!(
                        "lambda={} mean_lv={} max_abs_lv={} iterations={}",
                        l.lambda, l.mean_scaled, l.max_abs_scaled, l.iterations
                    ));
                }
                rows.push(run.estimate);
            }
            _ => {
                let params = game_params(cfg, "tau", "game_T", "n_angles")?;
                rows.push(homogenize::hbar_game(
                    p,
                    &params,
                    cfg.count("game_grid"),
                    params.n_steps / 4,
                )?);
            }
        }
    }
    let out = cfg.out_path();
    let mut prov = cfg.provenance();
    prov.extend(extra);
    let mut f = create(&out)?;
    homogenize::write_sweep_csv(&mut f, &rows, &prov)?;
    f.flush()?;
    let mut files = vec![out];
    if let Some(snap) = cfg.snapshot_path() {
        let params = game_params(cfg, "tau", "game_T", "n_angles")?;
        game::dp_backward(p, &params, cfg.count("game_grid"), cfg.count("game_grid"))?.save(snap, params.tau)?;
        files.push(snap.to_path_buf());
    }
    Ok(Outcome {
        files,
        summary: rows.iter().map(|r| format!("{} hbar={}", r.method, r.value)).collect(),
        check_passed: None,
    })
}

fn run_game(cfg: &RunConfig) -> Result<Outcome> {
    let params = game_params(cfg, "tau", "T", "n_angles")?;
    let n = cfg.count("grid");
    let t2 = params.tau * params.tau;
    let mut rows = Vec::with_capacity(params.n_steps);
    let value = game::dp_backward_with(cfg.p(), &params, n, n, |v| {
        rows.push(format!(
            "{},{},{},{},{}",
            v.k,
            v.k as f64 * t2,
            v.base.mean(),
            v.base.min(),
            v.base.max()
        ));
    })?;
    let speed = game::speed_from_value(&value, &params)?;
    let out = cfg.out_path();
    let mut f = create(&out)?;
    writeln!(f, "k,t,mean_base,min_base,max_base")?;
    for line in cfg.provenance() {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "# n_steps={} speed={speed}", params.n_steps)?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    let mut files = vec![out];
    if let Some(snap) = cfg.snapshot_path() {
        value.save(snap, params.tau)?;
        files.push(snap.to_path_buf());
    }
    Ok(Outcome {
        files,
        summary: vec![format!("speed={speed}")],
        check_passed: None,
    })
}

fn run_trajectory(cfg: &RunConfig) -> Result<Outcome> {
    let flow = flow(cfg)?;
    let start = Vec2::new(cfg.num("x1"), cfg.num("x2"));
    let (s1, target) = match cfg.word("strategy_i") {
        "descent" => (StrategyI::Descent, Target::LevelAtMost(cfg.num("mu"))),
        "follow_flow" => (StrategyI::FollowFlow, Target::LevelAtMost(cfg.num("mu"))),
        w => {
            let to: usize = w[4..].parse().expect("validated word");
            (
                trajectory::cell_transition_strategy(to, cfg.num("band"))?,
                Target::Region(CellRegion::cell(to)),
            )
        }
    };
    let s2 = match cfg.word("strategy_ii") {
        "max_sign" => StrategyII::MaxSign,
        "min_sign" => StrategyII::MinSign,
        "plus" => StrategyII::Fixed(Sign::Plus),
        "minus" => StrategyII::Fixed(Sign::Minus),
        "worst_abs_level" => StrategyII::WorstCaseEnum(Objective::AbsLevel),
        _ => StrategyII::WorstCaseEnum(Objective::DistanceTo(target)),
    };
    let params = GameParams::new(cfg.num("tau"), cfg.num("d"), 1, flow)?;
    let (report, traj) = trajectory::measure_reach(start, target, &s1, &s2, &params, cfg.num("T"))?;
    let out = cfg.out_path();
    let mut prov = cfg.provenance();
    prov.push(format!(
        "strategy_i={} strategy_ii={}",
        traj.meta.strategy_i, traj.meta.strategy_ii
    ));
    prov.push(format!("reach {}", trajectory::REACH_CSV_HEADER));
    prov.push(format!("reach {}", report.csv_row()));
    let mut f = create(&out)?;
    traj.write_csv(&mut f, &prov)?;
    f.flush()?;
    Ok(Outcome {
        files: vec![out],
        summary: vec![format!(
            "success={} steps={} time={}",
            report.success, report.steps_used, report.time_used
        )],
        check_passed: None,
    })
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let settings = FrontSpeedSettings {
        grid: cfg.count("grid"),
        t_final: cfg.num("T"),
        burn_in: cfg.num("burn_in"),
    };
    let rows = homogenize::sweep(cfg.p(), cfg.num("d"), cfg.list("A"), settings)?;
    let mut prov = cfg.provenance();
    if let Ok(fit) = homogenize::growth_law_fit(&rows) {
        prov.push(format!(
            "growth_law C1={} C2={} residual={} bracketed={}",
            fit.c1,
            fit.c2,
            fit.residual,
            fit.is_bracketed(&rows)
        ));
    }
    let out = cfg.out_path();
    let mut f = create(&out)?;
    homogenize::write_sweep_csv(&mut f, &rows, &prov)?;
    f.flush()?;
    Ok(Outcome {
        files: vec![out],
        summary: rows
            .iter()
            .map(|r| format!("A={} hbar={}", r.amplitude, r.value))
            .collect(),
        check_passed: None,
    })
}

fn run_appendix(cfg: &RunConfig) -> Result<Outcome> {
    let flow = flow(cfg)?;
    let thetas = cfg.list("theta");
    let delta = cfg.num("delta");
    let params = SupersolutionParams::admissible(delta, flow.max_speed(), thetas[0])?;
    let margin = supersolution::supersolution_margin(&params, &flow, cfg.count("n_phi"), cfg.count("n_t"))?;
    let report = supersolution::containment_check(flow, cfg.num("d"), delta, cfg.count("grid"), thetas)?;
    let mut prov = cfg.provenance();
    prov.push(format!(
        "a0={} b0={} L={} t_delta={} h={}",
        params.a0, params.b0, params.l, report.t_max, report.h
    ));
    prov.push(format!("supersolution_margin={margin}"));
    for (th, g) in &report.boundary_values {
        prov.push(format!("G(0,{th})={g}"));
    }
    let out = cfg.out_path();
    let mut f = create(&out)?;
    report.write_csv(&mut f, &prov)?;
    f.flush()?;
    let passed = margin > 0.0 && report.contained() && report.boundary_burnt();
    Ok(Outcome {
        files: vec![out],
        summary: vec![format!(
            "margin={margin} contained={} nodes_checked={} boundary_burnt={}",
            report.contained(),
            report.nodes_checked(),
            report.boundary_burnt()
        )],
        check_passed: Some(passed),
    })
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else if matches!(err, Error::Io(_)) {
        EXIT_IO
    } else {
        EXIT_CONFIG
    }
}

/// Single-line `key=value` rendering of an error for logs and scripts.
pub fn error_line(err: &Error) -> String {
    let kind = match err {
        Error::Config { .. } => "config",
        Error::InvalidParameter { .. } => "invalid_parameter",
        Error::Precondition { .. } => "precondition",
        Error::Format { .. } => "format",
        Error::Io(_) => "io",
        _ if err.is_numerical() => "numerical",
        _ => "other",
    };
    let mut line = format!("error kind={kind} exit={} module={}", exit_code(err), err.module());
    if let Error::Config { line: l, .. } = err {
        line.push_str(&format!(" line={l}"));
    }
    line.push_str(&format!(" message={:?}", err.to_string()));
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evolve_example_is_valid() {
        let cfg = parse_config("command=evolve\nA=2\nd=0.1\np1=1\np2=0\ngrid=128\nT=40").unwrap();
        assert_eq!(cfg.command, Command::Evolve);
        assert_eq!(cfg.num("A"), 2.0);
        assert_eq!(cfg.count("grid"), 128);
        assert_eq!(cfg.out_path(), PathBuf::from("evolve.csv"));
    }

    #[test]
    fn negative_amplitude_names_key() {
        let err = parse_config("command=evolve\nA=-1").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("A") && msg.contains(">= 0"), "{msg}");
        assert!(matches!(err, Error::Config { line: 2, .. }));
        assert_eq!(exit_code(&err), EXIT_CONFIG);
    }

    #[test]
    fn empty_file_is_missing_command() {
        for text in ["", "\n# only a comment\n"] {
            let msg = parse_config(text).unwrap_err().to_string();
            assert!(msg.contains("missing command"), "{msg}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let cases = [
            ("command=explode", 1, "unknown command"),
            ("command=evolve\nA=1\nfoo=2", 3, "unknown key foo"),
            ("command=evolve\nA=1\nx1=2", 3, "does not apply"),
            ("command=evolve\nA=one", 2, "malformed number"),
            ("command=evolve\nA=1\nA=2", 3, "duplicate key"),
            ("command=evolve\nA 1", 2, "expected key=value"),
            ("command=evolve\ngrid=8", 2, "grid: must be >= 16"),
            (
                "command=hbar\nA=1\nd=0\np1=1\np2=0\nlambda=0.1,0.2",
                0,
                "strictly decreasing",
            ),
            ("command=evolve\nA=1\nd=0\np1=1\np2=0", 0, "missing required key T"),
            (
                "command=trajectory\nA=1\nd=0\nx1=1\nx2=1\nstrategy_ii=chaos",
                6,
                "expected one of",
            ),
        ];
        for (text, line, needle) in cases {
            match parse_config(text) {
                Err(Error::Config { line: l, message }) => {
                    assert_eq!(l, line, "{text:?}: {message}");
                    assert!(message.contains(needle), "{text:?}: {message}");
                }
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = parse_config("# header\n command = game # trailing\n\nA = 1\nd=0.1\np1=1\np2=0\n").unwrap();
        assert_eq!(cfg.command, Command::Game);
        assert_eq!(cfg.count("grid"), 64);
    }

    #[test]
    fn printed_config_round_trips() {
        for text in [
            "command=evolve\nA=2\nd=0.1\np1=1\np2=0\ngrid=32\nT=1\neps=0.05",
            "command=hbar\nA=2\nd=0.1\np1=1\np2=0\nmethods=game,front_speed",
            "command=sweep\nA=4,8,16\nd=0\np1=1\np2=0",
            "command=trajectory\nA=1\nd=0.2\nx1=1.9\nx2=1.2\nstrategy_i=cell3",
            "command=appendix-check\nA=1\nd=0.2",
        ] {
            let cfg = parse_config(text).unwrap();
            let again = parse_config(&cfg.to_text()).unwrap();
            assert_eq!(cfg, again);
        }
    }

    #[test]
    fn error_line_is_single_line() {
        let err = parse_config("command=evolve\nA=-1").unwrap_err();
        let line = error_line(&err);
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error kind=config exit=2"), "{line}");
        assert!(line.contains("line=2"));
        let num = Error::NonFinite {
            module: "levelset",
            context: "x".into(),
        };
        assert_eq!(exit_code(&num), EXIT_NUMERICAL);
        assert!(error_line(&num).contains("module=levelset"));
    }
}
