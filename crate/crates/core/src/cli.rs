//! Command-line front end: one subcommand per experiment family, flat
//! key=value configuration files, a hashed manifest per run and CSV, JSON and
//! SVG emission.
//!
//! Every parameter is a `--key value` flag. A `--config FILE` supplies the
//! same keys as `key=value` lines ('#' starts a comment); flags on the
//! command line win over the file, and the file wins over built-in defaults.
//! The manifest written next to the outputs is itself a valid config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use sha2::{Digest, Sha256};

use crate::barriers::{self, BarrierSystem, Layout};
use crate::billiard::{self, BilliardConfig, Launch, MotionClass};
use crate::error::{LabError, LabResult};
use crate::everett::{self, CountMode};
use crate::paths;
use crate::reactions::{self, CoherentState, RepetitionSchedule, Status};
use crate::szilard::{self, EnsembleMode, IndicatorRule, Normalization, Trigger};
use crate::table::{Cell, DataTable};
use crate::traps::{self, DefaultBasis, Sweep, TrapSystem};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const OUT_ENV: &str = "ZENOLAB_OUT";

struct Key {
    name: &'static str,
    default: &'static str,
    help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

struct Sub {
    name: &'static str,
    about: &'static str,
    keys: &'static [Key],
}

const SUBS: &[Sub] = &[
    Sub {
        name: "reactions",
        about: "Survival of coherent-state reactants under n checks in a fixed time",
        keys: &[
            key("q", "1", "position of reactant A"),
            key("p", "0", "momentum of reactant A"),
            key("qb", "1", "position of reactant B"),
            key("pb", "0", "momentum of reactant B"),
            key("total-time", "1", "total time T"),
            key("n-list", "1,10,100,1000,10000,100000,1000000", "check counts"),
        ],
    },
    Sub {
        name: "paths",
        about: "Conditional probability of a rotating path of N states",
        keys: &[
            key("n-list", "2,10,100,1000,10000", "number of states on the path"),
            key("angle", "1.5707963267948966", "total rotation angle"),
        ],
    },
    Sub {
        name: "billiard",
        about: "Escape activity of an annular billiard with a hole",
        keys: &[
            key("r1", "6", "outer radius"),
            key("r2", "3", "inner radius"),
            key("speed", "3", "particle speed"),
            key("hole", "0.15", "hole arc length"),
            key("hole-center", "0", "hole centre angle"),
            key("particles", "100000", "number of particles"),
            key("switch-1to2", "never", "State1 reflections before switching, or never"),
            key("switch-2to1", "never", "State2 reflections before switching, or never"),
            key("count-inner", "false", "count inner reflections towards a switch"),
            key("launch", "random", "random, state1 or state2"),
            key("bin", "60", "time bin width"),
            key("max-time", "600", "simulation horizon"),
        ],
    },
    Sub {
        name: "barriers",
        about: "Transmission through n equal square barriers of fixed total width",
        keys: &[
            key("n-list", "1,5,10,30", "barrier counts"),
            key("a", "1", "total barrier width"),
            key("b", "0.5", "total gap width"),
            key("e", "25", "energy"),
            key("v", "50", "barrier height"),
            key("layout", "barrier-first", "barrier-first or gap-first"),
        ],
    },
    Sub {
        name: "traps",
        about: "Transmitted density coefficient V for diffusion through n traps",
        keys: &[
            key("n", "5", "trap count"),
            key("a", "1", "total trap width"),
            key("b", "0.5", "total gap width"),
            key("de", "0.5", "exterior diffusion constant"),
            key("di", "0.1", "interior diffusion constant"),
            key("k", "1", "trapping strength"),
            key("t", "1", "time"),
            key("sweep", "n", "swept variable: n, t or a"),
            key("values", "1,2,3,4,5,6,7,8,9,10", "sweep grid"),
        ],
    },
    Sub {
        name: "everett",
        about: "Observer-sequence counts and their relative rate",
        keys: &[
            key("mode", "table1", "table1 or surface"),
            key("count-mode", "published", "published or formula"),
            key("exact", "false", "emit exact integers in table1"),
            key("k-min", "2", "smallest K of the surface"),
            key("k-max", "250", "largest K of the surface"),
            key("r-min", "0", "smallest r of the surface"),
            key("r-max", "100", "largest r of the surface"),
        ],
    },
    Sub {
        name: "szilard",
        about: "Entropy surface and observer-ensemble fractions of the Szilard cylinder",
        keys: &[
            key("mode", "surface", "surface, related or random"),
            key("grid", "100", "points per axis of the surface"),
            key("x", "3", "interval half-width of the surface"),
            key("sizes", "1000,1500,2000,2500,3000,3500,4000,4500,5000,5500,6000", "ensemble sizes N"),
            key("trigger", "negative", "count s < 0 (negative) or s > 0 (positive)"),
            key("normalization", "performed", "divide by performed experiments or by ensemble size"),
        ],
    },
];

const GLOBAL_KEYS: &[Key] = &[
    key("seed", "1", "random seed"),
    key("format", "csv", "comma-separated subset of csv, json, svg"),
];

fn find_sub(name: &str) -> Option<&'static Sub> {
    SUBS.iter().find(|s| s.name == name)
}

fn command() -> Command {
    let mut cmd = Command::new("zenolab")
        .version(VERSION)
        .about("Numerical laboratory for dense-measurement models")
        .args_override_self(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("key=value configuration file"))
        .arg(Arg::new("out").long("out").global(true).value_name("DIR").help(format!("output directory [env {OUT_ENV}, default out]")))
        .arg(Arg::new("workers").long("workers").global(true).value_name("N").help("worker threads [default: all cores]"));
    for k in GLOBAL_KEYS {
        cmd = cmd.arg(Arg::new(k.name).long(k.name).global(true).value_name("VALUE").help(format!("{} [default: {}]", k.help, k.default)));
    }
    for s in SUBS {
        let mut sc = Command::new(s.name).about(s.about).args_override_self(true);
        for k in s.keys {
            sc = sc.arg(
                Arg::new(k.name)
                    .long(k.name)
                    .value_name("VALUE")
                    .allow_negative_numbers(true)
                    .action(ArgAction::Set)
                    .help(format!("{} [default: {}]", k.help, k.default)),
            );
        }
        cmd = cmd.subcommand(sc);
    }
    cmd
}

pub fn usage() -> String {
    command().render_help().to_string()
}

/// Parses `key=value` lines; blank lines and '#' comments are skipped.
pub fn parse_config_text(text: &str) -> LabResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::Usage(format!("config line {} is not key=value: {raw}", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// The fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub subcommand: String,
    /// Subcommand parameters plus seed and format.
    pub params: BTreeMap<String, String>,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Sorted key=value lines; output directory and worker count are left
    /// out since they do not affect the results.
    pub fn manifest(&self) -> String {
        let mut all = self.params.clone();
        all.insert("subcommand".into(), self.subcommand.clone());
        all.insert("version".into(), VERSION.into());
        all.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn manifest_hash(&self) -> String {
        Sha256::digest(self.manifest().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn get(&self, k: &str) -> &str {
        &self.params[k]
    }

    fn parse<T: std::str::FromStr>(&self, k: &str) -> LabResult<T> {
        let v = self.get(k);
        v.parse().map_err(|_| LabError::Usage(format!("cannot parse --{k} value '{v}'")))
    }

    fn list<T: std::str::FromStr>(&self, k: &str) -> LabResult<Vec<T>> {
        self.get(k)
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| LabError::Usage(format!("cannot parse --{k} entry '{s}'"))))
            .collect()
    }

    fn never_or<T: std::str::FromStr>(&self, k: &str) -> LabResult<Option<T>> {
        if self.get(k) == "never" { Ok(None) } else { self.parse(k).map(Some) }
    }

    fn choice(&self, k: &str, options: &[&str]) -> LabResult<&str> {
        let v = self.get(k);
        if options.contains(&v) {
            Ok(v)
        } else {
            Err(LabError::Usage(format!("--{k} must be one of {}, got '{v}'", options.join(", "))))
        }
    }

    pub fn formats(&self) -> LabResult<Vec<String>> {
        let fs: Vec<String> = self.get("format").split(',').map(|s| s.trim().to_string()).collect();
        for f in &fs {
            if !["csv", "json", "svg"].contains(&f.as_str()) {
                return Err(LabError::Usage(format!("unknown format '{f}'")));
            }
        }
        Ok(fs)
    }
}

/// Resolves defaults, config file and command line into a `RunConfig`.
pub fn parse_config(m: &ArgMatches, env_out: Option<String>) -> LabResult<RunConfig> {
    let file = match m.get_one::<String>("config") {
        Some(path) => parse_config_text(&fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    let (sub_name, sub_matches) = match m.subcommand() {
        Some((n, sm)) => (n.to_string(), Some(sm)),
        None => match file.get("subcommand") {
            Some(n) => (n.clone(), None),
            None => return Err(LabError::Usage("no subcommand given".into())),
        },
    };
    let sub = find_sub(&sub_name).ok_or_else(|| LabError::Usage(format!("unknown subcommand '{sub_name}'")))?;
    let mut params: BTreeMap<String, String> =
        GLOBAL_KEYS.iter().chain(sub.keys).map(|k| (k.name.to_string(), k.default.to_string())).collect();
    let mut out = env_out.unwrap_or_else(|| "out".into());
    let mut workers = None;
    for (k, v) in &file {
        match k.as_str() {
            "subcommand" => {
                if *v != sub_name {
                    return Err(LabError::Usage(format!("config is for '{v}', not '{sub_name}'")));
                }
            }
            "version" => {
                if v != VERSION {
                    log::warn!("config was written by version {v}, running {VERSION}");
                }
            }
            "out" => out = v.clone(),
            "workers" => workers = Some(v.clone()),
            _ if params.contains_key(k) => {
                params.insert(k.clone(), v.clone());
            }
            _ => return Err(LabError::Usage(format!("unknown config key '{k}' for {sub_name}"))),
        }
    }
    for k in GLOBAL_KEYS {
        if let Some(v) = m.get_one::<String>(k.name) {
            params.insert(k.name.into(), v.clone());
        }
    }
    if let Some(sm) = sub_matches {
        for k in sub.keys {
            if let Some(v) = sm.get_one::<String>(k.name) {
                params.insert(k.name.into(), v.clone());
            }
        }
    }
    if let Some(v) = m.get_one::<String>("out") {
        out = v.clone();
    }
    if let Some(v) = m.get_one::<String>("workers") {
        workers = Some(v.clone());
    }
    let workers = match workers {
        None => None,
        Some(w) => match w.parse::<usize>() {
            Ok(0) => None,
            Ok(n) => Some(n),
            Err(_) => return Err(LabError::Usage(format!("cannot parse --workers value '{w}'"))),
        },
    };
    let rc = RunConfig { subcommand: sub_name, params, out_dir: PathBuf::from(out), workers };
    rc.formats()?;
    rc.parse::<u64>("seed")?;
    Ok(rc)
}

enum Plot {
    Lines,
    Heat(usize),
}

struct Output {
    stem: String,
    title: String,
    table: DataTable,
    plot: Plot,
}

fn out(stem: &str, title: &str, table: DataTable, plot: Plot) -> Output {
    Output { stem: stem.into(), title: title.into(), table, plot }
}

fn run_reactions(c: &RunConfig) -> LabResult<Output> {
    let a = CoherentState::new(c.parse("q")?, c.parse("p")?);
    let b = CoherentState::new(c.parse("qb")?, c.parse("pb")?);
    let total: f64 = c.parse("total-time")?;
    let mut t = DataTable::new(["n", "survival", "small_step", "pair", "pair_limit"])
        .with_meta("source", "repeated-check survival of coherent-state reactants")
        .with_meta("reactant_a", format!("q={}, p={}", a.q, a.p))
        .with_meta("reactant_b", format!("q={}, p={}", b.q, b.p));
    let limit = reactions::pair_survival_limit(a, b, total)?;
    let mut flagged = 0;
    for n in c.list::<u64>("n-list")? {
        let sched = RepetitionSchedule::new(total, n)?;
        let s = reactions::survival_repeated(a, sched)?;
        let pr = reactions::pair_survival_repeated(a, b, sched)?;
        flagged += (s.status != Status::Ok || pr.status != Status::Ok) as usize;
        t.push_row(vec![
            Cell::from(n),
            s.value.into(),
            reactions::survival_repeated_small_step(a, sched).into(),
            pr.value.into(),
            limit.value.into(),
        ])?;
    }
    Ok(out("reactions", "Survival versus number of checks", t.with_meta("range_flagged_rows", flagged.to_string()), Plot::Lines))
}

fn run_paths(c: &RunConfig) -> LabResult<Output> {
    let angle: f64 = c.parse("angle")?;
    let mut t = DataTable::new(["N", "probability", "probability_basis_sum"])
        .with_meta("source", "product of overlaps along a rotating path")
        .with_meta("angle", angle.to_string());
    let basis = paths::standard_basis(2);
    for n in c.list::<usize>("n-list")? {
        let p = paths::ensemble_conditional_probability(&paths::rotation_path(n, angle)?, &paths::RotationKernel);
        let q = paths::ensemble_conditional_probability_in_basis(&paths::rotation_vectors(n, angle)?, &basis)?;
        t.push_row(vec![Cell::from(n), p.into(), q.into()])?;
    }
    Ok(out("paths", "Path probability versus N", t, Plot::Lines))
}

fn run_billiard(c: &RunConfig) -> LabResult<Output> {
    let launch = match c.choice("launch", &["random", "state1", "state2"])? {
        "state1" => Launch::Forced(MotionClass::State1),
        "state2" => Launch::Forced(MotionClass::State2),
        _ => Launch::Random,
    };
    let cfg = BilliardConfig {
        r1: c.parse("r1")?,
        r2: c.parse("r2")?,
        hole_width: c.parse("hole")?,
        hole_center: c.parse("hole-center")?,
        speed: c.parse("speed")?,
        n_particles: c.parse("particles")?,
        switch_1to2: c.never_or("switch-1to2")?,
        switch_2to1: c.never_or("switch-2to1")?,
        count_inner: c.parse("count-inner")?,
        launch,
        bin_width: c.parse("bin")?,
        max_time: c.parse("max-time")?,
        seed: c.parse("seed")?,
    };
    let t = billiard::run_activity(&cfg)?
        .to_table()?
        .with_meta("source", "annular billiard escape activity")
        .with_meta("initial_conditions", "launch uniform on the outer circle outside the hole, inward angle uniform");
    Ok(out("billiard", "Escapes per time bin", t, Plot::Lines))
}

fn run_barriers(c: &RunConfig) -> LabResult<Output> {
    let layout = match c.choice("layout", &["barrier-first", "gap-first"])? {
        "gap-first" => Layout::GapFirst,
        _ => Layout::BarrierFirst,
    };
    let sys = BarrierSystem::new(1, c.parse("a")?, c.parse("b")?, c.parse("e")?, c.parse("v")?)?.with_layout(layout);
    let t = barriers::sweep_n(&sys, &c.list("n-list")?)?.with_meta("source", "multibarrier transfer matrices");
    Ok(out("barriers", "Transmission versus barrier count", t, Plot::Lines))
}

fn run_traps(c: &RunConfig) -> LabResult<Output> {
    let sys = TrapSystem::new(
        c.parse("n")?,
        c.parse("a")?,
        c.parse("b")?,
        c.parse("de")?,
        c.parse("di")?,
        c.parse("k")?,
        c.parse("t")?,
    )?;
    let over = match c.choice("sweep", &["n", "t", "a"])? {
        "n" => Sweep::N(c.list("values")?),
        "t" => Sweep::T(c.list("values")?),
        _ => Sweep::A(c.list("values")?),
    };
    let basis = DefaultBasis::new(sys.k)?;
    let t = traps::sweep(&sys, &basis, &over)?.with_meta("source", "interface matching for diffusion through traps");
    Ok(out("traps", "Transmitted coefficient V", t, Plot::Lines))
}

fn run_everett(c: &RunConfig) -> LabResult<Output> {
    let mode = match c.choice("count-mode", &["published", "formula"])? {
        "formula" => CountMode::Formula,
        _ => CountMode::Published,
    };
    if c.choice("mode", &["table1", "surface"])? == "table1" {
        let t = everett::table1(mode, c.parse("exact")?)?.with_meta("source", "observer counts for K = 1100, 100, 10, 5, 2");
        Ok(out("everett-table1", "Observer counts", t, Plot::Lines))
    } else {
        let ks: Vec<u64> = (c.parse::<u64>("k-min")?..=c.parse("k-max")?).collect();
        let rs: Vec<u64> = (c.parse::<u64>("r-min")?..=c.parse("r-max")?).collect();
        let t = everett::rate_surface(&ks, &rs, mode)?.with_meta("source", "relative rate of observer counts");
        Ok(out("everett-surface", "Relative rate R(K, r)", t, Plot::Heat(2)))
    }
}

fn run_szilard(c: &RunConfig) -> LabResult<Output> {
    let rule = IndicatorRule {
        trigger: match c.choice("trigger", &["negative", "positive"])? {
            "positive" => Trigger::Positive,
            _ => Trigger::Negative,
        },
        normalization: match c.choice("normalization", &["performed", "ensemble"])? {
            "ensemble" => Normalization::Ensemble,
            _ => Normalization::Performed,
        },
    };
    match c.choice("mode", &["surface", "related", "random"])? {
        "surface" => {
            let t = szilard::surface(c.parse("grid")?, c.parse("x")?)?.with_meta("source", "entropy decrease per molecule");
            Ok(out("szilard-surface", "Entropy decrease s(fo, fi)", t, Plot::Heat(2)))
        }
        m => {
            let mode = if m == "related" { EnsembleMode::Related } else { EnsembleMode::Random { seed: c.parse("seed")? } };
            let t = szilard::fraction_sweep(&c.list("sizes")?, mode, rule)?
                .with_meta("source", "fraction of performed experiments with a given entropy sign");
            Ok(out(&format!("szilard-{m}"), "Event fraction versus N", t, Plot::Lines))
        }
    }
}

fn compute(c: &RunConfig) -> LabResult<Output> {
    match c.subcommand.as_str() {
        "reactions" => run_reactions(c),
        "paths" => run_paths(c),
        "billiard" => run_billiard(c),
        "barriers" => run_barriers(c),
        "traps" => run_traps(c),
        "everett" => run_everett(c),
        "szilard" => run_szilard(c),
        s => Err(LabError::Usage(format!("unknown subcommand '{s}'"))),
    }
}

/// Writes the requested formats and the manifest; returns the files written.
fn emit(o: &Output, c: &RunConfig) -> LabResult<Vec<PathBuf>> {
    let dir: &Path = &c.out_dir;
    fs::create_dir_all(dir)?;
    let hash = c.manifest_hash();
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> LabResult<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    write(format!("{}.manifest", o.stem), c.manifest())?;
    for f in c.formats()? {
        let body = match f.as_str() {
            "csv" => o.table.to_csv(Some(&hash)),
            "json" => o.table.to_json(Some(&hash)),
            _ => match o.plot {
                Plot::Lines => o.table.to_svg_lines(&o.title, Some(&hash)),
                Plot::Heat(z) => o.table.to_svg_heatmap(z, &o.title, Some(&hash)),
            },
        };
        write(format!("{}.{f}", o.stem), body)?;
    }
    Ok(written)
}

/// Parses, runs and emits; the error carries the exit status.
pub fn execute<I, S>(argv: I, env_out: Option<String>) -> LabResult<Vec<PathBuf>>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let m = command().try_get_matches_from(argv).map_err(|e| LabError::Usage(e.to_string()))?;
    let c = parse_config(&m, env_out)?;
    let job = || compute(&c).and_then(|o| emit(&o, &c));
    match c.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| LabError::Usage(format!("cannot start {n} workers: {e}")))?
            .install(job),
        None => job(),
    }
}

/// Entry point for the binary: returns the process exit status.
pub fn run(argv: Vec<String>) -> i32 {
    if argv.len() <= 1 {
        eprintln!("{}", usage());
        return 2;
    }
    let env_out = std::env::var(OUT_ENV).ok();
    match command().try_get_matches_from(&argv) {
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        _ => {}
    }
    match execute(argv, env_out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("zenolab: {e}");
            e.exit_code()
        }
    }
}
