//! Experiment config files: a flat key-value format with bracketed sections.
//!
//! ```text
//! task = fitting
//!
//! [dims]
//! m = 500
//! n = 600
//! r = 6
//! r_star = 6
//!
//! [geometry]
//! kind = oblique
//! omega = 10
//!
//! [solver]
//! algorithm = rtr
//! max_iters = 300
//!
//! [data]
//! seed = 42
//! oversampling = 5
//!
//! [output]
//! dir = out/fitting
//! ```
//!
//! `#` starts a comment. Keys outside any section belong to the empty
//! section. Unknown sections or keys are rejected with their line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::constraint::ConstraintKind;
use crate::error::{Error, Result};
use crate::manifold::{RetractionChoice, StiefelRule};
use crate::solver::{SolverConfig, TransportChoice};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Fitting,
    GraphSim,
    Sync,
    Markov,
    GeomTest,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Fitting => "fitting",
            Task::GraphSim => "graphsim",
            Task::Sync => "sync",
            Task::Markov => "markov",
            Task::GeomTest => "geomtest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Rgd,
    Rtr,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Rgd => "rgd",
            Algorithm::Rtr => "rtr",
        }
    }
}

/// How a graph is specified in a config: generated or loaded from a file.
#[derive(Debug, Clone)]
pub enum GraphSpec {
    Cycle(usize),
    Binomial(usize, f64),
    File(PathBuf),
}

impl GraphSpec {
    fn parse(s: &str, line: usize) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("cycle:") {
            let n = rest.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad cycle size in {s}"),
            })?;
            return Ok(GraphSpec::Cycle(n));
        }
        if let Some(rest) = s.strip_prefix("binomial:") {
            let (n, p) = rest.split_once(':').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected binomial:<n>:<p>, got {s}"),
            })?;
            let n = n.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad node count in {s}"),
            })?;
            let p = p.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad probability in {s}"),
            })?;
            return Ok(GraphSpec::Binomial(n, p));
        }
        Ok(GraphSpec::File(PathBuf::from(s)))
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub r_star: usize,
    pub kind: ConstraintKind,
    pub omega: f64,
    pub algorithm: Algorithm,
    pub solver: SolverConfig,
    pub oversampling: f64,
    pub noise: f64,
    pub connectivity: f64,
    pub n_cams: usize,
    pub graph_a: Option<GraphSpec>,
    pub graph_b: Option<GraphSpec>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Raw file text, hashed into run summaries.
    pub raw: String,
}

/// FNV-1a hash of the config text, reported in summaries.
pub fn config_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

struct RawConfig {
    // (section, key) -> (value, line)
    entries: BTreeMap<(String, String), (String, usize)>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<(String, String)>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (no, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Parse {
                        line: no + 1,
                        message: "unterminated section header".into(),
                    });
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: no + 1,
                message: format!("expected key = value, got {line}"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if value.is_empty() {
                return Err(Error::Parse {
                    line: no + 1,
                    message: format!("empty value for key {key}"),
                });
            }
            if entries
                .insert((section.clone(), key.clone()), (value, no + 1))
                .is_some()
            {
                return Err(Error::Parse {
                    line: no + 1,
                    message: format!("duplicate key {key} in section [{section}]"),
                });
            }
        }
        Ok(Self {
            entries,
            consumed: Default::default(),
        })
    }

    fn get(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        let id = (section.to_string(), key.to_string());
        let found = self.entries.get(&id).map(|(v, l)| (v.as_str(), *l));
        if found.is_some() {
            self.consumed.borrow_mut().insert(id);
        }
        found
    }

    fn parse_value<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse {key} = {v}"),
            }),
        }
    }

    fn require<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.parse_value(section, key)?.ok_or_else(|| {
            Error::InvalidConfig(format!("missing required key {key} in section [{section}]"))
        })
    }

    fn reject_unknown(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        for ((section, key), (_, line)) in &self.entries {
            if !consumed.contains(&(section.clone(), key.clone())) {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("unknown key {key} in section [{section}]"),
                });
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let raw = RawConfig::parse(text)?;

        let task = match raw.require::<String>("", "task")?.as_str() {
            "fitting" => Task::Fitting,
            "graphsim" => Task::GraphSim,
            "sync" => Task::Sync,
            "markov" => Task::Markov,
            "geomtest" => Task::GeomTest,
            other => {
                return Err(Error::InvalidConfig(format!("unknown task {other}")));
            }
        };

        let algorithm = match raw
            .parse_value::<String>("solver", "algorithm")?
            .as_deref()
            .unwrap_or("rtr")
        {
            "rgd" => Algorithm::Rgd,
            "rtr" => Algorithm::Rtr,
            other => {
                return Err(Error::InvalidConfig(format!("unknown algorithm {other}")));
            }
        };

        let mut solver = match algorithm {
            Algorithm::Rgd => SolverConfig::rgd(),
            Algorithm::Rtr => SolverConfig::rtr(),
        };
        if let Some(v) = raw.parse_value("solver", "max_iters")? {
            solver.max_iters = v;
        }
        if let Some(v) = raw.parse_value("solver", "grad_tol")? {
            solver.grad_tol = v;
        }
        if let Some(v) = raw.parse_value("solver", "time_budget_s")? {
            solver.time_budget = v;
        }
        if let Some(v) = raw.parse_value("solver", "initial_step")? {
            solver.armijo.initial_step = v;
        }
        if let Some(v) = raw.parse_value("solver", "backtrack_factor")? {
            solver.armijo.backtrack_factor = v;
        }
        if let Some(v) = raw.parse_value("solver", "sufficient_decrease")? {
            solver.armijo.sufficient_decrease = v;
        }
        if let Some(v) = raw.parse_value("solver", "max_backtracks")? {
            solver.armijo.max_backtracks = v;
        }
        if let Some(v) = raw.parse_value("solver", "initial_radius")? {
            solver.tr.initial_radius = v;
        }
        if let Some(v) = raw.parse_value("solver", "max_radius")? {
            solver.tr.max_radius = v;
        }
        if let Some(v) = raw.parse_value("solver", "eta_accept")? {
            solver.tr.eta_accept = v;
        }
        if let Some(v) = raw.parse_value("solver", "tcg_max_iters")? {
            solver.tr.tcg_max_iters = v;
        }
        if let Some(v) = raw.parse_value("solver", "tcg_kappa")? {
            solver.tr.tcg_kappa = v;
        }
        if let Some(v) = raw.parse_value("solver", "tcg_theta")? {
            solver.tr.tcg_theta = v;
        }
        if let Some((v, line)) = raw.get("solver", "retraction") {
            solver.retraction = match v {
                "first_order" => RetractionChoice::FirstOrder(StiefelRule::Polar),
                "first_order_cayley" => RetractionChoice::FirstOrder(StiefelRule::Cayley),
                "second_order" => RetractionChoice::SecondOrder,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown retraction {other}"),
                    });
                }
            };
        }
        if let Some((v, line)) = raw.get("solver", "transport") {
            solver.transport = match v {
                "projection" => TransportChoice::Projection,
                "decoupled" => TransportChoice::Decoupled,
                "isometric" => TransportChoice::Isometric,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown transport {other}"),
                    });
                }
            };
        }
        solver.validate()?;

        let n_cams: usize = raw.parse_value("data", "n_cams")?.unwrap_or(0);
        let graph_a = match raw.get("data", "graph_a") {
            Some((v, line)) => Some(GraphSpec::parse(v, line)?),
            None => None,
        };
        let graph_b = match raw.get("data", "graph_b") {
            Some((v, line)) => Some(GraphSpec::parse(v, line)?),
            None => None,
        };

        // dimensions; sync derives them from the camera count
        let (m, n) = if task == Task::Sync {
            if n_cams < 2 {
                return Err(Error::InvalidConfig(
                    "sync needs n_cams >= 2 in [data]".into(),
                ));
            }
            (3 * n_cams, 3 * n_cams)
        } else {
            (raw.require("dims", "m")?, raw.require("dims", "n")?)
        };
        let r: usize = if task == Task::Sync {
            raw.parse_value("dims", "r")?.unwrap_or(3)
        } else {
            raw.require("dims", "r")?
        };
        let r_star: usize = raw.parse_value("dims", "r_star")?.unwrap_or(r);
        if r == 0 || r > m.min(n) {
            return Err(Error::InvalidConfig(format!(
                "rank {r} out of range for {m}x{n}"
            )));
        }

        // constraint kind: fixed per task except geomtest
        let expected_kind = match task {
            Task::Fitting | Task::Markov => Some(ConstraintKind::Oblique),
            Task::GraphSim => Some(ConstraintKind::FrobeniusSphere),
            Task::Sync => Some(ConstraintKind::StackedStiefel {
                blocks: n_cams,
                block_rows: 3,
            }),
            Task::GeomTest => None,
        };
        let kind = match (raw.get("geometry", "kind"), expected_kind) {
            (Some((v, _)), Some(expected)) => {
                let given = ConstraintKind::parse(v)?;
                if given != expected {
                    return Err(Error::InvalidConfig(format!(
                        "task {} works on kind {}, config says {}",
                        task.name(),
                        expected.name(),
                        given.name()
                    )));
                }
                expected
            }
            (None, Some(expected)) => expected,
            (Some((v, _)), None) => ConstraintKind::parse(v)?,
            (None, None) => ConstraintKind::Oblique,
        };

        let omega: f64 = raw
            .parse_value("geometry", "omega")?
            .unwrap_or(match algorithm {
                Algorithm::Rgd => 0.5,
                Algorithm::Rtr => 10.0,
            });
        if omega <= 0.0 {
            return Err(Error::InvalidConfig("omega must be positive".into()));
        }

        let seed: u64 = raw.parse_value("data", "seed")?.unwrap_or(0);
        let oversampling: f64 = raw.parse_value("data", "oversampling")?.unwrap_or(5.0);
        let noise: f64 = raw.parse_value("data", "noise")?.unwrap_or(0.0);
        let connectivity: f64 = raw.parse_value("data", "connectivity")?.unwrap_or(0.3);

        let out_dir: String = raw.require("output", "dir")?;

        // task-specific requirements
        match task {
            Task::Fitting => {
                if r_star > m.min(n) {
                    return Err(Error::InvalidConfig("r_star out of range".into()));
                }
            }
            Task::GraphSim => {
                if graph_a.is_none() || graph_b.is_none() {
                    return Err(Error::InvalidConfig(
                        "graphsim needs graph_a and graph_b in [data]".into(),
                    ));
                }
            }
            Task::Markov => {
                if m != n {
                    return Err(Error::InvalidConfig(
                        "markov needs a square state space (m = n)".into(),
                    ));
                }
            }
            Task::Sync | Task::GeomTest => {}
        }

        raw.reject_unknown()?;

        Ok(Self {
            task,
            m,
            n,
            r,
            r_star,
            kind,
            omega,
            algorithm,
            solver,
            oversampling,
            noise,
            connectivity,
            n_cams,
            graph_a,
            graph_b,
            seed,
            out_dir: PathBuf::from(out_dir),
            raw: text.to_string(),
        })
    }
}
