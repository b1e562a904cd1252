//! Line-oriented `key = value` experiment configuration.
//!
//! ```text
//! # benchmark at a coarser resolution
//! n = 8
//! tau = 2.5e-4, T = 0.4
//! initial = paper_ic
//! ```
//!
//! Several pairs may share a line, separated by commas. `#` starts a
//! comment. Omitted keys keep the defaults of the benchmark experiment.

use std::fmt;
use std::path::{Path, PathBuf};

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::fem::ScalarField;
use crate::harness::{ConvergenceConfig, DEFAULT_PATH_CONSTANT};
use crate::scheme::{BenchmarkPhase, InitMode, Params};

/// The initial phase field.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// `½(1 − cos 4πx)(1 − cos 2πy) − 1`.
    Benchmark,
    Constant(f64),
    Expression(Expr),
}

impl InitialData {
    fn parse(src: &str) -> Result<InitialData> {
        let s = src.trim();
        if s == "paper_ic" {
            return Ok(InitialData::Benchmark);
        }
        if let Some(inner) = s.strip_prefix("constant(").and_then(|r| r.strip_suffix(')')) {
            let c: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("constant({inner}) needs a number")))?;
            return Ok(InitialData::Constant(c));
        }
        Ok(InitialData::Expression(Expr::parse(s)?))
    }
}

impl fmt::Display for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Benchmark => write!(f, "paper_ic"),
            InitialData::Constant(c) => write!(f, "constant({c:?})"),
            InitialData::Expression(e) => write!(f, "{e}"),
        }
    }
}

impl ScalarField for InitialData {
    fn value(&self, x: [f64; 2]) -> f64 {
        match self {
            InitialData::Benchmark => BenchmarkPhase.value(x),
            InitialData::Constant(c) => *c,
            InitialData::Expression(e) => e.eval(x),
        }
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            InitialData::Benchmark => BenchmarkPhase.gradient(x),
            InitialData::Constant(_) => [0.0, 0.0],
            InitialData::Expression(e) => e.gradient(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub params: Params,
    /// Cells per side for `run`, `diagnose` and `mesh-info`.
    pub n: usize,
    /// Coarsest cells per side for `converge`.
    pub base_n: usize,
    pub levels: usize,
    pub path_constant: f64,
    pub initial: InitialData,
    pub init: InitMode,
    pub out: PathBuf,
    /// Write a VTK snapshot every this many steps; 0 disables.
    pub snapshots: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            params: Params::default(),
            n: 16,
            base_n: 8,
            levels: 4,
            path_constant: DEFAULT_PATH_CONSTANT,
            initial: InitialData::Benchmark,
            init: InitMode::Interpolate,
            out: PathBuf::from("out"),
            snapshots: 0,
        }
    }
}

const KEYS: [&str; 21] = [
    "epsilon",
    "gamma",
    "lambda",
    "eta",
    "theta",
    "tau",
    "T",
    "picard_tol",
    "newton_tol",
    "linear_tol",
    "max_picard",
    "max_newton",
    "n",
    "base_n",
    "levels",
    "path_constant",
    "initial",
    "init",
    "out",
    "snapshots",
    // accepted as a synonym of T
    "final_time",
];

impl Config {
    pub fn from_path(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        // line of each key, for constraint messages
        let mut seen: Vec<(&'static str, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            for pair in body.split(',') {
                if pair.trim().is_empty() {
                    continue;
                }
                let err = |message: String| Error::Config { line, message };
                let Some((key, value)) = pair.split_once('=') else {
                    return Err(err(format!("expected key = value, got {:?}", pair.trim())));
                };
                let (key, value) = (key.trim(), value.trim());
                let Some(&key) = KEYS.iter().find(|k| **k == key) else {
                    return Err(err(format!("unknown key {key:?}")));
                };
                let key = if key == "final_time" { "T" } else { key };
                if seen.iter().any(|(k, _)| *k == key) {
                    return Err(err(format!("{key} given twice")));
                }
                seen.push((key, line));
                cfg.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
            }
        }
        cfg.check().map_err(|(key, message)| {
            let line = seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l);
            Error::Config { line, message }
        })?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let real = || value.parse::<f64>().map_err(|_| format!("expected a number, got {value:?}"));
        let count = || value.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got {value:?}"));
        let p = &mut self.params;
        match key {
            "epsilon" => p.epsilon = real()?,
            "gamma" => p.gamma = real()?,
            "lambda" => p.lambda = real()?,
            "eta" => p.eta = real()?,
            "theta" => p.theta = real()?,
            "tau" => p.tau = real()?,
            "T" => p.final_time = real()?,
            "picard_tol" => p.picard_tol = real()?,
            "newton_tol" => p.newton_tol = real()?,
            "linear_tol" => p.linear_tol = real()?,
            "max_picard" => p.max_picard = count()?,
            "max_newton" => p.max_newton = count()?,
            "n" => self.n = count()?,
            "base_n" => self.base_n = count()?,
            "levels" => self.levels = count()?,
            "path_constant" => self.path_constant = real()?,
            "initial" => self.initial = InitialData::parse(value).map_err(|e| e.to_string())?,
            "init" => {
                self.init = match value {
                    "interpolate" => InitMode::Interpolate,
                    "ritz" => InitMode::Ritz,
                    _ => return Err(format!("expected interpolate or ritz, got {value:?}")),
                }
            }
            "out" => {
                if value.is_empty() {
                    return Err("empty path".into());
                }
                self.out = PathBuf::from(value)
            }
            "snapshots" => self.snapshots = count()?,
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Constraint violations as `(key, message)`.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let p = &self.params;
        for (key, v) in [
            ("epsilon", p.epsilon),
            ("lambda", p.lambda),
            ("tau", p.tau),
            ("T", p.final_time),
            ("picard_tol", p.picard_tol),
            ("newton_tol", p.newton_tol),
            ("linear_tol", p.linear_tol),
            ("path_constant", self.path_constant),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err((key, format!("{key} must be > 0, got {v}")));
            }
        }
        for (key, v) in [("gamma", p.gamma), ("eta", p.eta), ("theta", p.theta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err((key, format!("{key} must be >= 0, got {v}")));
            }
        }
        for (key, v) in [("max_picard", p.max_picard), ("max_newton", p.max_newton), ("n", self.n), ("base_n", self.base_n)] {
            if v == 0 {
                return Err((key, format!("{key} must be >= 1")));
            }
        }
        if self.levels < 2 {
            return Err(("levels", format!("levels must be >= 2, got {}", self.levels)));
        }
        if let InitialData::Constant(c) = self.initial {
            if !c.is_finite() {
                return Err(("initial", format!("initial constant must be finite, got {c}")));
            }
        }
        p.validate().map_err(|_| {
            ("tau", format!("tau = {} must divide T = {} into a whole number of steps", p.tau, p.final_time))
        })
    }

    /// The harness configuration; `tau` is set per level from the path.
    pub fn convergence(&self) -> ConvergenceConfig {
        ConvergenceConfig {
            params: self.params.clone(),
            base_n: self.base_n,
            levels: self.levels,
            path_constant: self.path_constant,
            init: self.init,
            threads: None,
        }
    }

    /// Every key with its value, one per line, in a form `parse` reads back
    /// to an equal config.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let init = match self.init {
            InitMode::Interpolate => "interpolate",
            InitMode::Ritz => "ritz",
        };
        [
            format!("epsilon = {:?}", p.epsilon),
            format!("gamma = {:?}", p.gamma),
            format!("lambda = {:?}", p.lambda),
            format!("eta = {:?}", p.eta),
            format!("theta = {:?}", p.theta),
            format!("tau = {:?}", p.tau),
            format!("T = {:?}", p.final_time),
            format!("picard_tol = {:?}", p.picard_tol),
            format!("newton_tol = {:?}", p.newton_tol),
            format!("linear_tol = {:?}", p.linear_tol),
            format!("max_picard = {}", p.max_picard),
            format!("max_newton = {}", p.max_newton),
            format!("n = {}", self.n),
            format!("base_n = {}", self.base_n),
            format!("levels = {}", self.levels),
            format!("path_constant = {:?}", self.path_constant),
            format!("initial = {}", self.initial),
            format!("init = {init}"),
            format!("out = {}", self.out.display()),
            format!("snapshots = {}", self.snapshots),
        ]
        .join("\n")
            + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = Config::parse("").unwrap();
        let p = &c.params;
        assert_eq!((p.epsilon, p.lambda, p.eta, p.theta, p.gamma), (6.25e-2, 1.0, 1.0, 0.0, 1.0));
        assert_eq!((c.n, p.tau, p.final_time), (16, 1.25e-4, 0.4));
        assert_eq!(c.initial, InitialData::Benchmark);
        assert_eq!(c.init, InitMode::Interpolate);
        assert_eq!(Config::parse("# nothing here\n\n   \n").unwrap(), c);
    }

    #[test]
    fn negative_epsilon_names_the_key() {
        let e = Config::parse("n = 4\nepsilon = -1").unwrap_err();
        match &e {
            Error::Config { line, message } => {
                assert_eq!(*line, 2);
                assert!(message.contains("epsilon") && message.contains("> 0"), "{message}");
            }
            _ => panic!("{e:?}"),
        }
    }

    #[test]
    fn indivisible_step_is_rejected() {
        let e = Config::parse("tau = 0.3, T = 1.0").unwrap_err();
        assert!(e.to_string().contains("tau") && e.to_string().contains("divide"), "{e}");
        assert!(Config::parse("tau = 0.25, T = 1.0").is_ok());
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        for bad in ["foo = 1", "n = 4\nn = 8", "n 4", "n = -3", "max_picard = 1.5", "init = exact", "initial = sin(x"] {
            assert!(matches!(Config::parse(bad), Err(Error::Config { .. })), "{bad}");
        }
        assert!(Config::parse("levels = 1").unwrap_err().to_string().contains("levels"));
    }

    #[test]
    fn initial_data_forms() {
        let c = Config::parse("initial = constant(-0.25)").unwrap();
        assert_eq!(c.initial.value([0.3, 0.7]), -0.25);
        let c = Config::parse("initial = 0.1*cos(2*pi*x) # comment").unwrap();
        assert!((c.initial.value([0.0, 0.0]) - 0.1).abs() < 1e-15);
        let g = c.initial.gradient([0.25, 0.0]);
        assert!((g[0] + 0.2 * std::f64::consts::PI).abs() < 1e-14 && g[1] == 0.0);
    }

    #[test]
    fn text_round_trip_is_idempotent() {
        let src = "epsilon = 0.05, theta = 12.5\ntau = 1e-3\nT = 0.1\ninitial = -x^2 + sin(3*y)\ninit = ritz\nout = runs/a\nsnapshots = 5\nfinal_time = 0.1";
        assert!(Config::parse(src).is_err(), "T and final_time are the same key");
        let src = &src[..src.rfind('\n').unwrap()];
        let c = Config::parse(src).unwrap();
        let text = c.to_text();
        let again = Config::parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), text);
        assert_eq!(Config::parse(&Config::default().to_text()).unwrap(), Config::default());
    }
}
