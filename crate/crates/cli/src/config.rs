//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Differentiate,
    Sweep,
    Adversary,
    Variational,
    Modulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Uniform,
    Alternating,
    /// Sign flips every `2m` nodes for the stencil half-width `m` in use.
    StencilWorst,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiKind {
    Sup,
    /// Discrete Hölder norm with exponent `a`.
    Holder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OperatorKind {
    Integration,
    Identity,
    /// Square matrix read from a text file, one row per line.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    /// `u(x) = x`, so `g(x) = x^2 / 2`.
    Quadratic,
    Constant,
    Sine(f64),
    /// `u(x) = |x - 1/2|`.
    AbsShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassName {
    Lip,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeName {
    Constants,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bruteforce,
    /// Lower bound from pairs inside the lattice.
    Search,
    /// Lower bound from pairs in the continuum ball on `grid` nodes.
    SearchGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub a: f64,
    pub m: f64,
    pub c: f64,
    pub deltas: Vec<f64>,
    pub grid: usize,
    pub ensemble: usize,
    pub budget: usize,
    pub seed: u64,
    pub noise: NoiseKind,
    pub phi: PhiKind,
    pub operator: OperatorKind,
    pub truth: Truth,
    pub amplitude: f64,
    pub class: ClassName,
    pub lattice: LatticeName,
    pub levels: usize,
    pub nodes: usize,
    pub method: Method,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            input: None,
            out: PathBuf::from("out"),
            a: 2.0,
            m: 1.0,
            c: 2.0,
            deltas: vec![1e-4],
            grid: 1001,
            ensemble: 100,
            budget: 2000,
            seed: 0,
            noise: NoiseKind::Uniform,
            phi: PhiKind::Sup,
            operator: OperatorKind::Integration,
            truth: Truth::Quadratic,
            amplitude: 1.0,
            class: ClassName::Sup,
            lattice: LatticeName::Constants,
            levels: 21,
            nodes: 3,
            method: Method::Bruteforce,
        }
    }
}

pub const KEYS: [&str; 21] = [
    "command", "input", "out", "a", "m", "c", "deltas", "grid", "ensemble", "budget", "seed", "noise", "phi",
    "operator", "truth", "amplitude", "class", "lattice", "levels", "nodes", "method",
];

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::Config(format!("invalid value {value:?} for {key}: expected {expected}"))
}

fn number<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(key, value, expected))
}

impl ExperimentConfig {
    /// Parses a config file body. Later lines override earlier ones.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {line:?}", i + 1)))?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "command" => {
                self.command = match value {
                    "" => None,
                    v => Some(
                        <Command as clap::ValueEnum>::from_str(v, false)
                            .map_err(|_| bad(key, v, "differentiate|sweep|adversary|variational|modulus"))?,
                    ),
                }
            }
            "input" => self.input = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "a" => self.a = number(key, value, "a number")?,
            "m" | "M" => self.m = number(key, value, "a number")?,
            "c" => self.c = number(key, value, "a number")?,
            "deltas" | "delta" => {
                self.deltas = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| number(key, s, "comma-separated numbers"))
                    .collect::<Result<_, _>>()?
            }
            "grid" => self.grid = number(key, value, "a node count")?,
            "ensemble" => self.ensemble = number(key, value, "a count")?,
            "budget" => self.budget = number(key, value, "a count")?,
            "seed" => self.seed = number(key, value, "an unsigned 64-bit integer")?,
            "noise" => {
                self.noise = match value {
                    "uniform" => NoiseKind::Uniform,
                    "alternating" => NoiseKind::Alternating,
                    "stencil-worst" => NoiseKind::StencilWorst,
                    "none" => NoiseKind::None,
                    v => return Err(bad(key, v, "uniform|alternating|stencil-worst|none")),
                }
            }
            "phi" => {
                self.phi = match value {
                    "sup" => PhiKind::Sup,
                    "holder" => PhiKind::Holder,
                    v => return Err(bad(key, v, "sup|holder")),
                }
            }
            "operator" => {
                self.operator = match value {
                    "integration" => OperatorKind::Integration,
                    "identity" => OperatorKind::Identity,
                    v => match v.strip_prefix("file:") {
                        Some(path) if !path.is_empty() => OperatorKind::File(PathBuf::from(path)),
                        _ => return Err(bad(key, v, "integration|identity|file:PATH")),
                    },
                }
            }
            "truth" => {
                self.truth = match value {
                    "quadratic" => Truth::Quadratic,
                    "constant" => Truth::Constant,
                    "abs-shift" => Truth::AbsShift,
                    v => match v.strip_prefix("sine(").and_then(|r| r.strip_suffix(')')) {
                        Some(k) => Truth::Sine(number(key, k, "sine(k) with numeric k")?),
                        None => return Err(bad(key, v, "quadratic|constant|sine(k)|abs-shift")),
                    },
                }
            }
            "amplitude" => self.amplitude = number(key, value, "a number")?,
            "class" => {
                self.class = match value {
                    "lip" => ClassName::Lip,
                    "sup" => ClassName::Sup,
                    v => return Err(bad(key, v, "lip|sup")),
                }
            }
            "lattice" => {
                self.lattice = match value {
                    "constants" => LatticeName::Constants,
                    "product" => LatticeName::Product,
                    v => return Err(bad(key, v, "constants|product")),
                }
            }
            "levels" => self.levels = number(key, value, "a count")?,
            "nodes" => self.nodes = number(key, value, "a node count")?,
            "method" => {
                self.method = match value {
                    "bruteforce" => Method::Bruteforce,
                    "search" => Method::Search,
                    "search-grid" => Method::SearchGrid,
                    v => return Err(bad(key, v, "bruteforce|search|search-grid")),
                }
            }
            k => return Err(CliError::Config(format!("unknown key {k:?}; known keys: {}", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// Checks the numeric fields a command will rely on.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        for (name, v) in [("a", self.a), ("m", self.m), ("c", self.c), ("amplitude", self.amplitude)] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite, got {v}"));
            }
        }
        // the modulus is also defined at delta = 0
        let zero_ok = command == Command::Modulus;
        if let Some(d) = self
            .deltas
            .iter()
            .find(|d| !(d.is_finite() && (**d > 0.0 || (zero_ok && **d == 0.0))))
        {
            return fail(format!("every delta must be positive, got {d}"));
        }
        if self.grid < 2 {
            return fail(format!("grid needs at least 2 nodes, got {}", self.grid));
        }
        match command {
            Command::Differentiate | Command::Sweep => {
                if !(self.a > 1.0 && self.a <= 2.0) {
                    return fail(format!(
                        "the difference regularizer requires a > 1 (and a <= 2), got a = {}",
                        self.a
                    ));
                }
                if !(self.m > 0.0) {
                    return fail(format!("m must be positive, got {}", self.m));
                }
                if command == Command::Sweep && self.deltas.len() < 2 {
                    return fail(format!("sweep needs at least 2 deltas, got {}", self.deltas.len()));
                }
                if command == Command::Differentiate && self.deltas.len() != 1 {
                    return fail(format!("differentiate takes exactly one delta, got {}", self.deltas.len()));
                }
                if self.grid < 3 {
                    return fail(format!("grid needs at least 3 nodes, got {}", self.grid));
                }
            }
            Command::Adversary => {
                if !(self.m > 0.0) {
                    return fail(format!("m must be positive, got {}", self.m));
                }
            }
            Command::Variational | Command::Modulus => {
                if !(self.c > 0.0) {
                    return fail(format!("c must be positive, got {}", self.c));
                }
                if self.phi == PhiKind::Holder && !(self.a > 0.0 && self.a <= 2.0) {
                    return fail(format!("holder phi needs a in (0, 2], got {}", self.a));
                }
                if self.phi == PhiKind::Holder && (self.grid < 3 || (command == Command::Modulus && self.nodes < 3)) {
                    return fail("holder phi needs grids of at least 3 nodes".into());
                }
                if command == Command::Modulus && (self.nodes < 2 || self.levels < 1) {
                    return fail(format!(
                        "lattice needs at least 2 nodes and 1 level, got {} and {}",
                        self.nodes, self.levels
                    ));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let command = match self.command {
            None => "",
            Some(Command::Differentiate) => "differentiate",
            Some(Command::Sweep) => "sweep",
            Some(Command::Adversary) => "adversary",
            Some(Command::Variational) => "variational",
            Some(Command::Modulus) => "modulus",
        };
        let deltas: Vec<String> = self.deltas.iter().map(|d| format!("{d:e}")).collect();
        let noise = match self.noise {
            NoiseKind::Uniform => "uniform",
            NoiseKind::Alternating => "alternating",
            NoiseKind::StencilWorst => "stencil-worst",
            NoiseKind::None => "none",
        };
        let operator = match &self.operator {
            OperatorKind::Integration => "integration".to_string(),
            OperatorKind::Identity => "identity".to_string(),
            OperatorKind::File(p) => format!("file:{}", p.display()),
        };
        let truth = match self.truth {
            Truth::Quadratic => "quadratic".to_string(),
            Truth::Constant => "constant".to_string(),
            Truth::Sine(k) => format!("sine({k:e})"),
            Truth::AbsShift => "abs-shift".to_string(),
        };
        writeln!(f, "command = {command}")?;
        writeln!(f, "input = {}", self.input.as_ref().map(|p| p.display().to_string()).unwrap_or_default())?;
        writeln!(f, "out = {}", self.out.display())?;
        writeln!(f, "a = {:e}", self.a)?;
        writeln!(f, "m = {:e}", self.m)?;
        writeln!(f, "c = {:e}", self.c)?;
        writeln!(f, "deltas = {}", deltas.join(","))?;
        writeln!(f, "grid = {}", self.grid)?;
        writeln!(f, "ensemble = {}", self.ensemble)?;
        writeln!(f, "budget = {}", self.budget)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "noise = {noise}")?;
        writeln!(f, "phi = {}", if self.phi == PhiKind::Sup { "sup" } else { "holder" })?;
        writeln!(f, "operator = {operator}")?;
        writeln!(f, "truth = {truth}")?;
        writeln!(f, "amplitude = {:e}", self.amplitude)?;
        writeln!(f, "class = {}", if self.class == ClassName::Sup { "sup" } else { "lip" })?;
        let lattice = if self.lattice == LatticeName::Constants { "constants" } else { "product" };
        writeln!(f, "lattice = {lattice}")?;
        writeln!(f, "levels = {}", self.levels)?;
        writeln!(f, "nodes = {}", self.nodes)?;
        let method = match self.method {
            Method::Bruteforce => "bruteforce",
            Method::Search => "search",
            Method::SearchGrid => "search-grid",
        };
        writeln!(f, "method = {method}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let text = "# experiment\n\ncommand = sweep\na=1.5\n  deltas = 1e-2, 1e-3 \nseed = 7\nseed = 9\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.command, Some(Command::Sweep));
        assert_eq!(c.a, 1.5);
        assert_eq!(c.deltas, vec![1e-2, 1e-3]);
        assert_eq!(c.seed, 9);
        assert_eq!(c.m, 1.0);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("class = banana").is_err());
        assert!(ExperimentConfig::parse("no equals sign").is_err());
        assert!(ExperimentConfig::parse("truth = sine(x)").is_err());
        assert!(ExperimentConfig::parse("operator = file:").is_err());
    }

    #[test]
    fn structured_values() {
        let c = ExperimentConfig::parse("truth = sine(3)\noperator = file:/tmp/m.txt\ndeltas =\ninput =").unwrap();
        assert_eq!(c.truth, Truth::Sine(3.0));
        assert_eq!(c.operator, OperatorKind::File(PathBuf::from("/tmp/m.txt")));
        assert!(c.deltas.is_empty());
        assert_eq!(c.input, None);
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig { a: 1.0, ..Default::default() };
        let err = c.validate(Command::Differentiate).unwrap_err().to_string();
        assert!(err.contains("a > 1"), "{err}");
        c.a = 2.0;
        c.deltas = vec![1e-3];
        assert!(c.validate(Command::Sweep).is_err());
        assert!(c.validate(Command::Differentiate).is_ok());
        c.deltas = vec![1e-3, -1.0];
        assert!(c.validate(Command::Modulus).is_err());
    }

    #[test]
    fn display_round_trips_defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_string()).unwrap(), c);
    }
}
