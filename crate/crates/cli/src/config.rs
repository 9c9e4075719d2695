//! Flat `key = value` experiment configuration with dotted namespaces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anisocahn::gamma::{GammaRule, ShapeSpec};
use anisocahn::integrand::IntegrandSpec;
use anisocahn::potential::PotentialSpec;
use anisocahn::{ConformalMetric, Domain, EnergyParams, Error, Grid, Result, ScalarField};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug)]
enum Kind {
    Str,
    Uint,
    Float,
    Bool,
    UintList,
    FloatList,
    Choice(&'static [&'static str]),
}

struct Key {
    name: &'static str,
    default: &'static str,
    kind: Kind,
    /// Whether the key takes part in the configuration hash.
    hashed: bool,
}

const fn key(name: &'static str, default: &'static str, kind: Kind) -> Key {
    Key {
        name,
        default,
        kind,
        hashed: true,
    }
}

const fn unhashed(name: &'static str, default: &'static str, kind: Kind) -> Key {
    Key {
        name,
        default,
        kind,
        hashed: false,
    }
}

const SCHEMA: &[Key] = &[
    key("seed", "0", Kind::Uint),
    key("threads", "1", Kind::Uint),
    unhashed("output.dir", "out", Kind::Str),
    unhashed("checkpoint.every", "25", Kind::Uint),
    key("grid.dim", "2", Kind::Uint),
    key("grid.cells", "128", Kind::UintList),
    key("grid.lengths", "1", Kind::FloatList),
    key("potential.family", "quartic", Kind::Choice(&["quartic", "cosine", "custom"])),
    key("potential.coefficients", "", Kind::FloatList),
    key(
        "integrand.family",
        "diagonal",
        Kind::Choice(&["isotropic", "diagonal", "quadratic", "quartic_mixture"]),
    ),
    key("integrand.diagonal", "4,1", Kind::FloatList),
    key("integrand.matrix", "", Kind::FloatList),
    key("integrand.beta", "1", Kind::Float),
    key("integrand.modulation.amplitude", "0", Kind::Float),
    key("integrand.modulation.wavevector", "1,0", Kind::FloatList),
    key("metric.amplitude", "0", Kind::Float),
    key("metric.wavevector", "1,0", Kind::FloatList),
    key("energy.eps", "0.03125", Kind::Float),
    key("energy.delta", "0.1", Kind::Float),
    key("heteroclinic.t_max", "12", Kind::Float),
    key("heteroclinic.samples", "2401", Kind::Uint),
    key("audit.samples", "1000", Kind::Uint),
    key("minimize.init", "random", Kind::Choice(&["random", "stripe", "snapshot"])),
    key("minimize.input", "", Kind::Str),
    key("minimize.amplitude", "0.5", Kind::Float),
    key("minimize.steps", "5000", Kind::Uint),
    key("minimize.tol", "1e-6", Kind::Float),
    key("newton.tol", "1e-9", Kind::Float),
    key("newton.max_iter", "50", Kind::Uint),
    key("mountain_pass.deltas", "0.1,0.01", Kind::FloatList),
    key("mountain_pass.nodes", "33", Kind::Uint),
    key("mountain_pass.axis", "1", Kind::Uint),
    key("mountain_pass.gamma", "4", Kind::Float),
    key("mountain_pass.rounds", "400", Kind::Uint),
    key("mountain_pass.tol", "1e-6", Kind::Float),
    key("mountain_pass.climb", "true", Kind::Bool),
    key("diagnose.input", "", Kind::Str),
    key("diagnose.lines", "32", Kind::Uint),
    key("diagnose.axis", "1", Kind::Uint),
    key("diagnose.radii", "", Kind::FloatList),
    key("diagnose.tangential_threshold", "0.05", Kind::Float),
    key("gamma.shape", "circle", Kind::Choice(&["stripe", "circle", "ellipse"])),
    key("gamma.axis", "1", Kind::Uint),
    key("gamma.offsets", "0.25,0.75", Kind::FloatList),
    key("gamma.center", "0.5,0.5", Kind::FloatList),
    key("gamma.radius", "0.25", Kind::Float),
    key("gamma.axes", "0.3,0.15", Kind::FloatList),
    key("gamma.eps", "0.0625,0.03125,0.015625,0.0078125", Kind::FloatList),
    key("gamma.rule", "log", Kind::Choice(&["log", "fixed"])),
    key("gamma.factor", "2", Kind::Float),
    key("gamma.value", "4", Kind::Float),
    key("spectrum.input", "", Kind::Str),
    key("spectrum.k", "4", Kind::Uint),
];

fn schema(name: &str) -> Option<&'static Key> {
    SCHEMA.iter().find(|k| k.name == name)
}

fn check_value(kind: Kind, raw: &str) -> std::result::Result<(), String> {
    let float = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("'{s}' is not a number")).and_then(|v| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(format!("'{s}' is not finite"))
        }
    });
    let uint = |s: &str| s.trim().parse::<u64>().map(|_| ()).map_err(|_| format!("'{s}' is not a nonnegative integer"));
    let list = |f: &dyn Fn(&str) -> std::result::Result<(), String>| {
        if raw.trim().is_empty() {
            return Ok(());
        }
        raw.split(',').try_for_each(f)
    };
    match kind {
        Kind::Str => Ok(()),
        Kind::Uint => uint(raw),
        Kind::Float => float(raw),
        Kind::Bool => match raw.trim() {
            "true" | "false" => Ok(()),
            other => Err(format!("'{other}' is not true or false")),
        },
        Kind::UintList => list(&uint),
        Kind::FloatList => list(&float),
        Kind::Choice(options) => {
            if options.contains(&raw.trim()) {
                Ok(())
            } else {
                Err(format!("'{}' is not one of {}", raw.trim(), options.join(", ")))
            }
        }
    }
}

/// Validated configuration: every schema key with its resolved value.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Parses `key = value` lines (`#` starts a comment), applies `overrides`
    /// in order, and validates everything. All violations are reported together.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut errors = Vec::new();
        let mut values: BTreeMap<String, String> =
            SCHEMA.iter().map(|k| (k.name.to_string(), k.default.to_string())).collect();
        let mut set = |name: &str, value: &str, origin: &str, errors: &mut Vec<String>| match schema(name) {
            None => errors.push(format!("{origin}: unknown key '{name}'")),
            Some(k) => match check_value(k.kind, value) {
                Ok(()) => {
                    values.insert(name.to_string(), value.trim().to_string());
                }
                Err(e) => errors.push(format!("{origin}: {name}: {e}")),
            },
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => set(k.trim(), v, &format!("line {}", i + 1), &mut errors),
                None => errors.push(format!("line {}: expected 'key = value'", i + 1)),
            }
        }
        for (k, v) in overrides {
            set(k.trim(), v, "override", &mut errors);
        }
        let cfg = Self { values };
        errors.extend(cfg.semantic_errors());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    fn semantic_errors(&self) -> Vec<String> {
        let mut e = Vec::new();
        // Only checked once the values themselves parse.
        let Ok(dim) = self.get::<usize>("grid.dim") else { return e };
        if !(1..=3).contains(&dim) {
            e.push(format!("grid.dim: {dim} is not 1, 2 or 3"));
        }
        let counts = [("grid.cells", self.list::<usize>("grid.cells").len()), ("grid.lengths", self.list::<f64>("grid.lengths").len())];
        for (name, n) in counts {
            if n != 1 && n != dim {
                e.push(format!("{name}: expected 1 or {dim} values, got {n}"));
            }
        }
        if self.get::<usize>("threads").unwrap_or(1) == 0 {
            e.push("threads: must be at least 1".into());
        }
        if self.get::<usize>("checkpoint.every").unwrap_or(1) == 0 {
            e.push("checkpoint.every: must be at least 1".into());
        }
        if !(self.get::<f64>("energy.eps").unwrap_or(1.0) > 0.0) {
            e.push("energy.eps: must be positive".into());
        }
        if !(self.get::<f64>("energy.delta").unwrap_or(0.0) >= 0.0) {
            e.push("energy.delta: must be nonnegative".into());
        }
        if self.str("potential.family") == "custom" && self.list::<f64>("potential.coefficients").is_empty() {
            e.push("potential.coefficients: required for the custom family".into());
        }
        if self.list::<f64>("mountain_pass.deltas").iter().any(|&d| !(d > 0.0)) || self.list::<f64>("mountain_pass.deltas").is_empty() {
            e.push("mountain_pass.deltas: need at least one positive value".into());
        }
        let eps = self.list::<f64>("gamma.eps");
        if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|&v| !(v > 0.0)) {
            e.push("gamma.eps: need a strictly decreasing list of positive values".into());
        }
        e
    }

    pub fn str(&self, name: &str) -> &str {
        self.values.get(name).unwrap_or_else(|| panic!("'{name}' is not a configuration key"))
    }

    pub fn get<V: std::str::FromStr>(&self, name: &str) -> Result<V> {
        self.str(name)
            .parse()
            .map_err(|_| Error::Config(vec![format!("{name}: cannot parse '{}'", self.str(name))]))
    }

    pub fn list<V: std::str::FromStr>(&self, name: &str) -> Vec<V> {
        let raw = self.str(name);
        if raw.is_empty() {
            return Vec::new();
        }
        raw.split(',').filter_map(|s| s.trim().parse().ok()).collect()
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        let s = self.str(name);
        (!s.is_empty()).then(|| PathBuf::from(s))
    }

    pub fn seed(&self) -> u64 {
        self.get("seed").unwrap_or(0)
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.str("output.dir"))
    }

    /// Canonical `key=value` lines of the keys that affect results.
    pub fn canonical(&self) -> String {
        SCHEMA
            .iter()
            .filter(|k| k.hashed)
            .map(|k| format!("{}={}\n", k.name, self.values[k.name]))
            .collect()
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn expand(&self, name: &str, dim: usize) -> Vec<String> {
        let raw: Vec<String> = self.str(name).split(',').map(|s| s.trim().to_string()).collect();
        if raw.len() == 1 {
            vec![raw[0].clone(); dim]
        } else {
            raw
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let dim: usize = self.get("grid.dim")?;
        let cells: Vec<usize> = self.expand("grid.cells", dim).iter().filter_map(|s| s.parse().ok()).collect();
        let lengths: Vec<f64> = self.expand("grid.lengths", dim).iter().filter_map(|s| s.parse().ok()).collect();
        Grid::new(&cells, &lengths)
    }

    pub fn potential(&self) -> PotentialSpec {
        match self.str("potential.family") {
            "cosine" => PotentialSpec::cosine(),
            "custom" => PotentialSpec::custom(self.list("potential.coefficients")),
            _ => PotentialSpec::quartic(),
        }
    }

    pub fn integrand(&self, dim: usize) -> Result<IntegrandSpec> {
        let mut spec = match self.str("integrand.family") {
            "isotropic" => IntegrandSpec::isotropic(dim),
            "diagonal" => IntegrandSpec::diagonal(&self.list::<f64>("integrand.diagonal"))?,
            "quadratic" => IntegrandSpec::quadratic(dim, self.list("integrand.matrix"))?,
            _ => IntegrandSpec::quartic_mixture(dim, self.get("integrand.beta")?)?,
        };
        if spec.dim != dim {
            return Err(Error::Config(vec![format!("integrand: dimension {} does not match grid.dim {dim}", spec.dim)]));
        }
        let amp: f64 = self.get("integrand.modulation.amplitude")?;
        if amp != 0.0 {
            spec = spec.with_modulation(amp, self.list("integrand.modulation.wavevector"))?;
        }
        Ok(spec)
    }

    pub fn domain(&self) -> Result<Domain<f64>> {
        let grid = self.grid()?.shared();
        let amp: f64 = self.get("metric.amplitude")?;
        if amp == 0.0 {
            return Ok(Domain::flat(grid));
        }
        let k: Vec<f64> = self.list("metric.wavevector");
        let n = grid.dim();
        let lengths = grid.lengths().to_vec();
        let phi = ScalarField::from_fn(&grid, |x| {
            let arg: f64 = (0..n).map(|a| k.get(a).copied().unwrap_or(0.0) * x[a] / lengths[a]).sum();
            amp * (std::f64::consts::TAU * arg).sin()
        })?;
        Domain::with_metric(grid, ConformalMetric::from_phi(&phi)?)
    }

    pub fn params(&self) -> Result<EnergyParams<f64>> {
        let domain = self.domain()?;
        let spec = self.integrand(domain.dim())?;
        EnergyParams::new(domain, self.potential(), spec, self.get("energy.eps")?, self.get("energy.delta")?)
    }

    pub fn shape(&self) -> ShapeSpec {
        match self.str("gamma.shape") {
            "stripe" => ShapeSpec::stripe(self.get("gamma.axis").unwrap_or(1), &self.list::<f64>("gamma.offsets")),
            "ellipse" => {
                let axes: Vec<f64> = self.list("gamma.axes");
                ShapeSpec::Ellipse {
                    center: self.list("gamma.center"),
                    axes: [axes.first().copied().unwrap_or(0.0), axes.get(1).copied().unwrap_or(0.0)],
                }
            }
            _ => ShapeSpec::Ball {
                center: self.list("gamma.center"),
                radius: self.get("gamma.radius").unwrap_or(0.0),
            },
        }
    }

    pub fn gamma_rule(&self) -> Result<GammaRule> {
        Ok(match self.str("gamma.rule") {
            "fixed" => GammaRule::Fixed(self.get("gamma.value")?),
            _ => GammaRule::Log {
                factor: self.get("gamma.factor")?,
            },
        })
    }
}

/// Splits `key=value` override arguments.
pub fn parse_override(arg: &str) -> std::result::Result<(String, String), String> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got '{arg}'"))
}
