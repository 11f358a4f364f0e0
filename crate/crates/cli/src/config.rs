//! Line-oriented model configuration.
//!
//! ```text
//! # comment
//! model = risk            # risk | direct | moments | markov
//! X = exp(2.0)
//! Y = exp(1.0)
//! c = 2.0
//! level = 10
//! horizon = 200
//! ```
//!
//! Distributions are `exp(rate)`, `gamma(shape, rate)`, `uniform(lo, hi)` and
//! `det(v)`. A direct model takes `T`, `X` and an optional `first` of
//! `ordinary`, `equilibrium` or `modified(<dist>)`; `X = prop(a)` sets `X = aT`.
//! A moments model lists `mu_T`, `mu_X`, `var_T`, `var_X`, `cov_XT` and
//! optionally all of `h30`, `h21`, `h12`, `h03`. A markov model lists
//! `states`, rows `P[i] = p0, p1, ...`, transition laws `T[i,j]` and `X[i,j]`
//! (`*` for every target state), `initial` and `reference`.

use std::collections::BTreeMap;
use std::path::Path;

use compsum::basis::{BasisSpec, DistributionSpec, FirstInterval, MomentSet, Reward, ThirdOrder};
use compsum::modular::MarkovModulatedBasis;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Basis(BasisSpec),
    Moments(MomentSet),
    Markov(MarkovModulatedBasis),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model: Model,
    /// Hex SHA-256 of the file contents.
    pub hash: String,
    values: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(i + 1, "expected `key = value`"))?;
            let key: String = k.chars().filter(|c| !c.is_whitespace()).collect();
            if values.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(bad(i + 1, &format!("duplicate key `{key}`")));
            }
        }
        let mut cfg = Config { model: Model::Moments(empty_moments()), hash: hex(&Sha256::digest(text.as_bytes())), values };
        cfg.model = match cfg.required("model")?.as_str() {
            "risk" => Model::Basis(cfg.risk()?),
            "direct" => Model::Basis(cfg.direct()?),
            "moments" => Model::Moments(cfg.moments()?),
            "markov" => Model::Markov(cfg.markov()?),
            other => return Err(cfg.err("model", &format!("unknown model `{other}`"))),
        };
        Ok(cfg)
    }

    /// Optional numeric key.
    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => parse_f64(v).map(Some).ok_or_else(|| bad(*line, &format!("`{key}` is not a number"))),
        }
    }

    fn required(&self, key: &str) -> Result<String> {
        self.values.get(key).map(|(_, v)| v.clone()).ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
    }

    fn required_number(&self, key: &str) -> Result<f64> {
        self.number(key)?.ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
    }

    fn err(&self, key: &str, msg: &str) -> CliError {
        match self.values.get(key) {
            Some((line, _)) => bad(*line, msg),
            None => CliError::Config(msg.to_string()),
        }
    }

    fn dist(&self, key: &str) -> Result<DistributionSpec> {
        let v = self.required(key)?;
        parse_dist(&v).map_err(|m| self.err(key, &m))
    }

    fn risk(&self) -> Result<BasisSpec> {
        Ok(BasisSpec::risk(self.dist("X")?, self.dist("Y")?, self.required_number("c")?)?)
    }

    fn direct(&self) -> Result<BasisSpec> {
        let t = self.dist("T")?;
        let x = self.required("X")?;
        let reward = parse_reward(&x).map_err(|m| self.err("X", &m))?;
        let first = match self.values.get("first") {
            None => FirstInterval::Ordinary,
            Some((line, v)) => parse_first(v).map_err(|m| bad(*line, &m))?,
        };
        let b = BasisSpec::Direct { t, x: reward, first };
        b.validate()?;
        Ok(b)
    }

    fn moments(&self) -> Result<MomentSet> {
        let keys = ["h30", "h21", "h12", "h03"];
        let given: Vec<Option<f64>> = keys.iter().map(|k| self.number(k)).collect::<Result<_>>()?;
        let third = match given.as_slice() {
            [Some(h30), Some(h21), Some(h12), Some(h03)] => Some(ThirdOrder { h30: *h30, h21: *h21, h12: *h12, h03: *h03 }),
            [None, None, None, None] => None,
            _ => return Err(CliError::Config("give all of h30, h21, h12, h03 or none".into())),
        };
        let m = MomentSet {
            mu_t: self.required_number("mu_T")?,
            mu_x: self.required_number("mu_X")?,
            var_t: self.required_number("var_T")?,
            var_x: self.required_number("var_X")?,
            cov_xt: self.required_number("cov_XT")?,
            third,
        };
        m.validate()?;
        Ok(m)
    }

    fn markov(&self) -> Result<MarkovModulatedBasis> {
        let n = self.required_number("states")?;
        if !(n >= 1.0 && n.fract() == 0.0 && n <= 64.0) {
            return Err(self.err("states", "`states` must be an integer in 1..=64"));
        }
        let n = n as usize;
        let mut transition = Vec::with_capacity(n);
        for i in 0..n {
            let key = format!("P[{i}]");
            let row = self.required(&key)?;
            let parsed: Option<Vec<f64>> = row.split(',').map(|s| parse_f64(s.trim())).collect();
            match parsed {
                Some(r) if r.len() == n => transition.push(r),
                _ => return Err(self.err(&key, &format!("`{key}` must list {n} probabilities"))),
            }
        }
        let mut t_dist = vec![vec![None; n]; n];
        let mut x_dist = vec![vec![None; n]; n];
        for (key, (line, v)) in &self.values {
            let (name, i, j) = match parse_cell(key, n) {
                Some(c) => c,
                None => continue,
            };
            let targets: Vec<usize> = j.map_or_else(|| (0..n).collect(), |j| vec![j]);
            for j in targets {
                // An explicit `[i,j]` entry wins over `[i,*]`.
                let explicit = key.ends_with(&format!(",{j}]"));
                if name == 'T' {
                    let d = parse_dist(v).map_err(|m| bad(*line, &m))?;
                    if explicit || t_dist[i][j].is_none() {
                        t_dist[i][j] = Some(d);
                    }
                } else {
                    let r = parse_reward(v).map_err(|m| bad(*line, &m))?;
                    if explicit || x_dist[i][j].is_none() {
                        x_dist[i][j] = Some(r);
                    }
                }
            }
        }
        let b = MarkovModulatedBasis {
            transition,
            t_dist: fill(t_dist, "T")?,
            x_dist: fill(x_dist, "X")?,
            initial: self.index("initial", n, 0)?,
            reference: self.index("reference", n, 0)?,
        };
        b.validate()?;
        Ok(b)
    }

    fn index(&self, key: &str, n: usize, default: usize) -> Result<usize> {
        match self.number(key)? {
            None => Ok(default),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && (v as usize) < n => Ok(v as usize),
            Some(_) => Err(self.err(key, &format!("`{key}` must be a state index below {n}"))),
        }
    }
}

fn fill<T>(table: Vec<Vec<Option<T>>>, name: &str) -> Result<Vec<Vec<T>>> {
    table
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(j, cell)| cell.ok_or_else(|| CliError::Config(format!("missing `{name}[{i},{j}]`"))))
                .collect()
        })
        .collect()
}

fn empty_moments() -> MomentSet {
    MomentSet { mu_t: 0.0, mu_x: 0.0, var_t: 0.0, var_x: 0.0, cov_xt: 0.0, third: None }
}

fn bad(line: usize, msg: &str) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// `T[i,j]`, `T[i,*]`, `X[i,j]` or `X[i,*]`.
fn parse_cell(key: &str, n: usize) -> Option<(char, usize, Option<usize>)> {
    let name = key.chars().next()?;
    if name != 'T' && name != 'X' {
        return None;
    }
    let inner = key[1..].strip_prefix('[')?.strip_suffix(']')?;
    let (i, j) = inner.split_once(',')?;
    let i: usize = i.parse().ok().filter(|i| *i < n)?;
    let j = match j {
        "*" => None,
        s => Some(s.parse().ok().filter(|j| *j < n)?),
    };
    Some((name, i, j))
}

fn call(s: &str) -> std::result::Result<(&str, Vec<f64>), String> {
    let s = s.trim();
    let (name, rest) = s.split_once('(').ok_or_else(|| format!("expected `name(args)`, got `{s}`"))?;
    let args = rest.strip_suffix(')').ok_or_else(|| format!("missing `)` in `{s}`"))?;
    let values = args
        .split(',')
        .map(|a| parse_f64(a).ok_or_else(|| format!("bad number `{}` in `{s}`", a.trim())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((name.trim(), values))
}

pub fn parse_dist(s: &str) -> std::result::Result<DistributionSpec, String> {
    let (name, a) = call(s)?;
    let d = match (name, a.as_slice()) {
        ("exp", [rate]) => DistributionSpec::exp(*rate),
        ("gamma", [shape, rate]) => DistributionSpec::gamma(*shape, *rate),
        ("uniform", [lo, hi]) => DistributionSpec::uniform(*lo, *hi),
        ("det", [v]) => DistributionSpec::det(*v),
        _ => return Err(format!("unknown distribution `{s}`")),
    };
    d.validate().map_err(|e| e.to_string())?;
    Ok(d)
}

fn parse_reward(s: &str) -> std::result::Result<Reward, String> {
    match call(s)? {
        ("prop", a) if a.len() == 1 => Ok(Reward::Proportional(a[0])),
        _ => parse_dist(s).map(Reward::Independent),
    }
}

fn parse_first(s: &str) -> std::result::Result<FirstInterval, String> {
    match s.trim() {
        "ordinary" => Ok(FirstInterval::Ordinary),
        "equilibrium" => Ok(FirstInterval::Equilibrium),
        other => {
            let inner = other
                .strip_prefix("modified(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| format!("unknown first interval `{other}`"))?;
            parse_dist(inner).map(FirstInterval::Modified)
        }
    }
}
