//! Flat `key = value` run configuration.
//!
//! Values are numbers, comma-separated number lists (optionally in brackets)
//! or strings (optionally double-quoted). `#` starts a comment. Unknown keys
//! and repeated keys are errors.

use std::collections::BTreeMap;
use std::path::Path;

use crate::annealer::AnnealSchedule;
use crate::error::{Error, Result};
use crate::expansion::ExpansionContext;
use crate::model::{LatticeSpec, DEFAULT_KAPPA_RATIO};

use super::peaks::DEFAULT_THRESHOLD;

pub const KNOWN_KEYS: &[&str] = &[
    "sites",
    "atoms",
    "v2",
    "repulsion",
    "kappa_ratio",
    "spacing",
    "offsets",
    "occupations",
    "v2_list",
    "seed",
    "workers",
    "grid_points",
    "u_periods",
    "threshold",
    "t0",
    "cooling",
    "stages",
    "sweeps_per_stage",
    "restarts",
    "mass",
    "time",
    "hbar",
    "sigma",
    "profile_points",
    "level",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifyLevel {
    #[default]
    Fast,
    Full,
}

impl std::str::FromStr for VerifyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Self::Fast),
            "full" => Ok(Self::Full),
            other => Err(Error::Config(format!("level must be fast or full, got {other:?}"))),
        }
    }
}

impl std::fmt::Display for VerifyLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fast => "fast",
            Self::Full => "full",
        })
    }
}

/// Annealing settings; unset fields fall back to [`AnnealSchedule::for_instance`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleSettings {
    pub t0: Option<f64>,
    pub cooling: Option<f64>,
    pub stages: Option<usize>,
    pub sweeps_per_stage: Option<usize>,
    pub restarts: Option<usize>,
}

impl ScheduleSettings {
    pub fn schedule(&self, spec: &LatticeSpec, atoms: u32, seed: u64) -> AnnealSchedule {
        let mut s = AnnealSchedule::for_instance(spec, atoms, seed);
        if let Some(t0) = self.t0 {
            s.t0 = t0;
        }
        if let Some(c) = self.cooling {
            s.cooling = c;
        }
        if let Some(n) = self.stages {
            s.stages = n;
        }
        if let Some(n) = self.sweeps_per_stage {
            s.sweeps_per_stage = n;
        }
        if let Some(n) = self.restarts {
            s.restarts = n;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sites: usize,
    pub atoms: u32,
    pub v2: f64,
    /// On-site repulsion U, in the same units as V₂.
    pub repulsion: f64,
    pub kappa_ratio: f64,
    pub spacing: f64,
    pub offsets: Vec<f64>,
    /// Explicit Fock state for `correlate`; annealed when absent.
    pub occupations: Option<Vec<u32>>,
    pub v2_list: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
    pub grid_points: usize,
    /// u grid spans (0, 2π·u_periods].
    pub u_periods: f64,
    pub threshold: f64,
    pub anneal: ScheduleSettings,
    pub mass: f64,
    pub time: f64,
    pub hbar: f64,
    /// Envelope width; 20·M·d when absent.
    pub sigma: Option<f64>,
    pub profile_points: usize,
    pub level: VerifyLevel,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sites: 130,
            atoms: 170,
            v2: 9.9,
            repulsion: 1.0,
            kappa_ratio: DEFAULT_KAPPA_RATIO,
            spacing: 1.0,
            offsets: Vec::new(),
            occupations: None,
            v2_list: vec![0.0, 2.0, 5.0, 9.9, 15.0],
            seed: 1,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            grid_points: 4096,
            u_periods: 3.0,
            threshold: DEFAULT_THRESHOLD,
            anneal: ScheduleSettings::default(),
            mass: 1.0,
            time: 1.0,
            hbar: 1.0,
            sigma: None,
            profile_points: crate::expansion::DEFAULT_PROFILE_POINTS,
            level: VerifyLevel::Fast,
        }
    }
}

/// Raw entries of a config file, keyed by name, with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, RawValue)>,
}

#[derive(Debug, Clone, PartialEq)]
enum RawValue {
    Quoted(String),
    Bare(String),
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {lineno}: unknown key {key:?}")));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("line {lineno}: missing value for {key}")));
            }
            let raw = match value.strip_prefix('"') {
                Some(rest) => RawValue::Quoted(
                    rest.strip_suffix('"')
                        .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated string")))?
                        .to_string(),
                ),
                None => RawValue::Bare(value.to_string()),
            };
            if entries.insert(key.to_string(), (lineno, raw)).is_some() {
                return Err(Error::Config(format!("line {lineno}: duplicate key {key}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn bare(&self, key: &str) -> Result<Option<(usize, &str)>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, RawValue::Bare(s))) => Ok(Some((*line, s.as_str()))),
            Some((line, RawValue::Quoted(_))) => Err(Error::Config(format!("line {line}: {key} expects a number"))),
        }
    }

    fn number<T: std::str::FromStr>(&self, key: &str, kind: &str) -> Result<Option<T>> {
        let Some((line, s)) = self.bare(key)? else { return Ok(None) };
        s.parse().map(Some).map_err(|_| Error::Config(format!("line {line}: {key} expects {kind}, got {s:?}")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str, kind: &str) -> Result<Option<Vec<T>>> {
        let Some((line, s)) = self.bare(key)? else { return Ok(None) };
        let inner = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')).unwrap_or(s).trim();
        if inner.is_empty() {
            return Ok(Some(Vec::new()));
        }
        inner
            .split(',')
            .map(|item| {
                let item = item.trim();
                item.parse()
                    .map_err(|_| Error::Config(format!("line {line}: {key} expects a list of {kind}, got {item:?}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn string(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| match v {
            RawValue::Quoted(s) | RawValue::Bare(s) => s.as_str(),
        })
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut c = Self::default();
        macro_rules! set {
            ($field:expr, $key:literal, $kind:literal) => {
                if let Some(v) = raw.number($key, $kind)? {
                    $field = v;
                }
            };
        }
        set!(c.sites, "sites", "an integer");
        set!(c.atoms, "atoms", "an integer");
        set!(c.v2, "v2", "a number");
        set!(c.repulsion, "repulsion", "a number");
        set!(c.kappa_ratio, "kappa_ratio", "a number");
        set!(c.spacing, "spacing", "a number");
        set!(c.seed, "seed", "an unsigned 64-bit integer");
        set!(c.workers, "workers", "an integer");
        set!(c.grid_points, "grid_points", "an integer");
        set!(c.u_periods, "u_periods", "a number");
        set!(c.threshold, "threshold", "a number");
        set!(c.mass, "mass", "a number");
        set!(c.time, "time", "a number");
        set!(c.hbar, "hbar", "a number");
        set!(c.profile_points, "profile_points", "an integer");
        if let Some(v) = raw.list("offsets", "numbers")? {
            c.offsets = v;
        }
        if let Some(v) = raw.list("v2_list", "numbers")? {
            c.v2_list = v;
        }
        c.occupations = raw.list("occupations", "integers")?;
        c.sigma = raw.number("sigma", "a number")?;
        c.anneal = ScheduleSettings {
            t0: raw.number("t0", "a number")?,
            cooling: raw.number("cooling", "a number")?,
            stages: raw.number("stages", "an integer")?,
            sweeps_per_stage: raw.number("sweeps_per_stage", "an integer")?,
            restarts: raw.number("restarts", "an integer")?,
        };
        if let Some(level) = raw.string("level") {
            c.level = level.parse()?;
        }
        Ok(c)
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.grid_points < 3 {
            return bad(format!("grid_points must be >= 3, got {}", self.grid_points));
        }
        if !(self.u_periods > 0.0 && self.u_periods.is_finite()) {
            return bad(format!("u_periods must be > 0, got {}", self.u_periods));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return bad(format!("threshold must be >= 0, got {}", self.threshold));
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if self.profile_points < 2 {
            return bad(format!("profile_points must be >= 2, got {}", self.profile_points));
        }
        if self.v2_list.windows(2).any(|w| w[1] < w[0]) {
            return bad("v2_list must be ascending".into());
        }
        if let Some(occ) = &self.occupations {
            if occ.len() != self.sites {
                return bad(format!("occupations has {} entries but sites = {}", occ.len(), self.sites));
            }
        }
        self.lattice()?;
        self.anneal.schedule(&self.lattice()?, self.atoms, self.seed).validate()?;
        Ok(())
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        self.lattice_with_v2(self.v2)
    }

    pub fn lattice_with_v2(&self, v2: f64) -> Result<LatticeSpec> {
        let mut spec = LatticeSpec::new(self.sites, self.repulsion, v2)?.with_kappa_ratio(self.kappa_ratio)?;
        spec.spacing = self.spacing;
        if !self.offsets.is_empty() {
            spec = spec.with_offsets(self.offsets.clone())?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn expansion(&self) -> Result<ExpansionContext> {
        let sigma = self.sigma.unwrap_or(20.0 * self.sites as f64 * self.spacing);
        ExpansionContext::new(self.mass, self.time, self.hbar, self.spacing, sigma, self.sites)
    }

    pub fn u_max(&self) -> f64 {
        std::f64::consts::TAU * self.u_periods
    }

    /// Every parameter as `(key, value)`, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let a = &self.anneal;
        let out = vec![
            ("sites", self.sites.to_string()),
            ("atoms", self.atoms.to_string()),
            ("v2", self.v2.to_string()),
            ("repulsion", self.repulsion.to_string()),
            ("kappa_ratio", self.kappa_ratio.to_string()),
            ("spacing", self.spacing.to_string()),
            ("offsets", join(&self.offsets)),
            (
                "occupations",
                self.occupations
                    .as_ref()
                    .map_or("annealed".into(), |o| o.iter().map(u32::to_string).collect::<Vec<_>>().join(",")),
            ),
            ("v2_list", join(&self.v2_list)),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("grid_points", self.grid_points.to_string()),
            ("u_periods", self.u_periods.to_string()),
            ("threshold", self.threshold.to_string()),
            ("t0", opt(a.t0.map(|v| v.to_string()))),
            ("cooling", opt(a.cooling.map(|v| v.to_string()))),
            ("stages", opt(a.stages.map(|v| v.to_string()))),
            ("sweeps_per_stage", opt(a.sweeps_per_stage.map(|v| v.to_string()))),
            ("restarts", opt(a.restarts.map(|v| v.to_string()))),
            ("mass", self.mass.to_string()),
            ("time", self.time.to_string()),
            ("hbar", self.hbar.to_string()),
            ("sigma", opt(self.sigma.map(|v| v.to_string()))),
            ("profile_points", self.profile_points.to_string()),
            ("level", self.level.to_string()),
        ];
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
