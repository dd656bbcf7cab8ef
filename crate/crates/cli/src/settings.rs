//! Effective run settings: command-line flags over a `key=value` config file
//! over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use partmatch::{GcMode, MatchStrategy};

use crate::{Failure, SharedArgs};

/// Keys a config file may set. Everything else is a usage error.
pub const KEYS: &[&str] = &[
    "dict",
    "k",
    "scheme",
    "strategy",
    "rerank",
    "seed",
    "db-size",
    "workers",
    "out",
    "gc",
    "sigma",
    "keep",
    "window",
    "stride",
    "timing",
    "max-tasks",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    Dmm,
    Imm,
    Hmm,
    Random,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dmm" => Ok(Self::Dmm),
            "imm" => Ok(Self::Imm),
            "hmm" => Ok(Self::Hmm),
            "random" => Ok(Self::Random),
            other => Err(format!("unknown scheme `{other}` (dmm, imm, hmm, random)")),
        }
    }
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dmm => "dmm",
            Self::Imm => "imm",
            Self::Hmm => "hmm",
            Self::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub dict: Option<PathBuf>,
    pub k: usize,
    /// `None` means the subcommand's default set.
    pub scheme: Option<Vec<Scheme>>,
    pub strategy: Option<MatchStrategy>,
    /// `None` means the subcommand's default depths.
    pub rerank: Option<Vec<usize>>,
    pub seed: u64,
    pub db_size: usize,
    /// 0 lets the thread pool pick.
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub gc: GcMode,
    pub sigma: Option<f64>,
    pub keep: Option<f64>,
    pub window: Option<f64>,
    pub stride: Option<f64>,
    pub timing: bool,
    pub max_tasks: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dict: None,
            k: 3,
            scheme: None,
            strategy: None,
            rerank: None,
            seed: 1,
            db_size: 100,
            workers: 0,
            out: None,
            gc: GcMode::Off,
            sigma: None,
            keep: None,
            window: None,
            stride: None,
            timing: false,
            max_tasks: None,
        }
    }
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Failure::Usage(format!(
                "{}:{}: expected `key=value`",
                origin.display(),
                i + 1
            )));
        };
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Failure::Usage(format!(
                "{}:{}: unknown key `{key}`",
                origin.display(),
                i + 1
            )));
        }
        out.insert(key, v.trim().to_owned());
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Failure::Usage(format!("invalid value `{v}` for `{key}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, Failure>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_gc(key: &str, v: &str) -> Result<GcMode, Failure> {
    match v {
        "strict" => Ok(GcMode::Strict),
        "off" => Ok(GcMode::Off),
        _ => Err(Failure::Usage(format!(
            "invalid value `{v}` for `{key}`: expected strict or off"
        ))),
    }
}

impl Settings {
    /// Applies the config file (if any), then the flags.
    pub fn resolve(args: &SharedArgs) -> Result<Self, Failure> {
        let mut s = Self::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (key, v) in parse_config_file(&text, path)? {
                s.set(&key, &v)?;
            }
        }
        let flags: [(&str, Option<String>); 16] = [
            ("dict", args.dict.as_ref().map(|p| p.display().to_string())),
            ("k", args.k.map(|v| v.to_string())),
            ("scheme", args.scheme.clone()),
            ("strategy", args.strategy.clone()),
            ("rerank", args.rerank.clone()),
            ("seed", args.seed.map(|v| v.to_string())),
            ("db-size", args.db_size.map(|v| v.to_string())),
            ("workers", args.workers.map(|v| v.to_string())),
            ("out", args.out.as_ref().map(|p| p.display().to_string())),
            ("gc", args.gc.clone()),
            ("sigma", args.sigma.map(|v| v.to_string())),
            ("keep", args.keep.map(|v| v.to_string())),
            ("window", args.window.map(|v| v.to_string())),
            ("stride", args.stride.map(|v| v.to_string())),
            ("timing", args.timing.then(|| "true".to_owned())),
            ("max-tasks", args.max_tasks.map(|v| v.to_string())),
        ];
        for (key, v) in flags {
            if let Some(v) = v {
                s.set(key, &v)?;
            }
        }
        if s.k == 0 {
            return Err(Failure::Usage("k must be at least 1".into()));
        }
        if s.db_size == 0 {
            return Err(Failure::Usage("db-size must be at least 1".into()));
        }
        Ok(s)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), Failure> {
        match key {
            "dict" => self.dict = Some(PathBuf::from(v)),
            "k" => self.k = parse(key, v)?,
            "scheme" => self.scheme = Some(parse_list(key, v)?),
            "strategy" => self.strategy = Some(parse(key, v)?),
            "rerank" => self.rerank = Some(parse_list(key, v)?),
            "seed" => self.seed = parse(key, v)?,
            "db-size" => self.db_size = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "gc" => self.gc = parse_gc(key, v)?,
            "sigma" => self.sigma = Some(parse(key, v)?),
            "keep" => self.keep = Some(parse(key, v)?),
            "window" => self.window = Some(parse(key, v)?),
            "stride" => self.stride = Some(parse(key, v)?),
            "timing" => self.timing = parse(key, v)?,
            "max-tasks" => self.max_tasks = Some(parse(key, v)?),
            _ => return Err(Failure::Usage(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// The settings as a config file that reproduces them.
    pub fn to_config_text(&self, command: &str) -> String {
        let mut s = format!("# partmatch {command}\n");
        let opt = |v: Option<String>| v.unwrap_or_default();
        let join = |v: &[String]| v.join(",");
        let rows: [(&str, String); 16] = [
            (
                "dict",
                opt(self.dict.as_ref().map(|p| p.display().to_string())),
            ),
            ("k", self.k.to_string()),
            (
                "scheme",
                opt(self
                    .scheme
                    .as_ref()
                    .map(|v| join(&v.iter().map(|x| x.name().to_owned()).collect::<Vec<_>>()))),
            ),
            ("strategy", opt(self.strategy.map(|x| x.name().to_owned()))),
            (
                "rerank",
                opt(self
                    .rerank
                    .as_ref()
                    .map(|v| join(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>()))),
            ),
            ("seed", self.seed.to_string()),
            ("db-size", self.db_size.to_string()),
            ("workers", self.workers.to_string()),
            (
                "out",
                opt(self.out.as_ref().map(|p| p.display().to_string())),
            ),
            (
                "gc",
                match self.gc {
                    GcMode::Strict => "strict".to_owned(),
                    GcMode::Off => "off".to_owned(),
                },
            ),
            ("sigma", opt(self.sigma.map(|v| v.to_string()))),
            ("keep", opt(self.keep.map(|v| v.to_string()))),
            ("window", opt(self.window.map(|v| v.to_string()))),
            ("stride", opt(self.stride.map(|v| v.to_string()))),
            ("timing", self.timing.to_string()),
            ("max-tasks", opt(self.max_tasks.map(|v| v.to_string()))),
        ];
        for (k, v) in rows {
            // Unset optional keys are commented out so the file parses back.
            if v.is_empty() {
                let _ = writeln!(s, "# {k}=");
            } else {
                let _ = writeln!(s, "{k}={v}");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let m = parse_config_file("# x\n\nk = 4 # trailing\ndb_size=50\n", Path::new("c")).unwrap();
        assert_eq!(m["k"], "4");
        assert_eq!(m["db-size"], "50");
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        assert!(matches!(
            parse_config_file("colour=red\n", Path::new("c")),
            Err(Failure::Usage(_))
        ));
        assert!(matches!(
            parse_config_file("k\n", Path::new("c")),
            Err(Failure::Usage(_))
        ));
    }

    #[test]
    fn echoed_config_parses_back_to_the_same_settings() {
        let mut s = Settings {
            k: 5,
            scheme: Some(vec![Scheme::Imm, Scheme::Hmm]),
            rerank: Some(vec![10, 20]),
            strategy: Some(MatchStrategy::MaxMax),
            gc: GcMode::Strict,
            ..Settings::default()
        };
        s.max_tasks = Some(7);
        s.window = Some(6.5);
        let text = s.to_config_text("eval");
        let mut back = Settings::default();
        for (k, v) in parse_config_file(&text, Path::new("c")).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, s);
    }
}
