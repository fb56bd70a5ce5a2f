//! Key=value config files and flag resolution.
//!
//! A config file may set any long flag (key = the flag name without the
//! leading dashes, e.g. `iterations=2000` or `no-standardize-x=true`).
//! Command-line flags always override file values. Keys are validated
//! against the full flag vocabulary so typos fail loudly; keys that do not
//! apply to the command being run are simply unused.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// CLI failure: either a usage problem (exit 2) or an error from the
/// underlying toolkit (exit 3 for data problems, 4 for numeric ones).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(bmaster_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(err) => write!(f, "{err}"),
        }
    }
}

impl From<bmaster_core::Error> for CliError {
    fn from(err: bmaster_core::Error) -> Self {
        CliError::Core(err)
    }
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Every long flag a config file may set.
const VOCABULARY: &[&str] = &[
    "x",
    "y",
    "mask",
    "iterations",
    "burnin",
    "thin",
    "seed",
    "threads",
    "alpha",
    "a1",
    "b1",
    "a2",
    "b2",
    "no-standardize-x",
    "no-standardize-y",
    "clr",
    "prevalence",
    "min-abundance",
    "transpose-x",
    "transpose-y",
    "out",
    "p",
    "q",
    "n",
    "rho",
    "pi-row",
    "pi-col",
    "noise-sd",
    "replicates",
    "sizes",
    "n-sweep",
    "archive",
    "btrue",
    "x-test",
    "y-test",
    "subset",
];

/// Parsed config file contents.
#[derive(Debug, Default)]
pub struct FileConfig {
    map: HashMap<String, String>,
}

impl FileConfig {
    /// Load and validate a config file; `None` yields an empty config.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Core(bmaster_core::Error::Io(format!(
                "cannot read config file {}: {e}",
                path.display()
            )))
        })?;
        let mut map = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config file {} line {}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_owned();
            if !VOCABULARY.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "config file {} line {}: unknown key '{key}'",
                    path.display(),
                    lineno + 1
                )));
            }
            map.insert(key, value.trim().to_owned());
        }
        Ok(Self { map })
    }

    /// File value for `key`, parsed as `T`.
    pub fn parsed<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::usage(format!("config key '{key}': cannot parse value '{raw}'"))
            }),
        }
    }

    /// File value for `key` as a boolean (`true/false/1/0`).
    pub fn boolean(&self, key: &str) -> CliResult<Option<bool>> {
        match self.map.get(key).map(String::as_str) {
            None => Ok(None),
            Some("true") | Some("1") => Ok(Some(true)),
            Some("false") | Some("0") => Ok(Some(false)),
            Some(other) => Err(CliError::usage(format!(
                "config key '{key}': expected true/false, got '{other}'"
            ))),
        }
    }

    /// File value for `key` as a path.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.map.get(key).map(PathBuf::from)
    }

    /// File value for `key` as a comma-separated list of `T`.
    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|piece| {
                    piece.trim().parse::<T>().map_err(|_| {
                        CliError::usage(format!(
                            "config key '{key}': cannot parse list item '{}'",
                            piece.trim()
                        ))
                    })
                })
                .collect::<CliResult<Vec<T>>>()
                .map(Some),
        }
    }
}

/// Flag value, else file value, else default.
pub fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag value, else file value, else a usage error naming the flag.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> CliResult<T> {
    flag.or(file)
        .ok_or_else(|| CliError::usage(format!("missing required flag --{name}")))
}

/// A boolean switch: set on the command line, else file value, else false.
pub fn resolve_switch(flag: bool, file: Option<bool>) -> bool {
    if flag {
        true
    } else {
        file.unwrap_or(false)
    }
}
