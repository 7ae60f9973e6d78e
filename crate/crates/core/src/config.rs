//! Service configuration: a TOML file overridden by `UUIS_*` environment
//! variables.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//!
//! [store]
//! path = "uuis.db"        # omit for an in-memory store
//!
//! [backup]
//! dir = "backups"
//! daily_at = "02:00"      # omit to disable automatic backups
//!
//! [search]
//! page_size = 25
//! ```
//!
//! | key               | variable               |
//! |-------------------|------------------------|
//! | `listen`          | `UUIS_LISTEN`          |
//! | `store.path`      | `UUIS_STORE_PATH`      |
//! | `backup.dir`      | `UUIS_BACKUP_DIR`      |
//! | `backup.daily_at` | `UUIS_BACKUP_DAILY_AT` |
//! | `search.page_size`| `UUIS_SEARCH_PAGE_SIZE`|

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::store::scheduler::DailySchedule;

pub const ENV_PREFIX: &str = "UUIS_";
pub const DEFAULT_PAGE_SIZE: usize = 25;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub store: StoreConfig,
    pub backup: BackupConfig,
    pub search: SearchConfig,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BackupConfig {
    pub dir: Option<PathBuf>,
    pub daily_at: Option<String>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub page_size: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            store: StoreConfig::default(),
            backup: BackupConfig::default(),
            search: SearchConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if any), then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::invalid(format!("config {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "LISTEN" => self.listen = value,
                "STORE_PATH" => self.store.path = non_empty(value).map(PathBuf::from),
                "BACKUP_DIR" => self.backup.dir = non_empty(value).map(PathBuf::from),
                "BACKUP_DAILY_AT" => self.backup.daily_at = non_empty(value),
                "SEARCH_PAGE_SIZE" => {
                    self.search.page_size = value
                        .parse()
                        .map_err(|_| Error::invalid(format!("{key}: `{value}` is not a page size")))?
                }
                _ => {}
            }
        }
        self.validate()
    }

    pub fn backup_schedule(&self) -> Result<Option<DailySchedule>> {
        self.backup.daily_at.as_deref().map(str::parse).transpose()
    }

    fn validate(&self) -> Result<()> {
        if self.search.page_size == 0 {
            return Err(Error::invalid("search.page_size must be positive"));
        }
        self.backup_schedule().map(|_| ())
    }
}

fn non_empty(s: String) -> Option<String> {
    (!s.trim().is_empty()).then_some(s)
}
