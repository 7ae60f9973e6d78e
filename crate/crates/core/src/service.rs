use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;

use crate::auth::SessionRegistry;
use crate::clock::{Clock, SystemClock};
use crate::config::Config;
use crate::error::Result;
use crate::store::backup::BackupVault;
use crate::store::scheduler::{schedule_automatic_backup, ScheduledBackup};
use crate::store::{ErrorDraft, Severity, Store};

/// The service: one store, its sessions and its backup vault. Cheap to clone;
/// every operation is a method taking the caller's session token.
#[derive(Clone)]
pub struct Uuis {
    pub(crate) shared: Arc<Shared>,
}

pub(crate) struct Shared {
    pub(crate) store: Arc<Store>,
    pub(crate) sessions: SessionRegistry,
    pub(crate) vault: Arc<BackupVault>,
    pub(crate) config: Config,
    /// Outstanding backup confirmation tokens, keyed by token, valued by the
    /// session that asked.
    pub(crate) confirmations: Mutex<HashMap<String, String>>,
}

impl std::fmt::Debug for Uuis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Uuis").field("config", &self.shared.config).finish_non_exhaustive()
    }
}

impl Uuis {
    /// Wraps an existing store, initializing its schema if needed.
    pub fn new(store: Arc<Store>, config: Config) -> Result<Self> {
        store.initialize_schema()?;
        let vault = Arc::new(BackupVault::new(config.backup.dir.clone()));
        Ok(Self {
            shared: Arc::new(Shared {
                store,
                sessions: SessionRegistry::default(),
                vault,
                config,
                confirmations: Mutex::new(HashMap::new()),
            }),
        })
    }

    /// Opens the store named by `config.store.path`, or an in-memory one.
    pub fn open(config: Config, clock: Arc<dyn Clock>) -> Result<Self> {
        let store = match &config.store.path {
            Some(path) => Store::open(path, clock)?,
            None => Store::open_in_memory(clock)?,
        };
        Self::new(Arc::new(store), config)
    }

    /// A seeded in-memory instance with default configuration.
    pub fn in_memory() -> Result<Self> {
        Self::open(Config::default(), Arc::new(SystemClock))
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.shared.store
    }

    pub fn config(&self) -> &Config {
        &self.shared.config
    }

    pub fn vault(&self) -> &Arc<BackupVault> {
        &self.shared.vault
    }

    /// Starts the daily backup worker if `backup.daily_at` is configured.
    pub fn start_backup_schedule(&self, poll: Duration) -> Result<Option<ScheduledBackup>> {
        Ok(self.shared.config.backup_schedule()?.map(|schedule| {
            schedule_automatic_backup(
                Arc::clone(&self.shared.store),
                Arc::clone(&self.shared.vault),
                schedule,
                poll,
            )
        }))
    }

    /// Files an error report without touching the caller's transaction.
    pub(crate) fn report(&self, source: &str, severity: Severity, message: String, detail: Option<String>, affln_id: Option<i64>) {
        let store = &self.shared.store;
        store.capture_error(ErrorDraft {
            occurred_at: store.now(),
            source: source.into(),
            severity,
            message,
            detail,
            affln_id,
        });
    }
}
