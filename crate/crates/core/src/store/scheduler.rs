//! Daily automatic backups.

use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration as StdDuration;

use chrono::{DateTime, Duration, NaiveTime, Utc};

use super::backup::{BackupRecord, BackupVault};
use super::Store;
use crate::error::{Error, Result};

/// A time of day (UTC) at which a backup is taken every day.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DailySchedule {
    pub at: NaiveTime,
}

impl FromStr for DailySchedule {
    type Err = Error;

    /// Accepts `HH:MM` or `HH:MM:SS`.
    fn from_str(s: &str) -> Result<Self> {
        NaiveTime::parse_from_str(s, "%H:%M:%S")
            .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
            .map(|at| Self { at })
            .map_err(|_| Error::invalid(format!("`{s}` is not a time of day")))
    }
}

impl DailySchedule {
    /// The first scheduled instant at or after `now`.
    pub fn next_at_or_after(&self, now: DateTime<Utc>) -> DateTime<Utc> {
        let today = now.date_naive().and_time(self.at).and_utc();
        if today >= now {
            today
        } else {
            today + Duration::days(1)
        }
    }
}

/// Handle to the background worker. Dropping it stops the worker.
pub struct ScheduledBackup {
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
    vault: Arc<BackupVault>,
}

impl ScheduledBackup {
    /// Archives produced by this schedule so far.
    pub fn runs(&self) -> Vec<BackupRecord> {
        self.vault
            .records()
            .into_iter()
            .filter(|r| r.trigger == "auto")
            .collect()
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

impl Drop for ScheduledBackup {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Starts a worker that checks the store's clock every `poll` of real time
/// and takes a backup once the scheduled instant has passed. Each run writes
/// a `backup.auto` audit entry.
pub fn schedule_automatic_backup(
    store: Arc<Store>,
    vault: Arc<BackupVault>,
    schedule: DailySchedule,
    poll: StdDuration,
) -> ScheduledBackup {
    let stop = Arc::new(AtomicBool::new(false));
    let worker = {
        let stop = Arc::clone(&stop);
        let vault = Arc::clone(&vault);
        std::thread::Builder::new()
            .name("uuis-backup".into())
            .spawn(move || {
                let mut due = schedule.next_at_or_after(store.now());
                while !stop.load(Ordering::SeqCst) {
                    std::thread::sleep(poll);
                    let now = store.now();
                    if now < due {
                        continue;
                    }
                    run_once(&store, &vault, due);
                    due = schedule.next_at_or_after(now + Duration::seconds(1));
                }
            })
            .expect("spawn backup worker")
    };
    ScheduledBackup {
        stop,
        worker: Some(worker),
        vault,
    }
}

fn run_once(store: &Store, vault: &BackupVault, due: DateTime<Utc>) {
    match vault.take(store, "auto") {
        Ok((record, _)) => {
            let content = format!(
                "scheduled {} archive {} {}",
                crate::clock::format_ts(due),
                record.archive_id,
                record.checksum
            );
            if let Err(e) = store.write(|tx| tx.record_log(None, None, "backup.auto", &content)) {
                tracing::error!("could not audit automatic backup: {e}");
            }
        }
        Err(e) => tracing::error!("automatic backup failed: {e}"),
    }
}
