//! The relational store: schema, transactions, the audit log, and the
//! out-of-band error outbox.

pub mod backup;
pub mod scheduler;
pub mod schema;

use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, MutexGuard};
use rusqlite::{params, Connection, TransactionBehavior};
use serde::{Deserialize, Serialize};

use crate::clock::{format_ts, Clock};
use crate::domain::{ItemId, UserId};
use crate::error::{Error, Result};
use crate::password;

pub use schema::{CORE_TABLES, EXTENSION_TABLES};

/// Upper bound on `logs.content`.
pub const LOG_CONTENT_MAX: usize = 2000;
/// Appended to `event_type` when the content had to be cut.
pub const TRUNCATED_MARKER: &str = "+truncated";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLogEntry {
    pub log_id: i64,
    pub log_time: String,
    pub user_id: Option<UserId>,
    pub item_id: Option<ItemId>,
    pub event_type: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Schema {
    /// Core tables present, sorted.
    pub tables: Vec<String>,
    /// Whether this call created them.
    pub created: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
    Critical,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
            Severity::Critical => "critical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "warning" => Some(Severity::Warning),
            "error" => Some(Severity::Error),
            "critical" => Some(Severity::Critical),
            _ => None,
        }
    }
}

/// An error report waiting to be written.
#[derive(Clone, Debug)]
pub struct ErrorDraft {
    pub occurred_at: DateTime<Utc>,
    pub source: String,
    pub severity: Severity,
    pub message: String,
    pub detail: Option<String>,
    pub affln_id: Option<i64>,
}

struct Inner {
    conn: Connection,
    last_log_time: Option<DateTime<Utc>>,
}

pub struct Store {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
    outbox: Mutex<Vec<ErrorDraft>>,
    armed_fault: Mutex<Option<&'static str>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").finish_non_exhaustive()
    }
}

impl Store {
    pub fn open_in_memory(clock: Arc<dyn Clock>) -> Result<Self> {
        Self::from_connection(Connection::open_in_memory()?, clock)
    }

    pub fn open(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::from_connection(conn, clock)
    }

    fn from_connection(conn: Connection, clock: Arc<dyn Clock>) -> Result<Self> {
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        Ok(Self {
            inner: Mutex::new(Inner {
                conn,
                last_log_time: None,
            }),
            clock,
            outbox: Mutex::new(Vec::new()),
            armed_fault: Mutex::new(None),
        })
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    /// Creates the tables and seed rows. Re-running on an initialized store
    /// changes nothing; a store holding only some of the tables is refused.
    pub fn initialize_schema(&self) -> Result<Schema> {
        let mut inner = self.inner.lock();
        let present = user_tables(&inner.conn)?;
        let expected: Vec<&str> = CORE_TABLES.iter().chain(EXTENSION_TABLES.iter()).copied().collect();
        let found: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|t| present.iter().any(|p| p == t))
            .collect();
        if found.len() == expected.len() {
            return Ok(Schema {
                tables: core_tables(&present),
                created: false,
            });
        }
        if !present.is_empty() {
            let missing: Vec<_> = expected.iter().filter(|t| !found.contains(t)).collect();
            return Err(Error::MigrationConflict(format!("missing tables {missing:?}")));
        }
        let tx = inner.conn.transaction()?;
        tx.execute_batch(schema::DDL)?;
        tx.execute_batch(schema::SEED)?;
        let admin_hash = password::hash_with_salt(
            schema::SEED_ADMIN_PASSWORD,
            &password::seed_salt(schema::SEED_ADMIN_CODE),
        );
        tx.execute(
            "INSERT INTO users (user_id, user_code, last_name, first_name, password, date_modified, login_attempts, loc_id)
             VALUES (1, ?1, 'System', 'Administrator', ?2, '2010-04-22 02:14:42', NULL, NULL)",
            params![schema::SEED_ADMIN_CODE, admin_hash],
        )?;
        tx.commit()?;
        Ok(Schema {
            tables: core_tables(&user_tables(&inner.conn)?),
            created: true,
        })
    }

    /// Runs `f` in a read transaction (a consistent snapshot).
    pub fn read<T>(&self, f: impl FnOnce(&Connection) -> Result<T>) -> Result<T> {
        let mut inner = self.inner.lock();
        self.flush_outbox(&mut inner);
        let result = {
            let tx = inner.conn.transaction_with_behavior(TransactionBehavior::Deferred)?;
            let out = f(&tx);
            tx.finish()?;
            out
        };
        self.file_failure("store.read", &result);
        self.flush_outbox(&mut inner);
        result
    }

    /// Runs `f` in a write transaction. Commits when `f` succeeds, rolls back
    /// otherwise. A transaction that changed rows without writing an audit
    /// entry is refused and rolled back.
    pub fn write<T>(&self, f: impl FnOnce(&mut Tx<'_>) -> Result<T>) -> Result<T> {
        let mut guard = self.inner.lock();
        self.flush_outbox(&mut guard);
        let inner = &mut *guard;
        let now = self.clock.now();
        let result = (|| {
            let before: i64 = inner.conn.query_row("SELECT total_changes()", [], |r| r.get(0))?;
            let tx = inner.conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
            let mut wrapped = Tx {
                tx,
                now,
                last_log_time: inner.last_log_time,
                logs_written: 0,
                armed_fault: &self.armed_fault,
            };
            let out = f(&mut wrapped)?;
            let after: i64 = wrapped.tx.query_row("SELECT total_changes()", [], |r| r.get(0))?;
            if after > before && wrapped.logs_written == 0 {
                return Err(Error::Storage("mutation without audit entry".into()));
            }
            let last = wrapped.last_log_time;
            wrapped.tx.commit()?;
            inner.last_log_time = last;
            Ok(out)
        })();
        self.file_failure("store.write", &result);
        self.flush_outbox(&mut guard);
        result
    }

    /// Queues a report for persistence faults; business refusals are not errors.
    fn file_failure<T>(&self, source: &str, result: &Result<T>) {
        if let Err(e) = result {
            if e.code() == "internal" {
                tracing::warn!(source, "{e}");
                self.outbox.lock().push(ErrorDraft {
                    occurred_at: self.clock.now(),
                    source: source.into(),
                    severity: Severity::Error,
                    message: "transaction failed and was rolled back".into(),
                    detail: Some(e.to_string()),
                    affln_id: None,
                });
            }
        }
    }

    /// Queues an error report. It is written as soon as the store is free,
    /// outside any business transaction, so a failing transaction cannot take
    /// the report down with it.
    pub fn capture_error(&self, draft: ErrorDraft) {
        tracing::warn!(source = %draft.source, severity = draft.severity.as_str(), "{}", draft.message);
        self.outbox.lock().push(draft);
        if let Some(mut inner) = self.inner.try_lock() {
            self.flush_outbox(&mut inner);
        }
    }

    fn flush_outbox(&self, inner: &mut MutexGuard<'_, Inner>) {
        let pending: Vec<ErrorDraft> = std::mem::take(&mut *self.outbox.lock());
        if pending.is_empty() {
            return;
        }
        let write = |conn: &Connection| -> rusqlite::Result<()> {
            let mut stmt = conn.prepare(
                "INSERT INTO ext_error_reports (occurred_at, source, severity, message, detail, affln_id)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            )?;
            for d in &pending {
                stmt.execute(params![
                    format_ts(d.occurred_at),
                    d.source,
                    d.severity.as_str(),
                    d.message,
                    d.detail,
                    d.affln_id
                ])?;
            }
            Ok(())
        };
        if let Err(e) = write(&inner.conn) {
            // Store not initialized yet, or the disk is gone; keep them.
            tracing::error!("could not persist error reports: {e}");
            self.outbox.lock().extend(pending);
        }
    }

    /// Arms a one-shot fault that fires the next time a transaction reaches
    /// the named point. Testing hook for atomicity checks.
    pub fn inject_fault(&self, point: &'static str) {
        *self.armed_fault.lock() = Some(point);
    }

    pub fn clear_fault(&self) {
        *self.armed_fault.lock() = None;
    }

    /// Names of all non-internal tables (core and extension), sorted.
    pub fn table_names(&self) -> Result<Vec<String>> {
        let inner = self.inner.lock();
        user_tables(&inner.conn)
    }

    pub fn core_table_names(&self) -> Result<Vec<String>> {
        self.table_names().map(|t| core_tables(&t))
    }

    pub fn row_count(&self, table: &str) -> Result<i64> {
        let tables = self.table_names()?;
        if !tables.iter().any(|t| t == table) {
            return Err(Error::not_found(format!("table {table}")));
        }
        self.read(|c| Ok(c.query_row(&format!("SELECT COUNT(*) FROM \"{table}\""), [], |r| r.get(0))?))
    }

    pub(crate) fn with_raw<T>(&self, f: impl FnOnce(&mut Connection) -> Result<T>) -> Result<T> {
        let mut guard = self.inner.lock();
        let out = f(&mut guard.conn);
        if out.is_ok() {
            guard.last_log_time = None;
        }
        self.flush_outbox(&mut guard);
        out
    }
}

/// A write transaction plus the audit hook.
pub struct Tx<'a> {
    tx: rusqlite::Transaction<'a>,
    now: DateTime<Utc>,
    last_log_time: Option<DateTime<Utc>>,
    logs_written: usize,
    armed_fault: &'a Mutex<Option<&'static str>>,
}

impl std::ops::Deref for Tx<'_> {
    type Target = Connection;
    fn deref(&self) -> &Connection {
        &self.tx
    }
}

impl Tx<'_> {
    pub fn now(&self) -> DateTime<Utc> {
        self.now
    }

    pub fn now_str(&self) -> String {
        format_ts(self.now)
    }

    /// Appends an audit entry inside this transaction. Content longer than
    /// [`LOG_CONTENT_MAX`] characters is cut and the event type marked.
    pub fn record_log(
        &mut self,
        actor: Option<UserId>,
        subject: Option<ItemId>,
        event_type: &str,
        content: &str,
    ) -> Result<AuditLogEntry> {
        let (content, event_type) = if content.chars().count() > LOG_CONTENT_MAX {
            let cut: String = content.chars().take(LOG_CONTENT_MAX).collect();
            (cut, format!("{event_type}{TRUNCATED_MARKER}"))
        } else {
            (content.to_string(), event_type.to_string())
        };
        let at = match self.last_log_time {
            Some(last) if last > self.now => last,
            _ => self.now,
        };
        let log_time = format_ts(at);
        self.tx.execute(
            "INSERT INTO logs (log_time, user_id, item_id, event_type, content) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![log_time, actor, subject, event_type, content],
        )?;
        self.last_log_time = Some(at);
        self.logs_written += 1;
        Ok(AuditLogEntry {
            log_id: self.tx.last_insert_rowid(),
            log_time,
            user_id: actor,
            item_id: subject,
            event_type,
            content,
        })
    }

    /// Fails with [`Error::InjectedFault`] if a fault is armed for `point`.
    pub fn fault_point(&self, point: &'static str) -> Result<()> {
        let mut armed = self.armed_fault.lock();
        if *armed == Some(point) {
            *armed = None;
            return Err(Error::InjectedFault(point));
        }
        Ok(())
    }
}

fn user_tables(conn: &Connection) -> Result<Vec<String>> {
    let mut stmt = conn.prepare(
        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
    )?;
    let names = stmt
        .query_map([], |r| r.get::<_, String>(0))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(names)
}

fn core_tables(all: &[String]) -> Vec<String> {
    all.iter()
        .filter(|t| !t.starts_with(schema::EXTENSION_PREFIX))
        .cloned()
        .collect()
}

#[cfg(test)]
fn fetch_log(conn: &Connection, log_id: i64) -> Result<Option<AuditLogEntry>> {
    use rusqlite::OptionalExtension;
    Ok(conn
        .query_row(
            "SELECT log_id, log_time, user_id, item_id, event_type, content FROM logs WHERE log_id = ?1",
            [log_id],
            log_from_row,
        )
        .optional()?)
}

pub(crate) fn log_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<AuditLogEntry> {
    Ok(AuditLogEntry {
        log_id: r.get(0)?,
        log_time: r.get::<_, Option<String>>(1)?.unwrap_or_default(),
        user_id: r.get(2)?,
        item_id: r.get(3)?,
        event_type: r.get::<_, Option<String>>(4)?.unwrap_or_default(),
        content: r.get::<_, Option<String>>(5)?.unwrap_or_default(),
    })
}
