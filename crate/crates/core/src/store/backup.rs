//! Logical dump and restore.
//!
//! Archive layout (UTF-8 text):
//!
//! ```text
//! UUIS-BACKUP 1
//! created_at 2026-10-18 09:00:00
//! checksum sha256:<hex of payload>
//!
//! table acls
//! schema "CREATE TABLE acls (...)"
//! columns ["user_role_id","permission"]
//! row [1,2048]
//! end
//! ...
//! sequences [["items",36],...]
//! ```
//!
//! Everything after the blank line is the payload; the checksum covers it
//! byte for byte. Rows are JSON arrays in rowid order, so dumping a restored
//! store reproduces the payload exactly.

use std::fs;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use rusqlite::types::{Value, ValueRef};
use rusqlite::{params_from_iter, Connection, TransactionBehavior};
use serde::Serialize;
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use super::{ErrorDraft, Schema, Severity, Store};
use crate::clock::format_ts;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "UUIS-BACKUP";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackupArchive {
    pub format_version: u32,
    pub created_at: String,
    pub checksum: String,
    pub payload: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableDump {
    pub name: String,
    pub create_sql: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Json>>,
}

/// Parsed payload.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dump {
    pub tables: Vec<TableDump>,
    pub sequences: Vec<(String, i64)>,
}

impl BackupArchive {
    pub fn to_bytes(&self) -> Vec<u8> {
        format!(
            "{MAGIC} {}\ncreated_at {}\nchecksum {}\n\n{}",
            self.format_version, self.created_at, self.checksum, self.payload
        )
        .into_bytes()
    }

    /// Parses the header. The checksum is checked by [`verify`](Self::verify).
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::CorruptArchive("not UTF-8".into()))?;
        let (header, payload) = text
            .split_once("\n\n")
            .ok_or_else(|| Error::CorruptArchive("missing header separator".into()))?;
        let mut lines = header.lines();
        let version = lines
            .next()
            .and_then(|l| l.strip_prefix(MAGIC))
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::CorruptArchive("bad magic line".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::CorruptArchive(format!("unsupported format version {version}")));
        }
        let created_at = lines
            .next()
            .and_then(|l| l.strip_prefix("created_at "))
            .ok_or_else(|| Error::CorruptArchive("missing created_at".into()))?;
        let checksum = lines
            .next()
            .and_then(|l| l.strip_prefix("checksum "))
            .ok_or_else(|| Error::CorruptArchive("missing checksum".into()))?;
        Ok(Self {
            format_version: version,
            created_at: created_at.to_string(),
            checksum: checksum.to_string(),
            payload: payload.to_string(),
        })
    }

    pub fn verify(&self) -> Result<()> {
        if checksum(&self.payload) != self.checksum {
            return Err(Error::CorruptArchive("checksum mismatch".into()));
        }
        Ok(())
    }

    pub fn dump(&self) -> Result<Dump> {
        self.verify()?;
        parse_payload(&self.payload)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::BackupFailed(format!("{}: {e}", path.display())))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::not_found(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

fn checksum(payload: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(payload.as_bytes())))
}

impl Store {
    /// Takes a consistent snapshot of every table.
    pub fn backup(&self) -> Result<BackupArchive> {
        let created_at = format_ts(self.now());
        let payload = self.read(render_payload)?;
        Ok(BackupArchive {
            format_version: FORMAT_VERSION,
            created_at,
            checksum: checksum(&payload),
            payload,
        })
    }

    /// Replaces the store's contents with the archive. The archive is fully
    /// validated before the store is touched; a store that already holds
    /// tables is only replaced when `overwrite` is set.
    pub fn restore(&self, archive: &BackupArchive, overwrite: bool) -> Result<Schema> {
        let dump = archive.dump()?;
        self.with_raw(|conn| {
            let existing = super::user_tables(conn)?;
            if !existing.is_empty() && !overwrite {
                return Err(Error::OverwriteRequired);
            }
            let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
            for t in &existing {
                tx.execute_batch(&format!("DROP TABLE \"{t}\""))?;
            }
            let has_seq: bool = tx.query_row(
                "SELECT COUNT(*) > 0 FROM sqlite_master WHERE name = 'sqlite_sequence'",
                [],
                |r| r.get(0),
            )?;
            if has_seq {
                tx.execute("DELETE FROM sqlite_sequence", [])?;
            }
            for table in &dump.tables {
                tx.execute_batch(&table.create_sql)?;
                if table.rows.is_empty() {
                    continue;
                }
                let cols = table
                    .columns
                    .iter()
                    .map(|c| format!("\"{c}\""))
                    .collect::<Vec<_>>()
                    .join(", ");
                let marks = vec!["?"; table.columns.len()].join(", ");
                let mut stmt = tx.prepare(&format!("INSERT INTO \"{}\" ({cols}) VALUES ({marks})", table.name))?;
                for row in &table.rows {
                    let values: Vec<Value> = row.iter().map(json_to_sql).collect::<Result<_>>()?;
                    stmt.execute(params_from_iter(values))?;
                }
            }
            if !dump.sequences.is_empty() {
                tx.execute("DELETE FROM sqlite_sequence", [])?;
                for (name, seq) in &dump.sequences {
                    tx.execute(
                        "INSERT INTO sqlite_sequence (name, seq) VALUES (?1, ?2)",
                        rusqlite::params![name, seq],
                    )?;
                }
            }
            tx.commit()?;
            let tables = super::user_tables(conn)?;
            Ok(Schema {
                tables: super::core_tables(&tables),
                created: true,
            })
        })
    }
}

fn render_payload(conn: &Connection) -> Result<String> {
    let mut out = String::new();
    let mut stmt = conn.prepare(
        "SELECT name, sql FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
    )?;
    let tables = stmt
        .query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    for (name, sql) in tables {
        let mut rows_stmt = conn.prepare(&format!("SELECT * FROM \"{name}\" ORDER BY rowid"))?;
        let columns: Vec<String> = rows_stmt.column_names().into_iter().map(String::from).collect();
        out.push_str(&format!("table {name}\n"));
        out.push_str(&format!("schema {}\n", Json::String(sql)));
        out.push_str(&format!("columns {}\n", serde_json::to_string(&columns).expect("strings serialize")));
        let n = columns.len();
        let mut rows = rows_stmt.query([])?;
        while let Some(row) = rows.next()? {
            let values: Vec<Json> = (0..n)
                .map(|i| row.get_ref(i).map(sql_to_json))
                .collect::<rusqlite::Result<_>>()?;
            out.push_str(&format!("row {}\n", Json::Array(values)));
        }
        out.push_str("end\n");
    }
    let has_seq: bool = conn.query_row(
        "SELECT COUNT(*) > 0 FROM sqlite_master WHERE name = 'sqlite_sequence'",
        [],
        |r| r.get(0),
    )?;
    let sequences: Vec<(String, i64)> = if has_seq {
        let mut s = conn.prepare("SELECT name, seq FROM sqlite_sequence ORDER BY name")?;
        let v = s
            .query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        v
    } else {
        Vec::new()
    };
    out.push_str(&format!(
        "sequences {}\n",
        serde_json::to_string(&sequences).expect("pairs serialize")
    ));
    Ok(out)
}

fn parse_payload(payload: &str) -> Result<Dump> {
    let corrupt = |what: &str| Error::CorruptArchive(what.to_string());
    let mut dump = Dump::default();
    let mut current: Option<TableDump> = None;
    for line in payload.lines() {
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        match (tag, current.as_mut()) {
            ("table", None) => {
                current = Some(TableDump {
                    name: rest.to_string(),
                    create_sql: String::new(),
                    columns: Vec::new(),
                    rows: Vec::new(),
                })
            }
            ("schema", Some(t)) => {
                t.create_sql = serde_json::from_str(rest).map_err(|_| corrupt("bad schema line"))?
            }
            ("columns", Some(t)) => {
                t.columns = serde_json::from_str(rest).map_err(|_| corrupt("bad columns line"))?
            }
            ("row", Some(t)) => {
                let row: Vec<Json> = serde_json::from_str(rest).map_err(|_| corrupt("bad row line"))?;
                if row.len() != t.columns.len() {
                    return Err(corrupt("row width differs from column count"));
                }
                t.rows.push(row);
            }
            ("end", Some(_)) => dump.tables.push(current.take().expect("checked above")),
            ("sequences", None) => {
                dump.sequences = serde_json::from_str(rest).map_err(|_| corrupt("bad sequences line"))?
            }
            _ => return Err(corrupt(&format!("unexpected line `{tag}`"))),
        }
    }
    if current.is_some() {
        return Err(corrupt("unterminated table section"));
    }
    if dump.tables.iter().any(|t| t.create_sql.is_empty() || t.columns.is_empty()) {
        return Err(corrupt("table section without schema"));
    }
    Ok(dump)
}

fn sql_to_json(v: ValueRef<'_>) -> Json {
    match v {
        ValueRef::Null => Json::Null,
        ValueRef::Integer(i) => Json::from(i),
        ValueRef::Real(f) => serde_json::json!({ "real": f }),
        ValueRef::Text(t) => Json::String(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => serde_json::json!({ "blob": hex::encode(b) }),
    }
}

fn json_to_sql(v: &Json) -> Result<Value> {
    let bad = || Error::CorruptArchive("unsupported cell value".into());
    Ok(match v {
        Json::Null => Value::Null,
        Json::Number(n) => Value::Integer(n.as_i64().ok_or_else(bad)?),
        Json::String(s) => Value::Text(s.clone()),
        Json::Object(m) => match (m.get("real"), m.get("blob")) {
            (Some(r), None) => Value::Real(r.as_f64().ok_or_else(bad)?),
            (None, Some(Json::String(h))) => Value::Blob(hex::decode(h).map_err(|_| bad())?),
            _ => return Err(bad()),
        },
        _ => return Err(bad()),
    })
}

/// Where archives go once taken: an optional directory on disk plus an
/// in-memory index of every archive produced in this process.
#[derive(Debug, Default)]
pub struct BackupVault {
    dir: Option<PathBuf>,
    records: Mutex<Vec<BackupRecord>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BackupRecord {
    pub archive_id: String,
    pub created_at: String,
    pub checksum: String,
    pub bytes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub trigger: String,
}

impl BackupVault {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Takes a backup and files it. Failures are reported to the error log.
    pub fn take(&self, store: &Store, trigger: &str) -> Result<(BackupRecord, BackupArchive)> {
        let result = store.backup().and_then(|archive| {
            let seq = self.records.lock().len() + 1;
            let archive_id = format!(
                "uuis-{}-{seq:04}",
                archive.created_at.replace([' ', ':'], "").replace('-', "")
            );
            let path = match &self.dir {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(|e| Error::BackupFailed(format!("{}: {e}", dir.display())))?;
                    let p = dir.join(format!("{archive_id}.uuisdump"));
                    archive.write_to(&p)?;
                    Some(p)
                }
                None => None,
            };
            let record = BackupRecord {
                archive_id,
                created_at: archive.created_at.clone(),
                checksum: archive.checksum.clone(),
                bytes: archive.to_bytes().len(),
                path,
                trigger: trigger.to_string(),
            };
            self.records.lock().push(record.clone());
            Ok((record, archive))
        });
        if let Err(e) = &result {
            store.capture_error(ErrorDraft {
                occurred_at: store.now(),
                source: "backup".into(),
                severity: Severity::Critical,
                message: format!("{trigger} backup failed"),
                detail: Some(e.to_string()),
                affln_id: None,
            });
            if !matches!(e, Error::BackupFailed(_)) {
                return Err(Error::BackupFailed(e.to_string()));
            }
        }
        result
    }

    pub fn records(&self) -> Vec<BackupRecord> {
        self.records.lock().clone()
    }
}
