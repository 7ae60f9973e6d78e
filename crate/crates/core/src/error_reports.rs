//! Captured error reports: listing, printing and annotation, for holders of
//! the system-administrator bit.

use chrono::NaiveDate;
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::auth::Actor;
use crate::domain::{AffiliationScope, AfflnId, PermissionLevel, PermissionSignature, UserId};
use crate::error::{Error, Result};
use crate::page::{PageRequest, PageWindow, ResultPage};
use crate::render::{escape_html, html_page, Document};
use crate::search::plan::SqlValue;
use crate::service::Uuis;
use crate::store::Severity;

pub const ANNOTATION_MAX: usize = 2000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Annotation {
    pub annotation_id: i64,
    pub author_id: UserId,
    pub created_at: String,
    pub comment: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorReport {
    pub error_id: i64,
    pub occurred_at: String,
    pub source: String,
    pub severity: Severity,
    pub message: String,
    pub detail: Option<String>,
    /// `None` for system-wide faults, visible to every error manager.
    pub affln_id: Option<AfflnId>,
    pub annotations: Vec<Annotation>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorConstraints {
    pub severity: Option<Severity>,
    pub source_prefix: Option<String>,
    /// Case-insensitive substring of message or detail.
    pub text: Option<String>,
    /// `YYYY-MM-DD`, inclusive.
    pub from: Option<String>,
    pub to: Option<String>,
}

/// Whether a role's signature admits it to error management.
pub fn may_manage_errors(signature: PermissionSignature) -> bool {
    signature.level() >= PermissionLevel::L1 && signature.grants(PermissionSignature::SYSADMIN).unwrap_or(false)
}

fn gate(actor: &Actor) -> Result<()> {
    if may_manage_errors(actor.role.effective_signature) {
        Ok(())
    } else {
        Err(Error::forbidden("error management requires the system administrator privilege"))
    }
}

fn visible(actor: &Actor, affln: Option<AfflnId>) -> Result<bool> {
    match affln {
        None => Ok(true),
        Some(a) => Ok(actor.hierarchy.contains(a) && actor.covers(a)?),
    }
}

fn scope_clause(actor: &Actor) -> String {
    if actor.scope == AffiliationScope::University {
        return "1".into();
    }
    let list = actor.scope_members().iter().map(i64::to_string).collect::<Vec<_>>().join(", ");
    format!("(affln_id IS NULL OR affln_id IN ({list}))")
}

fn day(raw: &str, upper: bool) -> Result<String> {
    let d = NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
        .map_err(|_| Error::invalid(format!("`{raw}` is not a YYYY-MM-DD date")))?;
    Ok(format!("{} {}", d.format("%Y-%m-%d"), if upper { "23:59:59" } else { "00:00:00" }))
}

fn constraint_clause(c: &ErrorConstraints) -> Result<(Vec<String>, Vec<SqlValue>)> {
    let (mut parts, mut params) = (Vec::new(), Vec::new());
    if let Some(s) = c.severity {
        parts.push("severity = ?".to_string());
        params.push(SqlValue::Text(s.as_str().into()));
    }
    if let Some(p) = c.source_prefix.as_deref().map(str::trim).filter(|p| !p.is_empty()) {
        parts.push("substr(source, 1, ?) = ?".into());
        params.push(SqlValue::Integer(p.chars().count() as i64));
        params.push(SqlValue::Text(p.into()));
    }
    if let Some(t) = c.text.as_deref().map(str::trim).filter(|t| !t.is_empty()) {
        parts.push("(instr(lower(message), lower(?)) > 0 OR instr(lower(COALESCE(detail, '')), lower(?)) > 0)".into());
        params.push(SqlValue::Text(t.into()));
        params.push(SqlValue::Text(t.into()));
    }
    if let Some(f) = &c.from {
        parts.push("occurred_at >= ?".into());
        params.push(SqlValue::Text(day(f, false)?));
    }
    if let Some(t) = &c.to {
        parts.push("occurred_at <= ?".into());
        params.push(SqlValue::Text(day(t, true)?));
    }
    Ok((parts, params))
}

const REPORT_SELECT: &str = "SELECT error_id, occurred_at, source, severity, message, detail, affln_id FROM ext_error_reports";

fn report_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<ErrorReport> {
    let severity: String = r.get(3)?;
    Ok(ErrorReport {
        error_id: r.get(0)?,
        occurred_at: r.get(1)?,
        source: r.get(2)?,
        severity: Severity::parse(&severity).unwrap_or(Severity::Error),
        message: r.get(4)?,
        detail: r.get(5)?,
        affln_id: r.get(6)?,
        annotations: Vec::new(),
    })
}

fn with_annotations(c: &Connection, mut report: ErrorReport) -> Result<ErrorReport> {
    let mut stmt = c.prepare(
        "SELECT annotation_id, author_id, created_at, comment FROM ext_error_annotations WHERE error_id = ?1 ORDER BY annotation_id",
    )?;
    report.annotations = stmt
        .query_map([report.error_id], |r| {
            Ok(Annotation { annotation_id: r.get(0)?, author_id: r.get(1)?, created_at: r.get(2)?, comment: r.get(3)? })
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(report)
}

fn load_visible(c: &Connection, actor: &Actor, id: i64) -> Result<ErrorReport> {
    let report = c
        .query_row(&format!("{REPORT_SELECT} WHERE error_id = ?1"), [id], report_from_row)
        .optional()?
        .ok_or_else(|| Error::not_found(format!("error report {id}")))?;
    if !visible(actor, report.affln_id)? {
        return Err(Error::forbidden(format!("error report {id} is outside your affiliation scope")));
    }
    with_annotations(c, report)
}

impl Uuis {
    /// Reports visible to the caller matching `constraints`, newest first.
    pub fn list_errors(&self, token: &str, constraints: &ErrorConstraints, page: PageRequest) -> Result<ResultPage<ErrorReport>> {
        let actor = self.actor(token)?;
        gate(&actor)?;
        let (mut parts, params) = constraint_clause(constraints)?;
        parts.push(scope_clause(&actor));
        let clause = parts.join(" AND ");
        let default = self.config().search.page_size;
        self.store().read(|c| {
            let refs: Vec<&dyn rusqlite::ToSql> = params.iter().map(|p| p as &dyn rusqlite::ToSql).collect();
            let total: i64 =
                c.query_row(&format!("SELECT COUNT(*) FROM ext_error_reports WHERE {clause}"), refs.as_slice(), |r| r.get(0))?;
            let window = PageWindow::new(total as usize, page, default)?;
            let mut stmt = c.prepare(&format!(
                "{REPORT_SELECT} WHERE {clause} ORDER BY error_id DESC LIMIT {} OFFSET {}",
                window.size, window.offset
            ))?;
            let rows = stmt.query_map(refs.as_slice(), report_from_row)?.collect::<rusqlite::Result<Vec<_>>>()?;
            let rows = rows.into_iter().map(|r| with_annotations(c, r)).collect::<Result<Vec<_>>>()?;
            Ok(window.into_page(rows))
        })
    }

    pub fn get_error(&self, token: &str, id: i64) -> Result<ErrorReport> {
        let actor = self.actor(token)?;
        gate(&actor)?;
        self.store().read(|c| load_visible(c, &actor, id))
    }

    /// A printable document with one section per report, in the given order.
    pub fn print_errors(&self, token: &str, ids: &[i64]) -> Result<Document> {
        let actor = self.actor(token)?;
        gate(&actor)?;
        let reports = self
            .store()
            .read(|c| ids.iter().map(|&id| load_visible(c, &actor, id)).collect::<Result<Vec<_>>>())?;
        let mut body = format!("<p>{} reports</p>\n", reports.len());
        for r in &reports {
            body.push_str(&format!(
                "<section><h2>Error {} ({})</h2>\n<p>{} at {}; affiliation {}</p>\n<p>{}</p>\n",
                r.error_id,
                r.severity.as_str(),
                escape_html(&r.source),
                escape_html(&r.occurred_at),
                r.affln_id.map_or_else(|| "none".to_string(), |a| a.to_string()),
                escape_html(&r.message)
            ));
            if let Some(d) = &r.detail {
                body.push_str(&format!("<pre>{}</pre>\n", escape_html(d)));
            }
            if !r.annotations.is_empty() {
                body.push_str("<ol>\n");
                for a in &r.annotations {
                    body.push_str(&format!(
                        "<li>user {} at {}: {}</li>\n",
                        a.author_id,
                        escape_html(&a.created_at),
                        escape_html(&a.comment)
                    ));
                }
                body.push_str("</ol>\n");
            }
            body.push_str("</section>\n");
        }
        Ok(Document {
            content_type: "text/html; charset=utf-8",
            filename: "errors.html".into(),
            body: html_page("Error reports", &body),
        })
    }

    pub fn annotate_error(&self, token: &str, id: i64, comment: &str) -> Result<ErrorReport> {
        let actor = self.actor(token)?;
        gate(&actor)?;
        let comment = comment.trim();
        if comment.is_empty() {
            return Err(Error::invalid("the comment is empty"));
        }
        if comment.chars().count() > ANNOTATION_MAX {
            return Err(Error::invalid(format!("the comment exceeds {ANNOTATION_MAX} characters")));
        }
        self.store().write(|tx| {
            load_visible(tx, &actor, id)?;
            tx.execute(
                "INSERT INTO ext_error_annotations (error_id, author_id, created_at, comment) VALUES (?1, ?2, ?3, ?4)",
                params![id, actor.user_id, tx.now_str(), comment],
            )?;
            tx.record_log(Some(actor.user_id), None, "error.annotate", &format!("error report {id}: {comment}"))?;
            load_visible(tx, &actor, id)
        })
    }
}
