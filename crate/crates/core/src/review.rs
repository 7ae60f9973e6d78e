//! Audit-log review and on-demand reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::auth::Actor;
use crate::domain::{AffiliationKind, AffiliationScope, AfflnId, ItemId, PermissionLevel, UserId};
use crate::error::{Error, Result};
use crate::lookup::{item_affln_sql, user_affln_sql};
use crate::page::{PageRequest, PageWindow, ResultPage};
use crate::render::{Document, ExportFormat, Table};
use crate::search::plan::{scope_predicate, SqlValue};
use crate::search::SearchTarget;
use crate::service::Uuis;
use crate::store::{log_from_row, AuditLogEntry};

const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Department,
    Faculty,
    University,
}

impl Grouping {
    /// The groupings open to a level: wider groupings need higher levels.
    pub fn allowed(level: PermissionLevel) -> Vec<Grouping> {
        match level {
            PermissionLevel::L0 => vec![],
            PermissionLevel::L1 => vec![Grouping::Department],
            PermissionLevel::L2 => vec![Grouping::Department, Grouping::Faculty],
            PermissionLevel::L3 => vec![Grouping::Department, Grouping::Faculty, Grouping::University],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    FieldComparison,
    EntityListing,
}

/// A countable quantity, per attributed affiliation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Items,
    ItemsInCategory(i64),
    Users,
    Locations,
    Seats,
    Capacity,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Items => f.write_str("items"),
            Metric::ItemsInCategory(c) => write!(f, "items.cat.{c}"),
            Metric::Users => f.write_str("users"),
            Metric::Locations => f.write_str("locations"),
            Metric::Seats => f.write_str("seats"),
            Metric::Capacity => f.write_str("capacity"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "items" => Metric::Items,
            "users" => Metric::Users,
            "locations" => Metric::Locations,
            "seats" => Metric::Seats,
            "capacity" => Metric::Capacity,
            _ => match s.strip_prefix("items.cat.").and_then(|n| n.parse().ok()) {
                Some(cat) => Metric::ItemsInCategory(cat),
                None => return Err(Error::InvalidMetric(s.to_string())),
            },
        })
    }
}

/// Entities a listing report can enumerate.
pub const LISTING_ENTITIES: [&str; 3] = ["users", "items", "locations"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    pub kind: ReportKind,
    /// A metric for comparisons, an entity for listings.
    pub left: String,
    #[serde(default)]
    pub right: Option<String>,
    #[serde(default = "default_grouping")]
    pub grouping: Grouping,
    /// Restricts the report to one affiliation and what lies under it.
    #[serde(default)]
    pub affln_id: Option<AfflnId>,
}

fn default_grouping() -> Grouping {
    Grouping::Department
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Report {
    pub fn to_table(&self) -> Table {
        Table {
            title: self.title.clone(),
            description: format!("{} rows", self.rows.len()),
            columns: self.columns.clone(),
            rows: self.rows.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditFilter {
    /// Inclusive lower bound, `YYYY-MM-DD` or `YYYY-MM-DD HH:MM:SS`.
    pub from: Option<String>,
    /// Inclusive upper bound; a bare date covers the whole day.
    pub to: Option<String>,
    pub actor: Option<UserId>,
    pub item: Option<ItemId>,
    pub event_prefix: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricInfo {
    pub name: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditOptions {
    pub level: PermissionLevel,
    pub scope: AffiliationScope,
    pub filters: Vec<&'static str>,
    pub report_kinds: Vec<ReportKind>,
    pub groupings: Vec<Grouping>,
    pub metrics: Vec<MetricInfo>,
    pub listing_entities: Vec<&'static str>,
    pub export_formats: Vec<&'static str>,
}

/// What `output_review` renders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ReviewSource {
    Report { spec: ReportSpec },
    Audit {
        #[serde(default)]
        filter: AuditFilter,
        #[serde(default)]
        page: Option<PageRequest>,
    },
}

fn bound(raw: &str, upper: bool) -> Result<String> {
    let raw = raw.trim();
    if let Ok(t) = NaiveDateTime::parse_from_str(raw, TIME_FORMAT) {
        return Ok(t.format(TIME_FORMAT).to_string());
    }
    let d = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| Error::invalid(format!("`{raw}` is not YYYY-MM-DD or YYYY-MM-DD HH:MM:SS")))?;
    Ok(if upper {
        format!("{} 23:59:59", d.format("%Y-%m-%d"))
    } else {
        format!("{} 00:00:00", d.format("%Y-%m-%d"))
    })
}

fn audit_where(actor: &Actor, filter: &AuditFilter) -> Result<(String, Vec<SqlValue>)> {
    let members = actor.scope_members();
    let mut parts = vec![scope_predicate(SearchTarget::Logs, actor.level(), actor.scope, &members, actor.user_id)?];
    let mut params = Vec::new();
    if let Some(from) = &filter.from {
        parts.push("t.log_time >= ?".into());
        params.push(SqlValue::Text(bound(from, false)?));
    }
    if let Some(to) = &filter.to {
        parts.push("t.log_time <= ?".into());
        params.push(SqlValue::Text(bound(to, true)?));
    }
    if let Some(a) = filter.actor {
        parts.push("t.user_id = ?".into());
        params.push(SqlValue::Integer(a));
    }
    if let Some(i) = filter.item {
        parts.push("t.item_id = ?".into());
        params.push(SqlValue::Integer(i));
    }
    if let Some(p) = filter.event_prefix.as_deref().map(str::trim).filter(|p| !p.is_empty()) {
        parts.push("substr(t.event_type, 1, ?) = ?".into());
        params.push(SqlValue::Integer(p.chars().count() as i64));
        params.push(SqlValue::Text(p.to_string()));
    }
    Ok((parts.join(" AND "), params))
}

/// `(attribution, value)` for every row a metric counts. `None` marks rows
/// with no affiliation at all.
fn metric_rows(c: &Connection, metric: Metric) -> Result<Vec<(Option<AfflnId>, i64)>> {
    let sql = match metric {
        Metric::Items => format!("SELECT {}, 1 FROM items t WHERE t.item_id <> 0", item_affln_sql("t")),
        Metric::ItemsInCategory(cat) => {
            format!("SELECT {}, 1 FROM items t WHERE t.item_id <> 0 AND t.cat_id = {cat}", item_affln_sql("t"))
        }
        Metric::Users => format!("SELECT COALESCE({}, 0), 1 FROM users t", user_affln_sql("t.user_id")),
        Metric::Locations => "SELECT t.affln_id, 1 FROM locations t".into(),
        Metric::Seats => "SELECT t.affln_id, COALESCE(t.seats, 0) FROM locations t".into(),
        Metric::Capacity => "SELECT t.affln_id, COALESCE(t.capacity, 0) FROM locations t".into(),
    };
    let mut stmt = c.prepare(&sql)?;
    let rows = stmt
        .query_map([], |r| Ok((r.get::<_, Option<i64>>(0)?, r.get::<_, i64>(1)?)))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(rows)
}

fn check_metric(c: &Connection, raw: &str) -> Result<Metric> {
    let m: Metric = raw.parse()?;
    if let Metric::ItemsInCategory(cat) = m {
        if cat == 0 || !crate::lookup::exists(c, "categories", "cat_id", cat)? {
            return Err(Error::InvalidMetric(format!("{raw}: no category {cat}")));
        }
    }
    Ok(m)
}

/// The scope an affiliation node spans.
fn node_scope(actor: &Actor, affln: AfflnId) -> Result<AffiliationScope> {
    Ok(match actor.hierarchy.get(affln)?.kind {
        AffiliationKind::University => AffiliationScope::University,
        AffiliationKind::Faculty => AffiliationScope::Faculty(affln),
        AffiliationKind::Department => AffiliationScope::Department(affln),
    })
}

struct Reach {
    scope: AffiliationScope,
}

impl Reach {
    fn new(actor: &Actor, restrict: Option<AfflnId>) -> Result<Self> {
        let scope = match restrict {
            None => actor.scope,
            Some(a) => {
                if !actor.hierarchy.contains(a) {
                    return Err(Error::InvalidReference(format!("affiliation {a}")));
                }
                actor.require_covers(a, &format!("affiliation {a}"))?;
                node_scope(actor, a)?
            }
        };
        Ok(Self { scope })
    }

    /// Rows with no affiliation are only in reach of a university-wide view.
    fn holds(&self, actor: &Actor, attr: Option<AfflnId>) -> Result<bool> {
        match (attr, self.scope) {
            (_, AffiliationScope::University) => Ok(true),
            (None, _) => Ok(false),
            (Some(a), s) => Ok(actor.hierarchy.contains(a) && actor.hierarchy.within_scope(s, a)?),
        }
    }
}

fn group_of(actor: &Actor, grouping: Grouping, attr: AfflnId) -> Result<AfflnId> {
    Ok(match grouping {
        Grouping::University => 0,
        Grouping::Department => attr,
        Grouping::Faculty => match actor.hierarchy.get(attr)?.kind {
            AffiliationKind::Department => actor.hierarchy.parent_faculty(attr)?,
            _ => attr,
        },
    })
}

fn comparison(c: &Connection, actor: &Actor, spec: &ReportSpec) -> Result<Report> {
    let left = check_metric(c, &spec.left)?;
    let right = check_metric(
        c,
        spec.right
            .as_deref()
            .ok_or_else(|| Error::InvalidMetric("a comparison needs a right-hand metric".into()))?,
    )?;
    let reach = Reach::new(actor, spec.affln_id)?;

    let mut groups: BTreeMap<AfflnId, (i64, i64)> = BTreeMap::new();
    for a in actor.hierarchy.members(reach.scope) {
        groups.entry(group_of(actor, spec.grouping, a)?).or_default();
    }
    for (side, metric) in [(0, left), (1, right)] {
        for (attr, value) in metric_rows(c, metric)? {
            if !reach.holds(actor, attr)? {
                continue;
            }
            let attr = attr.filter(|a| actor.hierarchy.contains(*a)).unwrap_or(0);
            let slot = groups.entry(group_of(actor, spec.grouping, attr)?).or_default();
            if side == 0 {
                slot.0 += value;
            } else {
                slot.1 += value;
            }
        }
    }
    let rows = groups
        .into_iter()
        .map(|(g, (l, r))| {
            let name = actor.hierarchy.get(g).map(|a| a.name.clone()).unwrap_or_default();
            vec![json!(g), json!(name), json!(l), json!(r)]
        })
        .collect();
    Ok(Report {
        title: format!("{left} vs {right} by {:?}", spec.grouping).to_lowercase(),
        columns: vec!["affln_id".into(), "affiliation".into(), left.to_string(), right.to_string()],
        rows,
    })
}

fn listing(c: &Connection, actor: &Actor, spec: &ReportSpec) -> Result<Report> {
    let entity = spec.left.trim();
    let (columns, sql): (&[&str], String) = match entity {
        "users" => (
            &["user_id", "user_code", "last_name", "first_name", "affln_id"],
            format!(
                "SELECT t.user_id, t.user_code, t.last_name, t.first_name, COALESCE({}, 0) AS affln_id FROM users t ORDER BY t.user_id",
                user_affln_sql("t.user_id")
            ),
        ),
        "items" => (
            &["item_id", "item_description", "code", "serial_number", "cat_id", "loc_id", "owner_id", "status", "affln_id"],
            format!(
                "SELECT t.item_id, t.item_description, t.code, t.serial_number, t.cat_id, t.loc_id, t.owner_id, t.status, {} AS affln_id
                 FROM items t WHERE t.item_id <> 0 ORDER BY t.item_id",
                item_affln_sql("t")
            ),
        ),
        "locations" => (
            &["loc_id", "loc_code", "loc_name", "seats", "capacity", "affln_id"],
            "SELECT t.loc_id, t.loc_code, t.loc_name, t.seats, t.capacity, t.affln_id FROM locations t ORDER BY t.loc_id".into(),
        ),
        other => return Err(Error::InvalidMetric(format!("`{other}` is not one of {}", LISTING_ENTITIES.join(", ")))),
    };
    let reach = Reach::new(actor, spec.affln_id)?;
    let all = crate::search::query_records(c, &sql, [])?;
    let last = *columns.last().expect("affln column");
    let mut rows = Vec::new();
    for rec in all {
        let attr = rec.get(last).and_then(Value::as_i64);
        if reach.holds(actor, attr)? {
            rows.push(columns.iter().map(|k| rec.get(*k).cloned().unwrap_or(Value::Null)).collect());
        }
    }
    Ok(Report {
        title: match spec.affln_id {
            Some(a) => format!("{entity} in affiliation {a}"),
            None => format!("{entity} in scope"),
        },
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

impl Uuis {
    pub fn view_audit_options(&self, token: &str) -> Result<AuditOptions> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "the review module")?;
        let cats: Vec<(i64, String)> = self.store().read(|c| {
            let mut stmt = c.prepare("SELECT cat_id, COALESCE(description, '') FROM categories WHERE cat_id <> 0 ORDER BY cat_id")?;
            let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?.collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(rows)
        })?;
        let mut metrics = vec![
            MetricInfo { name: "items".into(), description: "number of items".into() },
            MetricInfo { name: "users".into(), description: "number of users by primary role".into() },
            MetricInfo { name: "locations".into(), description: "number of locations".into() },
            MetricInfo { name: "seats".into(), description: "seats available across locations".into() },
            MetricInfo { name: "capacity".into(), description: "maximum capacity across locations".into() },
        ];
        metrics.extend(cats.into_iter().map(|(id, d)| MetricInfo {
            name: Metric::ItemsInCategory(id).to_string(),
            description: format!("number of items in category {id} ({d})"),
        }));
        Ok(AuditOptions {
            level: actor.level(),
            scope: actor.scope,
            filters: vec!["from", "to", "actor", "item", "event_prefix"],
            report_kinds: vec![ReportKind::FieldComparison, ReportKind::EntityListing],
            groupings: Grouping::allowed(actor.level()),
            metrics,
            listing_entities: LISTING_ENTITIES.to_vec(),
            export_formats: vec!["printable", "csv"],
        })
    }

    /// Log entries in the caller's scope matching `filter`, oldest first.
    pub fn audit_logs(&self, token: &str, filter: &AuditFilter, page: PageRequest) -> Result<ResultPage<AuditLogEntry>> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "reviewing audit logs")?;
        let (clause, params) = audit_where(&actor, filter)?;
        let default = self.config().search.page_size;
        self.store().read(|c| {
            let refs: Vec<&dyn rusqlite::ToSql> = params.iter().map(|p| p as &dyn rusqlite::ToSql).collect();
            let total: i64 = c.query_row(&format!("SELECT COUNT(*) FROM logs t WHERE {clause}"), refs.as_slice(), |r| r.get(0))?;
            let window = PageWindow::new(total as usize, page, default)?;
            let sql = format!(
                "SELECT t.log_id, t.log_time, t.user_id, t.item_id, t.event_type, t.content FROM logs t WHERE {clause}
                 ORDER BY t.log_id LIMIT {} OFFSET {}",
                window.size, window.offset
            );
            let mut stmt = c.prepare(&sql)?;
            let rows = stmt
                .query_map(refs.as_slice(), log_from_row)?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(window.into_page(rows))
        })
    }

    pub fn produce_report(&self, token: &str, spec: &ReportSpec) -> Result<Report> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "producing reports")?;
        if !Grouping::allowed(actor.level()).contains(&spec.grouping) {
            return Err(Error::forbidden(format!("grouping by {:?} needs a higher level", spec.grouping).to_lowercase()));
        }
        self.store().read(|c| match spec.kind {
            ReportKind::FieldComparison => comparison(c, &actor, spec),
            ReportKind::EntityListing => listing(c, &actor, spec),
        })
    }

    /// Renders a report or audit page exactly as it would be displayed.
    pub fn output_review(&self, token: &str, source: &ReviewSource, format: ExportFormat) -> Result<Document> {
        match source {
            ReviewSource::Report { spec } => Ok(self.produce_report(token, spec)?.to_table().render(format, "report")),
            ReviewSource::Audit { filter, page } => {
                let page = self.audit_logs(token, filter, page.unwrap_or_else(PageRequest::first))?;
                Ok(audit_table(&page).render(format, "audit-log"))
            }
        }
    }
}

pub fn audit_table(page: &ResultPage<AuditLogEntry>) -> Table {
    Table {
        title: "Audit log".into(),
        description: format!(
            "{} matches, page {} of {}",
            page.total_count,
            page.page_index + 1,
            page.page_count
        ),
        columns: ["log_id", "log_time", "user_id", "item_id", "event_type", "content"].map(String::from).to_vec(),
        rows: page
            .rows
            .iter()
            .map(|e| vec![json!(e.log_id), json!(e.log_time), json!(e.user_id), json!(e.item_id), json!(e.event_type), json!(e.content)])
            .collect(),
    }
}
