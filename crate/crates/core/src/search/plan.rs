//! Searchable-field registry and SQL generation.

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::{Operator, SearchParameter, SearchTarget};
use crate::domain::{AffiliationScope, PermissionLevel};
use crate::error::{Error, Result};
use crate::lookup::{item_affln_sql, user_affln_sql};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Integer,
    Text,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Column {
    Direct(&'static str),
    /// Any property value of the item.
    ItemProperty,
}

#[derive(Clone, Copy, Debug)]
pub struct Field {
    pub name: &'static str,
    pub kind: FieldKind,
    pub(crate) column: Column,
}

const fn int(name: &'static str) -> Field {
    Field { name, kind: FieldKind::Integer, column: Column::Direct(name) }
}

const fn text(name: &'static str) -> Field {
    Field { name, kind: FieldKind::Text, column: Column::Direct(name) }
}

pub(crate) struct TargetSpec {
    pub table: &'static str,
    pub key: &'static str,
    /// Columns returned in result rows, in order.
    pub columns: &'static [&'static str],
    pub fields: &'static [Field],
    /// Fields a basic query matches against.
    pub basic: &'static [&'static str],
    pub min_level: PermissionLevel,
}

const ITEM_FIELDS: &[Field] = &[
    int("item_id"),
    text("item_description"),
    text("code"),
    text("serial_number"),
    int("cat_id"),
    int("owner_id"),
    int("loc_id"),
    text("status"),
    int("group_id"),
    text("date_modified"),
    Field { name: "property", kind: FieldKind::Text, column: Column::ItemProperty },
];

const USER_FIELDS: &[Field] = &[int("user_id"), text("user_code"), text("last_name"), text("first_name")];

const REQUEST_FIELDS: &[Field] = &[
    int("req_id"),
    int("requester"),
    int("request_type"),
    int("submitted_by"),
    int("item_id"),
    text("description"),
    text("date_submitted"),
    int("approved_by"),
    text("date_approved"),
    text("status"),
    text("date_modified"),
];

const LOG_FIELDS: &[Field] = &[
    int("log_id"),
    text("log_time"),
    int("user_id"),
    int("item_id"),
    text("event_type"),
    text("content"),
];

static ITEMS: TargetSpec = TargetSpec {
    table: "items",
    key: "item_id",
    columns: &[
        "item_id",
        "item_description",
        "code",
        "group_id",
        "serial_number",
        "cat_id",
        "owner_id",
        "loc_id",
        "date_modified",
        "status",
    ],
    fields: ITEM_FIELDS,
    basic: &["item_description", "code", "serial_number", "property"],
    min_level: PermissionLevel::L1,
};

static USERS: TargetSpec = TargetSpec {
    table: "users",
    key: "user_id",
    columns: &["user_id", "user_code", "last_name", "first_name", "date_modified", "login_attempts", "loc_id"],
    fields: USER_FIELDS,
    basic: &["user_code", "last_name", "first_name"],
    min_level: PermissionLevel::L1,
};

static REQUESTS: TargetSpec = TargetSpec {
    table: "requests",
    key: "req_id",
    columns: &[
        "req_id",
        "requester",
        "request_type",
        "submitted_by",
        "item_id",
        "description",
        "date_submitted",
        "approved_by",
        "date_approved",
        "status",
        "date_modified",
    ],
    fields: REQUEST_FIELDS,
    basic: &["description", "status"],
    min_level: PermissionLevel::L0,
};

static LOGS: TargetSpec = TargetSpec {
    table: "logs",
    key: "log_id",
    columns: &["log_id", "log_time", "user_id", "item_id", "event_type", "content"],
    fields: LOG_FIELDS,
    basic: &["event_type", "content"],
    min_level: PermissionLevel::L1,
};

impl SearchTarget {
    pub(crate) fn spec(self) -> &'static TargetSpec {
        match self {
            SearchTarget::Items => &ITEMS,
            SearchTarget::Users => &USERS,
            SearchTarget::Requests => &REQUESTS,
            SearchTarget::Logs => &LOGS,
        }
    }

    /// The advanced-search fields of this target.
    pub fn fields(self) -> &'static [Field] {
        self.spec().fields
    }

    pub fn field(self, name: &str) -> Result<&'static Field> {
        self.fields()
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::InvalidField(format!("{}.{name}", self.as_str())))
    }

    /// SQL yielding the affiliation a row of this target is attributed to,
    /// with the row aliased `t`.
    pub(crate) fn affiliation_sql(self) -> String {
        match self {
            SearchTarget::Items => item_affln_sql("t"),
            SearchTarget::Users => format!("COALESCE({}, 0)", user_affln_sql("t.user_id")),
            SearchTarget::Requests => format!("COALESCE({}, 0)", user_affln_sql("t.requester")),
            // An entry about an item follows the item; anything else follows its actor.
            SearchTarget::Logs => format!(
                "COALESCE((SELECT {} FROM items li WHERE li.item_id = t.item_id), {}, 0)",
                item_affln_sql("li"),
                user_affln_sql("t.user_id")
            ),
        }
    }
}

/// A bound SQL parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SqlValue {
    Integer(i64),
    Text(String),
}

impl rusqlite::ToSql for SqlValue {
    fn to_sql(&self) -> rusqlite::Result<rusqlite::types::ToSqlOutput<'_>> {
        match self {
            SqlValue::Integer(i) => i.to_sql(),
            SqlValue::Text(s) => s.to_sql(),
        }
    }
}

/// A WHERE fragment and its parameters.
#[derive(Clone, Debug, Default)]
pub(crate) struct Fragment {
    pub sql: String,
    pub params: Vec<SqlValue>,
}

fn comparison(field: &Field, op: Operator, value: &str, params: &mut Vec<SqlValue>) -> Result<String> {
    let subject = match field.column {
        Column::Direct(c) => format!("t.{c}"),
        Column::ItemProperty => "p.prop_value".to_string(),
    };
    let cmp = match op {
        Operator::Contains => {
            params.push(SqlValue::Text(value.to_string()));
            format!("instr(lower(CAST({subject} AS TEXT)), lower(?)) > 0")
        }
        _ => {
            let sym = match op {
                Operator::Eq => "=",
                Operator::Neq => "<>",
                Operator::Lt => "<",
                Operator::Gt => ">",
                Operator::Contains => unreachable!(),
            };
            params.push(match field.kind {
                FieldKind::Integer => SqlValue::Integer(value.trim().parse().map_err(|_| {
                    Error::invalid(format!("{} compares numbers; `{value}` is not one", field.name))
                })?),
                FieldKind::Text => SqlValue::Text(value.to_string()),
            });
            format!("{subject} {sym} ?")
        }
    };
    Ok(match field.column {
        Column::Direct(_) => cmp,
        Column::ItemProperty => {
            format!("EXISTS (SELECT 1 FROM itemproperties p WHERE p.item_id = t.item_id AND {cmp})")
        }
    })
}

pub(crate) fn basic_predicate(target: SearchTarget, text: &str) -> Result<Fragment> {
    let mut params = Vec::new();
    let mut parts = Vec::new();
    for name in target.spec().basic {
        let field = target.field(name)?;
        parts.push(comparison(field, Operator::Contains, text, &mut params)?);
    }
    Ok(Fragment {
        sql: format!("({})", parts.join(" OR ")),
        params,
    })
}

pub(crate) fn advanced_predicate(target: SearchTarget, parameters: &[SearchParameter], expr: &Expr) -> Result<Fragment> {
    fn walk(
        target: SearchTarget,
        parameters: &[SearchParameter],
        expr: &Expr,
        params: &mut Vec<SqlValue>,
    ) -> Result<String> {
        Ok(match expr {
            Expr::Param(i) => {
                let p = &parameters[*i];
                format!("({})", comparison(target.field(&p.field)?, p.op, &p.value, params)?)
            }
            Expr::And(v) | Expr::Or(v) => {
                let word = if matches!(expr, Expr::And(_)) { " AND " } else { " OR " };
                let parts = v
                    .iter()
                    .map(|e| walk(target, parameters, e, params))
                    .collect::<Result<Vec<_>>>()?;
                format!("({})", parts.join(word))
            }
        })
    }
    let mut params = Vec::new();
    let sql = walk(target, parameters, expr, &mut params)?;
    Ok(Fragment { sql, params })
}

/// The restriction every plan carries, from the caller's level and scope.
pub(crate) fn scope_predicate(
    target: SearchTarget,
    level: PermissionLevel,
    scope: AffiliationScope,
    members: &[i64],
    user_id: i64,
) -> Result<String> {
    let spec = target.spec();
    if level < spec.min_level {
        return Err(Error::forbidden(format!("searching {} requires level {}", target.as_str(), spec.min_level)));
    }
    let mut parts = Vec::new();
    if target == SearchTarget::Items {
        parts.push("t.item_id <> 0".to_string());
    }
    if level == PermissionLevel::L0 {
        // Only requests reach here: the caller's own.
        parts.push(format!("t.requester = {user_id}"));
    } else if scope != AffiliationScope::University {
        let list = members.iter().map(i64::to_string).collect::<Vec<_>>().join(", ");
        parts.push(format!("{} IN ({list})", target.affiliation_sql()));
    }
    Ok(if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join(" AND ")
    })
}
