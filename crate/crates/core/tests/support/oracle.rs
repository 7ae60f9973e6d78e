//! A second, deliberately naive model of visibility and search, built from
//! raw table reads. It shares no code with the service's SQL generation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde_json::{Map, Value};
use uuis::Uuis;

pub type Row = Map<String, Value>;

pub const ITEM_COLUMNS: &[&str] =
    &["item_id", "item_description", "code", "group_id", "serial_number", "cat_id", "owner_id", "loc_id", "date_modified", "status"];
pub const USER_COLUMNS: &[&str] = &["user_id", "user_code", "last_name", "first_name", "date_modified", "login_attempts", "loc_id"];
pub const REQUEST_COLUMNS: &[&str] = &[
    "req_id", "requester", "request_type", "submitted_by", "item_id", "description", "date_submitted", "approved_by",
    "date_approved", "status", "date_modified",
];
pub const LOG_COLUMNS: &[&str] = &["log_id", "log_time", "user_id", "item_id", "event_type", "content"];

/// Fields each target's basic search looks at, and which advanced fields are
/// numeric.
pub fn basic_fields(target: &str) -> &'static [&'static str] {
    match target {
        "items" => &["item_description", "code", "serial_number", "property"],
        "users" => &["user_code", "last_name", "first_name"],
        "requests" => &["description", "status"],
        _ => &["event_type", "content"],
    }
}

pub fn numeric(field: &str) -> bool {
    matches!(
        field,
        "item_id" | "cat_id" | "owner_id" | "loc_id" | "group_id" | "user_id" | "req_id" | "requester" | "request_type"
            | "submitted_by" | "approved_by" | "log_id"
    )
}

fn key_of(target: &str) -> &'static str {
    match target {
        "items" => "item_id",
        "users" => "user_id",
        "requests" => "req_id",
        _ => "log_id",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Department(i64),
    Faculty(i64),
    University,
}

/// Level 0..=3 from a signature: the highest populated group of three bits.
pub fn level_of(sig: i64) -> u8 {
    (0..4u8).rev().find(|g| sig & (0b111 << (3 * g)) != 0).unwrap_or(0)
}

#[derive(Clone, Debug)]
pub struct Role {
    pub role_id: i64,
    pub user_id: i64,
    pub affln: Option<i64>,
    pub sig: i64,
}

pub struct World {
    parent: BTreeMap<i64, Option<i64>>,
    loc_affln: HashMap<i64, Option<i64>>,
    roles: Vec<Role>,
    props: HashMap<i64, Vec<String>>,
    pub items: Vec<Row>,
    pub users: Vec<Row>,
    pub requests: Vec<Row>,
    pub logs: Vec<Row>,
}

fn cell(v: ValueRef<'_>) -> Value {
    match v {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => i.into(),
        ValueRef::Real(f) => f.into(),
        ValueRef::Text(t) => Value::String(String::from_utf8_lossy(t).into()),
        ValueRef::Blob(_) => Value::Null,
    }
}

fn rows(c: &Connection, table: &str, cols: &[&str]) -> Vec<Row> {
    let key = key_of(table);
    let mut stmt = c.prepare(&format!("SELECT {} FROM {table} ORDER BY {key}", cols.join(", "))).unwrap();
    stmt.query_map([], |r| {
        let mut m = Row::new();
        for (i, name) in cols.iter().enumerate() {
            m.insert(name.to_string(), cell(r.get_ref(i)?));
        }
        Ok(m)
    })
    .unwrap()
    .collect::<Result<_, _>>()
    .unwrap()
}

impl World {
    pub fn load(u: &Uuis) -> World {
        u.store()
            .read(|c| {
                let pairs = |sql: &str| -> Vec<(i64, Option<i64>)> {
                    let mut s = c.prepare(sql).unwrap();
                    s.query_map([], |r| Ok((r.get(0)?, r.get(1)?))).unwrap().map(Result::unwrap).collect()
                };
                let parent = pairs("SELECT affln_id, parent_affln_id FROM affiliations").into_iter().collect();
                let loc_affln = pairs("SELECT loc_id, affln_id FROM locations").into_iter().collect();
                let mut s = c
                    .prepare(
                        "SELECT r.user_role_id, r.user_id, r.affln_id, a.permission, t.permission FROM userroles r
                         LEFT JOIN acls a ON a.user_role_id = r.user_role_id
                         LEFT JOIN professionaltitles t ON t.title_id = r.title_id",
                    )
                    .unwrap();
                let roles = s
                    .query_map([], |r| {
                        let acl: Option<i64> = r.get(3)?;
                        let title: Option<i64> = r.get(4)?;
                        Ok(Role {
                            role_id: r.get(0)?,
                            user_id: r.get::<_, Option<i64>>(1)?.unwrap_or(0),
                            affln: r.get(2)?,
                            sig: acl.or(title).unwrap_or(0),
                        })
                    })
                    .unwrap()
                    .map(Result::unwrap)
                    .collect();
                let mut props: HashMap<i64, Vec<String>> = HashMap::new();
                let mut s = c.prepare("SELECT item_id, prop_value FROM itemproperties").unwrap();
                for (item, value) in s
                    .query_map([], |r| Ok((r.get::<_, Option<i64>>(0)?, r.get::<_, Option<String>>(1)?)))
                    .unwrap()
                    .map(Result::unwrap)
                {
                    if let (Some(i), Some(v)) = (item, value) {
                        props.entry(i).or_default().push(v);
                    }
                }
                Ok(World {
                    parent,
                    loc_affln,
                    roles,
                    props,
                    items: rows(c, "items", ITEM_COLUMNS),
                    users: rows(c, "users", USER_COLUMNS),
                    requests: rows(c, "requests", REQUEST_COLUMNS),
                    logs: rows(c, "logs", LOG_COLUMNS),
                })
            })
            .unwrap()
    }

    pub fn affiliations(&self) -> impl Iterator<Item = i64> + '_ {
        self.parent.keys().copied()
    }

    fn is_department(&self, a: i64) -> bool {
        matches!(self.parent.get(&a), Some(Some(p)) if *p != 0)
    }

    fn is_faculty(&self, a: i64) -> bool {
        matches!(self.parent.get(&a), Some(Some(0)))
    }

    /// The reach of a role at `level` attached to `affln`.
    pub fn scope(&self, level: u8, affln: i64) -> Scope {
        if level == 3 {
            Scope::University
        } else if self.is_department(affln) {
            if level == 2 {
                Scope::Faculty(self.parent[&affln].unwrap())
            } else {
                Scope::Department(affln)
            }
        } else if self.is_faculty(affln) {
            Scope::Faculty(affln)
        } else {
            Scope::Department(affln)
        }
    }

    pub fn members(&self, scope: Scope) -> BTreeSet<i64> {
        self.parent
            .iter()
            .filter(|(id, parent)| match scope {
                Scope::University => true,
                Scope::Faculty(f) => **id == f || **parent == Some(f),
                Scope::Department(d) => **id == d,
            })
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn in_scope(&self, scope: Scope, affln: i64) -> bool {
        self.members(scope).contains(&affln)
    }

    /// The user's highest-level role, earliest on ties.
    pub fn primary(&self, user: i64) -> Option<&Role> {
        let mut mine: Vec<&Role> = self.roles.iter().filter(|r| r.user_id == user).collect();
        mine.sort_by_key(|r| (std::cmp::Reverse(level_of(r.sig)), r.role_id));
        mine.into_iter().next()
    }

    pub fn user_affln(&self, user: i64) -> Option<i64> {
        self.primary(user).and_then(|r| r.affln)
    }

    pub fn item_affln_of(&self, loc: Option<i64>, owner: Option<i64>) -> i64 {
        loc.and_then(|l| self.loc_affln.get(&l).copied().flatten())
            .or_else(|| owner.and_then(|o| self.user_affln(o)))
            .unwrap_or(0)
    }

    pub fn item_affln(&self, item: i64) -> Option<i64> {
        self.items
            .iter()
            .find(|r| r["item_id"] == item)
            .map(|r| self.item_affln_of(r["loc_id"].as_i64(), r["owner_id"].as_i64()))
    }

    pub fn location_affln(&self, loc: i64) -> Option<i64> {
        self.loc_affln.get(&loc).copied().flatten()
    }

    pub fn log_affln(&self, row: &Row) -> i64 {
        row["item_id"]
            .as_i64()
            .and_then(|i| self.item_affln(i))
            .or_else(|| row["user_id"].as_i64().and_then(|u| self.user_affln(u)))
            .unwrap_or(0)
    }

    /// The affiliation a row of `target` counts against.
    pub fn attribution(&self, target: &str, row: &Row) -> i64 {
        match target {
            "items" => self.item_affln_of(row["loc_id"].as_i64(), row["owner_id"].as_i64()),
            "users" => row["user_id"].as_i64().and_then(|u| self.user_affln(u)).unwrap_or(0),
            "requests" => row["requester"].as_i64().and_then(|u| self.user_affln(u)).unwrap_or(0),
            _ => self.log_affln(row),
        }
    }

    pub fn table(&self, target: &str) -> &[Row] {
        match target {
            "items" => &self.items,
            "users" => &self.users,
            "requests" => &self.requests,
            _ => &self.logs,
        }
    }

    /// Whether a session may see a row of `target` at all.
    pub fn visible(&self, viewer: &Viewer, target: &str, row: &Row) -> bool {
        if target == "items" && row["item_id"] == 0 {
            return false;
        }
        if viewer.level == 0 {
            return target == "requests" && row["requester"] == viewer.user_id;
        }
        viewer.scope == Scope::University || self.in_scope(viewer.scope, self.attribution(target, row))
    }

    /// Whether `viewer` outranks the requester inside its own scope.
    pub fn has_authority(&self, viewer: &Viewer, requester: i64) -> bool {
        if requester == viewer.user_id {
            return false;
        }
        let (level, affln) = self.primary(requester).map(|r| (level_of(r.sig), r.affln.unwrap_or(0))).unwrap_or((0, 0));
        viewer.level > level && self.in_scope(viewer.scope, affln)
    }

    /// Brute-force evaluation of a query over every row.
    pub fn search(&self, viewer: &Viewer, target: &str, query: &OracleQuery) -> Vec<Row> {
        self.table(target)
            .iter()
            .filter(|row| self.visible(viewer, target, row))
            .filter(|row| match query {
                OracleQuery::Basic(text) => {
                    basic_fields(target).iter().any(|f| self.matches(row, f, "contains", text))
                }
                OracleQuery::Advanced { params, expr } => expr.eval(&|i| {
                    let (f, op, v) = &params[i];
                    self.matches(row, f, op, v)
                }),
            })
            .cloned()
            .collect()
    }

    fn matches(&self, row: &Row, field: &str, op: &str, value: &str) -> bool {
        if field == "property" {
            let id = row["item_id"].as_i64().unwrap_or(-1);
            return self
                .props
                .get(&id)
                .is_some_and(|vs| vs.iter().any(|v| compare(&Value::String(v.clone()), false, op, value)));
        }
        compare(&row[field], numeric(field), op, value)
    }
}

/// SQL comparison under BINARY collation, with NULL never matching.
fn compare(cell: &Value, numeric: bool, op: &str, value: &str) -> bool {
    if cell.is_null() {
        return false;
    }
    if op == "contains" {
        let hay = match cell {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        return hay.to_ascii_lowercase().contains(&value.to_ascii_lowercase());
    }
    let ord = if numeric {
        let Ok(want) = value.trim().parse::<i64>() else { return false };
        match cell.as_i64() {
            Some(have) => have.cmp(&want),
            // Text sorts after every number.
            None => std::cmp::Ordering::Greater,
        }
    } else {
        match cell {
            Value::String(s) => s.as_bytes().cmp(value.as_bytes()),
            _ => std::cmp::Ordering::Less,
        }
    };
    match op {
        "eq" => ord.is_eq(),
        "neq" => ord.is_ne(),
        "lt" => ord.is_lt(),
        "gt" => ord.is_gt(),
        other => panic!("unknown operator {other}"),
    }
}

#[derive(Clone, Debug)]
pub struct Viewer {
    pub user_id: i64,
    pub level: u8,
    pub scope: Scope,
}

#[derive(Clone, Debug)]
pub enum Tree {
    Param(usize),
    And(Vec<Tree>),
    Or(Vec<Tree>),
}

impl Tree {
    pub fn eval(&self, leaf: &dyn Fn(usize) -> bool) -> bool {
        match self {
            Tree::Param(i) => leaf(*i),
            Tree::And(v) => v.iter().all(|t| t.eval(leaf)),
            Tree::Or(v) => v.iter().any(|t| t.eval(leaf)),
        }
    }

    /// 1-based infix text the service parses.
    pub fn render(&self) -> String {
        match self {
            Tree::Param(i) => (i + 1).to_string(),
            Tree::And(v) | Tree::Or(v) => {
                let word = if matches!(self, Tree::And(_)) { " AND " } else { " OR " };
                format!("({})", v.iter().map(Tree::render).collect::<Vec<_>>().join(word))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum OracleQuery {
    Basic(String),
    Advanced { params: Vec<(String, String, String)>, expr: Tree },
}
