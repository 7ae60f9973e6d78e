//! Basic and advanced search, compiled to scoped SQL plans.

pub mod expr;
pub mod plan;

use std::fmt;
use std::str::FromStr;

use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::auth::Actor;
use crate::domain::{AffiliationScope, AfflnId, PermissionLevel};
use crate::error::{Error, Result};
use crate::page::{PageRequest, PageWindow, ResultPage};
use crate::render::{Document, ExportFormat, Table};
use crate::service::Uuis;

pub use expr::Expr;
pub use plan::{Field, FieldKind, SqlValue};

/// Longest basic input and parameter value, in characters.
pub const MAX_INPUT_CHARS: usize = 30;
/// Advanced queries keep at most this many parameters.
pub const MAX_PARAMETERS: usize = 20;

/// One result row, keyed by column name.
pub type Record = Map<String, Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchTarget {
    Items,
    Users,
    Requests,
    Logs,
}

impl SearchTarget {
    pub const ALL: [SearchTarget; 4] = [Self::Items, Self::Users, Self::Requests, Self::Logs];

    pub fn as_str(self) -> &'static str {
        match self {
            SearchTarget::Items => "items",
            SearchTarget::Users => "users",
            SearchTarget::Requests => "requests",
            SearchTarget::Logs => "logs",
        }
    }
}

impl FromStr for SearchTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown search target `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Eq,
    Neq,
    Lt,
    Gt,
    Contains,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::Eq => "=",
            Operator::Neq => "!=",
            Operator::Lt => "<",
            Operator::Gt => ">",
            Operator::Contains => "contains",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParameter {
    pub field: String,
    pub op: Operator,
    pub value: String,
}

impl SearchParameter {
    pub fn new(field: &str, op: Operator, value: &str) -> Self {
        Self {
            field: field.into(),
            op,
            value: value.into(),
        }
    }
}

/// Who asked, echoed back with a captured query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QueryContext {
    pub user_id: i64,
    pub level: PermissionLevel,
    pub affln_id: AfflnId,
    pub scope: AffiliationScope,
}

impl QueryContext {
    fn of(actor: &Actor) -> Self {
        Self {
            user_id: actor.user_id,
            level: actor.level(),
            affln_id: actor.role.affln_id,
            scope: actor.scope,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BasicQuery {
    pub text: String,
    /// Whether the input was cut to [`MAX_INPUT_CHARS`].
    pub truncated: bool,
    pub context: QueryContext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdvancedQuery {
    pub target: SearchTarget,
    pub parameters: Vec<SearchParameter>,
    pub expression: Expr,
    /// Parameters given beyond [`MAX_PARAMETERS`] and ignored.
    pub ignored_parameters: usize,
    pub cap_reached: bool,
    pub context: QueryContext,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Basic(BasicQuery),
    Advanced(AdvancedQuery),
    /// Every visible row.
    All,
}

/// A compiled, scope-restricted query. Only [`Uuis::compile`] makes these,
/// and only the session that compiled one may run it.
#[derive(Clone, Debug, Serialize)]
pub struct ScopedQueryPlan {
    target: SearchTarget,
    description: String,
    predicate: String,
    params: Vec<SqlValue>,
    scope_filter: String,
    scope: AffiliationScope,
    #[serde(skip)]
    session_id: String,
}

impl ScopedQueryPlan {
    pub fn target(&self) -> SearchTarget {
        self.target
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn scope(&self) -> AffiliationScope {
        self.scope
    }

    fn where_clause(&self) -> String {
        format!("({}) AND ({})", self.predicate, self.scope_filter)
    }

    /// The statement this plan runs, with its parameters, for display.
    pub fn render(&self) -> String {
        let spec = self.target.spec();
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| match p {
                SqlValue::Integer(i) => i.to_string(),
                SqlValue::Text(s) => format!("'{}'", s.replace('\'', "''")),
            })
            .collect();
        format!(
            "SELECT {} FROM {} t WHERE {} ORDER BY t.{}; params: [{}]",
            spec.columns.join(", "),
            spec.table,
            self.where_clause(),
            spec.key,
            params.join(", ")
        )
    }

    fn count(&self, c: &Connection) -> Result<usize> {
        let spec = self.target.spec();
        let sql = format!("SELECT COUNT(*) FROM {} t WHERE {}", spec.table, self.where_clause());
        let n: i64 = c.query_row(&sql, rusqlite::params_from_iter(&self.params), |r| r.get(0))?;
        Ok(n as usize)
    }

    fn fetch(&self, c: &Connection, limit: Option<(usize, usize)>) -> Result<Vec<Record>> {
        let spec = self.target.spec();
        let cols: Vec<String> = spec.columns.iter().map(|c| format!("t.{c}")).collect();
        let mut sql = format!(
            "SELECT {} FROM {} t WHERE {} ORDER BY t.{}",
            cols.join(", "),
            spec.table,
            self.where_clause(),
            spec.key
        );
        if let Some((size, offset)) = limit {
            sql.push_str(&format!(" LIMIT {size} OFFSET {offset}"));
        }
        query_records(c, &sql, rusqlite::params_from_iter(&self.params))
    }
}

/// Runs `sql` and returns each row as a record keyed by column name.
pub(crate) fn query_records(c: &Connection, sql: &str, params: impl rusqlite::Params) -> Result<Vec<Record>> {
    let mut stmt = c.prepare(sql)?;
    let names: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
    let rows = stmt
        .query_map(params, |r| {
            let mut rec = Record::new();
            for (i, name) in names.iter().enumerate() {
                rec.insert(name.clone(), sql_to_json(r.get_ref(i)?));
            }
            Ok(rec)
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(rows)
}

pub(crate) fn sql_to_json(v: rusqlite::types::ValueRef<'_>) -> Value {
    use rusqlite::types::ValueRef;
    match v {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::from(i),
        ValueRef::Real(f) => Value::from(f),
        ValueRef::Text(t) => Value::String(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::String(hex::encode(b)),
    }
}

/// Records to a table, in `columns` order.
pub(crate) fn records_table(title: &str, description: &str, columns: &[&str], rows: &[Record]) -> Table {
    Table {
        title: title.into(),
        description: description.into(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows: rows
            .iter()
            .map(|r| columns.iter().map(|c| r.get(*c).cloned().unwrap_or(Value::Null)).collect())
            .collect(),
    }
}

/// What a search call returns: the echoed query, the plan text and a page.
#[derive(Clone, Debug, Serialize)]
pub struct SearchOutcome<Q> {
    pub query: Q,
    pub plan: String,
    pub page: ResultPage<Record>,
}

impl Uuis {
    /// Records basic search input, cut to [`MAX_INPUT_CHARS`].
    pub fn capture_basic(&self, token: &str, raw: &str) -> Result<BasicQuery> {
        let actor = self.actor(token)?;
        capture_basic_for(&actor, raw)
    }

    /// Assembles an advanced query. Parameters past [`MAX_PARAMETERS`] are
    /// ignored and reported. Without an expression the kept parameters are
    /// joined with AND.
    pub fn capture_advanced(
        &self,
        token: &str,
        target: SearchTarget,
        parameters: Vec<SearchParameter>,
        expression: Option<&str>,
    ) -> Result<AdvancedQuery> {
        let actor = self.actor(token)?;
        if parameters.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let given = parameters.len();
        let expr = match expression.map(str::trim).filter(|e| !e.is_empty()) {
            Some(src) => Expr::parse(src, given)?
                .prune(MAX_PARAMETERS)
                .ok_or_else(|| Error::invalid("expression names no retained parameter"))?,
            None => Expr::all(given.min(MAX_PARAMETERS)),
        };
        let mut kept: Vec<SearchParameter> = parameters.into_iter().take(MAX_PARAMETERS).collect();
        for p in &mut kept {
            target.field(&p.field)?;
            if p.value.trim().is_empty() {
                return Err(Error::EmptyQuery);
            }
            if p.value.chars().count() > MAX_INPUT_CHARS {
                p.value = p.value.chars().take(MAX_INPUT_CHARS).collect();
            }
        }
        Ok(AdvancedQuery {
            target,
            cap_reached: given > MAX_PARAMETERS,
            ignored_parameters: given.saturating_sub(MAX_PARAMETERS),
            parameters: kept,
            expression: expr,
            context: QueryContext::of(&actor),
        })
    }

    /// Compiles a query for `target`, conjoining the caller's scope.
    pub fn compile(&self, token: &str, query: &Query, target: SearchTarget) -> Result<ScopedQueryPlan> {
        let actor = self.actor(token)?;
        compile_for(&actor, query, target)
    }

    pub fn execute(&self, token: &str, plan: &ScopedQueryPlan, page: PageRequest) -> Result<ResultPage<Record>> {
        let actor = self.actor(token)?;
        check_plan_owner(&actor, plan)?;
        let default = self.config().search.page_size;
        self.store().read(|c| {
            let window = PageWindow::new(plan.count(c)?, page, default)?;
            let rows = plan.fetch(c, Some((window.size, window.offset)))?;
            Ok(window.into_page(rows))
        })
    }

    /// All rows of a plan as a printable or CSV document.
    pub fn export_results(&self, token: &str, plan: &ScopedQueryPlan, format: ExportFormat) -> Result<Document> {
        let actor = self.actor(token)?;
        check_plan_owner(&actor, plan)?;
        let rows = self.store().read(|c| plan.fetch(c, None))?;
        let spec = plan.target.spec();
        let table = records_table(
            &format!("Search results: {}", plan.target.as_str()),
            &plan.description,
            spec.columns,
            &rows,
        );
        Ok(table.render(format, &format!("search-{}", plan.target.as_str())))
    }

    pub fn search_basic(
        &self,
        token: &str,
        target: SearchTarget,
        raw: &str,
        page: PageRequest,
    ) -> Result<SearchOutcome<BasicQuery>> {
        let query = self.capture_basic(token, raw)?;
        let plan = self.compile(token, &Query::Basic(query.clone()), target)?;
        let page = self.execute(token, &plan, page)?;
        Ok(SearchOutcome {
            query,
            plan: plan.render(),
            page,
        })
    }

    pub fn search_advanced(
        &self,
        token: &str,
        target: SearchTarget,
        parameters: Vec<SearchParameter>,
        expression: Option<&str>,
        page: PageRequest,
    ) -> Result<SearchOutcome<AdvancedQuery>> {
        let query = self.capture_advanced(token, target, parameters, expression)?;
        let plan = self.compile(token, &Query::Advanced(query.clone()), target)?;
        let page = self.execute(token, &plan, page)?;
        Ok(SearchOutcome {
            query,
            plan: plan.render(),
            page,
        })
    }
}

fn capture_basic_for(actor: &Actor, raw: &str) -> Result<BasicQuery> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyQuery);
    }
    let truncated = raw.chars().count() > MAX_INPUT_CHARS;
    Ok(BasicQuery {
        text: raw.chars().take(MAX_INPUT_CHARS).collect(),
        truncated,
        context: QueryContext::of(actor),
    })
}

pub(crate) fn compile_for(actor: &Actor, query: &Query, target: SearchTarget) -> Result<ScopedQueryPlan> {
    let scope_filter = plan::scope_predicate(
        target,
        actor.level(),
        actor.scope,
        &actor.scope_members(),
        actor.user_id,
    )?;
    let (fragment, description) = match query {
        Query::Basic(q) => (
            plan::basic_predicate(target, &q.text)?,
            format!("{} containing \"{}\"", target.as_str(), q.text),
        ),
        Query::Advanced(q) => {
            if q.target != target {
                return Err(Error::invalid("query was captured for another target"));
            }
            let described: Vec<String> = q
                .parameters
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{}: {} {} \"{}\"", i + 1, p.field, p.op, p.value))
                .collect();
            (
                plan::advanced_predicate(target, &q.parameters, &q.expression)?,
                format!("{} where {} with {}", target.as_str(), q.expression, described.join("; ")),
            )
        }
        Query::All => (
            plan::Fragment {
                sql: "1".into(),
                params: Vec::new(),
            },
            format!("all visible {}", target.as_str()),
        ),
    };
    Ok(ScopedQueryPlan {
        target,
        description,
        predicate: fragment.sql,
        params: fragment.params,
        scope_filter,
        scope: actor.scope,
        session_id: actor.session_id.clone(),
    })
}

fn check_plan_owner(actor: &Actor, plan: &ScopedQueryPlan) -> Result<()> {
    if plan.session_id != actor.session_id || plan.scope != actor.scope {
        return Err(Error::forbidden("plan was compiled for another session"));
    }
    Ok(())
}
