//! One check per acceptance criterion, each driven through the HTTP API.
//! A check returns a one-line summary on success and the first failure
//! otherwise. Sizes are parameters so the test suite can run small copies.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{NaiveDate, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use uuis::clock::parse_ts;
use uuis::store::backup::BackupArchive;
use uuis::store::{Store, CORE_TABLES, EXTENSION_TABLES};
use uuis::{Config, ManualClock, SystemClock, Uuis};

use super::corpus::{self, Corpus, Member, Size, WORDS};
use super::oracle::{self, level_of, OracleQuery, Row, Scope, Tree, Viewer, World};
use super::{add_location, add_user, user_client, Client, Reply, Server, PASSWORD, TITLE_L0, TITLE_L1, TITLE_L2};

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// The API reply must be ok; otherwise the check fails with its body.
fn ok(r: Reply, what: &str) -> Result<Value, String> {
    if r.is_ok() {
        Ok(r.body["data"].clone())
    } else {
        Err(format!("{what}: {} {}", r.status, r.text))
    }
}

fn viewer_of(world: &World, m: &Member) -> Viewer {
    let level = world.primary(m.user_id).map(|r| level_of(r.sig)).unwrap_or(0);
    Viewer { user_id: m.user_id, level, scope: world.scope(level, m.affln) }
}

fn admin_viewer() -> Viewer {
    Viewer { user_id: 1, level: 3, scope: Scope::University }
}

// ---------------------------------------------------------------- schema

pub async fn schema() -> Outcome {
    let s = Server::seeded().await;
    let store = s.uuis.store();
    let mut want: Vec<String> = CORE_TABLES.iter().map(|t| t.to_string()).collect();
    want.sort();
    let core = store.core_table_names().map_err(fail)?;
    ensure!(core == want, "core tables {core:?}");
    let others: Vec<String> = store
        .table_names()
        .map_err(fail)?
        .into_iter()
        .filter(|t| !want.contains(t) && !EXTENSION_TABLES.contains(&t.as_str()))
        .collect();
    ensure!(others.is_empty(), "unexpected tables {others:?}");
    // A second initialization must not reseed.
    store.initialize_schema().map_err(fail)?;
    for (table, n) in [("permissions", 12), ("requesttypes", 6), ("affiliations", 12), ("professionaltitles", 14), ("users", 1)] {
        let got = store.row_count(table).map_err(fail)?;
        ensure!(got == n, "{table} has {got} rows, want {n}");
    }
    let admin = s.admin().await;
    let types = ok(admin.get("/api/requests/types").await, "request types")?;
    ensure!(types.as_array().map(Vec::len) == Some(6), "API lists {types}");
    let affl = ok(admin.get("/api/admin/affiliations").await, "affiliations")?;
    ensure!(affl.as_array().map(Vec::len) == Some(12), "API lists {} affiliations", affl);
    s.shutdown().await;
    Ok(format!("{} core tables; seed counts 12/6/12/14/1", want.len()))
}

// ---------------------------------------------------------------- lockout

pub async fn lockout() -> Outcome {
    let s = Server::seeded().await;
    let admin = s.admin().await;
    let locked_id = add_user(&admin, "lock_a", TITLE_L0, 20).await;
    add_user(&admin, "lock_b", TITLE_L0, 20).await;
    let anon = s.client();

    for n in 1..=2 {
        let r = anon.try_login("lock_a", "wrong-password").await;
        ensure!(r.code() == "invalid-credentials", "attempt {n}: {}", r.text);
    }
    let third = anon.try_login("lock_a", "wrong-password").await;
    ensure!(third.code() == "account-locked", "third wrong attempt: {}", third.text);
    let right = anon.try_login("lock_a", PASSWORD).await;
    ensure!(right.code() == "account-locked", "correct password after lockout: {}", right.text);

    for round in 0..2 {
        for _ in 0..2 {
            let r = anon.try_login("lock_b", "wrong-password").await;
            ensure!(r.code() == "invalid-credentials", "round {round}: {}", r.text);
        }
        let r = anon.try_login("lock_b", PASSWORD).await;
        ensure!(r.is_ok(), "2 wrong + 1 right, round {round}: {}", r.text);
    }

    ok(admin.put(&format!("/api/admin/users/{locked_id}/role"), json!({ "unlock": true })).await, "unlock")?;
    ensure!(anon.try_login("lock_a", PASSWORD).await.is_ok(), "unlocked account still refused");
    s.shutdown().await;
    Ok("3 wrong locks; 2 wrong + 1 right does not; unlock restores".into())
}

// ---------------------------------------------------------------- search boundaries

pub async fn search_boundaries() -> Outcome {
    let s = Server::seeded().await;
    let admin = s.admin().await;
    let input: String = "abcdefghijklmnopqrstuvwxyz0123456789".chars().take(31).collect();
    let d = ok(admin.post("/api/search/basic", json!({ "target": "items", "text": input })).await, "31-char search")?;
    let kept = d["query"]["text"].as_str().unwrap_or_default();
    ensure!(kept.chars().count() == 30 && input.starts_with(kept), "kept `{kept}`");
    ensure!(d["query"]["truncated"] == true, "truncation not flagged");
    let d = ok(admin.post("/api/search/basic", json!({ "target": "items", "text": &input[..30] })).await, "30-char search")?;
    ensure!(d["query"]["truncated"] == false, "30 chars flagged as truncated");

    for empty in ["", "   "] {
        let r = admin.post("/api/search/basic", json!({ "target": "items", "text": empty })).await;
        ensure!(r.code() == "empty-query", "empty input `{empty}`: {}", r.text);
    }
    let r = admin.post("/api/search/advanced", json!({ "target": "items", "parameters": [] })).await;
    ensure!(r.code() == "empty-query", "no parameters: {}", r.text);

    let params: Vec<Value> =
        (0..25).map(|i| json!({ "field": "item_description", "op": "contains", "value": format!("v{i}") })).collect();
    let d = ok(admin.post("/api/search/advanced", json!({ "target": "items", "parameters": params })).await, "25 parameters")?;
    let kept = d["query"]["parameters"].as_array().cloned().unwrap_or_default();
    ensure!(kept.len() == 20, "kept {} parameters", kept.len());
    ensure!(kept.iter().enumerate().all(|(i, p)| p["value"] == format!("v{i}")), "kept parameters out of order");
    ensure!(d["query"]["ignored_parameters"] == 5 && d["query"]["cap_reached"] == true, "cap not reported: {}", d["query"]);
    s.shutdown().await;
    Ok("31 -> 30 chars; empty refused; 25 -> 20 parameters".into())
}

// ---------------------------------------------------------------- search oracle

fn fields_of(target: &str) -> &'static [&'static str] {
    match target {
        "items" => &[
            "item_id", "item_description", "code", "serial_number", "cat_id", "owner_id", "loc_id", "status", "group_id",
            "date_modified", "property",
        ],
        "users" => &["user_id", "user_code", "last_name", "first_name"],
        "requests" => &[
            "req_id", "requester", "request_type", "submitted_by", "item_id", "description", "date_submitted", "approved_by",
            "date_approved", "status", "date_modified",
        ],
        _ => &["log_id", "log_time", "user_id", "item_id", "event_type", "content"],
    }
}

/// A short search value: a word, or a piece of a value that exists.
fn sample_value(rng: &mut StdRng, world: &World, target: &str, field: &str) -> String {
    let rows = world.table(target);
    let existing = if field == "property" || rows.is_empty() {
        None
    } else {
        rows.choose(rng).map(|r| match &r[field] {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => String::new(),
        })
    };
    let v = match existing {
        Some(v) if !v.trim().is_empty() && rng.random_bool(0.6) => {
            if oracle::numeric(field) || rng.random_bool(0.5) {
                v
            } else {
                let chars: Vec<char> = v.chars().collect();
                let start = rng.random_range(0..chars.len());
                let len = rng.random_range(1..=(chars.len() - start).min(8));
                chars[start..start + len].iter().collect()
            }
        }
        _ if oracle::numeric(field) => rng.random_range(0..60).to_string(),
        _ => WORDS.choose(rng).unwrap().to_string(),
    };
    let v: String = v.chars().take(30).collect();
    let trimmed = v.trim();
    if trimmed.is_empty() || trimmed != v {
        WORDS.choose(rng).unwrap().to_string()
    } else {
        v
    }
}

fn random_tree(rng: &mut StdRng, leaves: &[usize], and: bool) -> Tree {
    if leaves.len() == 1 {
        return Tree::Param(leaves[0]);
    }
    let parts = rng.random_range(2..=leaves.len());
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for (i, &leaf) in leaves.iter().enumerate() {
        let g = if i < parts { i } else { rng.random_range(0..parts) };
        groups[g].push(leaf);
    }
    let kids = groups.iter().map(|g| random_tree(rng, g, !and)).collect();
    if and {
        Tree::And(kids)
    } else {
        Tree::Or(kids)
    }
}

fn random_query(rng: &mut StdRng, world: &World, target: &str) -> (OracleQuery, Value) {
    if rng.random_bool(0.4) {
        let fields = oracle::basic_fields(target);
        let field = *fields.choose(rng).unwrap();
        let text = sample_value(rng, world, target, if field == "property" { "code" } else { field });
        let body = json!({ "target": target, "text": text });
        return (OracleQuery::Basic(text), body);
    }
    let n = rng.random_range(1..=4);
    let mut params = Vec::new();
    for _ in 0..n {
        let field = *fields_of(target).choose(rng).unwrap();
        let ops: &[&str] = if rng.random_bool(0.3) { &["contains"] } else { &["eq", "neq", "lt", "gt"] };
        let op = *ops.choose(rng).unwrap();
        params.push((field.to_string(), op.to_string(), sample_value(rng, world, target, field)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (expr, text) = if n > 1 && rng.random_bool(0.6) {
        let and = rng.random_bool(0.5);
        let t = random_tree(rng, &order, and);
        let text = t.render();
        (t, Some(text))
    } else {
        (Tree::And((0..n).map(Tree::Param).collect()), None)
    };
    let body = json!({
        "target": target,
        "parameters": params.iter().map(|(f, o, v)| json!({ "field": f, "op": o, "value": v })).collect::<Vec<_>>(),
        "expression": text,
    });
    (OracleQuery::Advanced { params, expr }, body)
}

fn project(rows: &[Row], target: &str) -> Vec<Row> {
    let cols = match target {
        "items" => oracle::ITEM_COLUMNS,
        "users" => oracle::USER_COLUMNS,
        "requests" => oracle::REQUEST_COLUMNS,
        _ => oracle::LOG_COLUMNS,
    };
    rows.iter()
        .map(|r| cols.iter().map(|c| (c.to_string(), r.get(*c).cloned().unwrap_or(Value::Null))).collect())
        .collect()
}

/// Randomized queries at L1, L2 and L3 compared row for row with a
/// brute-force filter over freshly built corpora.
pub async fn search_oracle(queries: usize, corpora: usize, seed: u64) -> Outcome {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut mismatches = Vec::new();
    let mut run = 0usize;
    let mut hits = 0usize;
    let mut largest = 0usize;
    for k in 0..corpora {
        let s = Server::seeded().await;
        let items = rng.random_range(150..=300);
        let c = corpus::build(&s, &mut rng, &format!("q{k}"), Size { users: 36, locations: 10, items, requests: 50 }).await;
        let world = World::load(&s.uuis);
        largest = largest.max(["items", "users", "requests", "logs"].iter().map(|t| world.table(t).len()).max().unwrap());
        ensure!(largest <= 500, "corpus has a table of {largest} rows");
        let logs_before = world.logs.len();
        let share = queries / corpora + usize::from(k < queries % corpora);
        for i in 0..share {
            let level = 1 + (i % 3) as u8;
            let (viewer, client) = if level == 3 {
                (admin_viewer(), c.admin.clone())
            } else {
                let pool: Vec<&Member> =
                    c.members.iter().filter(|m| world.primary(m.user_id).map(|r| level_of(r.sig)) == Some(level)).collect();
                let m = *pool.choose(&mut rng).ok_or(format!("no L{level} member"))?;
                (viewer_of(&world, m), m.client.clone().unwrap())
            };
            let target = *["items", "items", "users", "requests", "logs"].choose(&mut rng).unwrap();
            let (query, body) = random_query(&mut rng, &world, target);
            let kind = if matches!(query, OracleQuery::Basic(_)) { "basic" } else { "advanced" };
            let r = client.post(&format!("/api/search/{kind}?size=1000"), body.clone()).await;
            let got: Vec<Row> = match ok(r.clone(), "search") {
                Ok(d) => d["rows"].as_array().unwrap().iter().map(|v| v.as_object().unwrap().clone()).collect(),
                Err(e) => {
                    mismatches.push(format!("L{level} {body}: {e}"));
                    continue;
                }
            };
            let want = project(&world.search(&viewer, target, &query), target);
            let total = r.body["pagination"]["total_count"].as_u64().unwrap_or(0) as usize;
            if got != want || total != want.len() {
                mismatches.push(format!("L{level} {:?} {body}: api {} rows, oracle {}", viewer.scope, got.len(), want.len()));
            }
            hits += want.len();
            run += 1;
        }
        let after = World::load(&s.uuis).logs.len();
        ensure!(after == logs_before, "searching wrote {} log rows", after - logs_before);
        s.shutdown().await;
    }
    ensure!(mismatches.is_empty(), "{} mismatches, first: {}", mismatches.len(), mismatches[0]);
    Ok(format!("{run} queries over {corpora} corpora (largest table {largest} rows), {hits} rows matched, 0 mismatches"))
}

// ---------------------------------------------------------------- scope safety

struct Checker<'a> {
    world: &'a World,
    checked: usize,
    violations: Vec<String>,
}

impl Checker<'_> {
    fn check(&mut self, allowed: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !allowed {
            self.violations.push(what());
        }
    }

    fn rows(&mut self, viewer: &Viewer, target: &str, rows: &[Value]) {
        for row in rows {
            let row = row.as_object().cloned().unwrap_or_default();
            let ok = self.world.visible(viewer, target, &row);
            self.check(ok, || format!("{viewer:?} saw {target} {}", Value::Object(row.clone())));
        }
    }
}

/// Fuzzed reads by sessions of every level; every returned record must lie
/// inside the caller's scope per the oracle.
pub async fn scope_safety(ops: usize, seed: u64) -> Outcome {
    let mut rng = StdRng::seed_from_u64(seed);
    let s = Server::seeded().await;
    let c: Corpus = corpus::build(&s, &mut rng, "z", Size { users: 40, locations: 10, items: 250, requests: 80 }).await;
    let world = World::load(&s.uuis);
    let mut actors: Vec<(Viewer, Client)> =
        c.members.iter().map(|m| (viewer_of(&world, m), m.client.clone().unwrap())).collect();
    actors.push((admin_viewer(), c.admin.clone()));
    let mut chk = Checker { world: &world, checked: 0, violations: Vec::new() };
    let mut refused = 0usize;
    let targets = ["items", "users", "requests", "logs"];

    for _ in 0..ops {
        let (viewer, client) = actors.choose(&mut rng).unwrap();
        let size = rng.random_range(1..=60);
        let page = rng.random_range(0..4);
        match rng.random_range(0..8) {
            0 => {
                let r = client.get(&format!("/api/assets?page={page}&size={size}")).await;
                match r.is_ok() {
                    true => chk.rows(viewer, "items", r.data().as_array().unwrap()),
                    false => refused += 1,
                }
            }
            1 | 2 => {
                let target = *targets.choose(&mut rng).unwrap();
                let (query, body) = random_query(&mut rng, &world, target);
                let kind = if matches!(query, OracleQuery::Basic(_)) { "basic" } else { "advanced" };
                let r = client.post(&format!("/api/search/{kind}?page={page}&size={size}"), body).await;
                match r.is_ok() {
                    true => chk.rows(viewer, target, r.data()["rows"].as_array().unwrap()),
                    false => refused += 1,
                }
            }
            3 => {
                let mut filter = serde_json::Map::new();
                if rng.random_bool(0.3) {
                    filter.insert("actor".into(), json!(c.members.choose(&mut rng).unwrap().user_id));
                }
                if rng.random_bool(0.3) {
                    filter.insert("event_prefix".into(), json!(["asset", "request", "auth", "user"].choose(&mut rng).unwrap()));
                }
                if rng.random_bool(0.2) && !c.item_ids.is_empty() {
                    filter.insert("item".into(), json!(c.item_ids.choose(&mut rng).unwrap()));
                }
                let r = client.post(&format!("/api/review/logs?page={page}&size={size}"), Value::Object(filter)).await;
                match r.is_ok() {
                    true => chk.rows(viewer, "logs", r.data().as_array().unwrap()),
                    false => refused += 1,
                }
            }
            4 => {
                let r = client.get(&format!("/api/requests/pending?size={size}")).await;
                if !r.is_ok() {
                    refused += 1;
                    continue;
                }
                for row in r.data().as_array().unwrap() {
                    let requester = row["requester"].as_i64().unwrap_or(-1);
                    let allowed = row["status"] == "pending" && world.has_authority(viewer, requester);
                    chk.check(allowed, || format!("{viewer:?} saw pending request {row}"));
                }
            }
            5 => {
                let entity = *["users", "items", "locations"].choose(&mut rng).unwrap();
                let mut spec = json!({ "kind": "entity_listing", "left": entity });
                if rng.random_bool(0.3) {
                    spec["affln_id"] = json!(corpus::AFFILIATIONS.choose(&mut rng).unwrap());
                }
                let r = client.post("/api/review/reports", spec).await;
                if !r.is_ok() {
                    refused += 1;
                    continue;
                }
                let cols: Vec<String> = serde_json::from_value(r.data()["columns"].clone()).unwrap();
                let key = cols.iter().position(|c| c == &format!("{}_id", &entity[..entity.len() - 1]).replace("location", "loc")).unwrap();
                for row in r.data()["rows"].as_array().unwrap() {
                    let id = row[key].as_i64().unwrap_or(-1);
                    let attr = match entity {
                        "users" => Some(world.user_affln(id).unwrap_or(0)),
                        "items" => world.item_affln(id),
                        _ => world.location_affln(id),
                    };
                    let allowed = viewer.scope == Scope::University || attr.is_some_and(|a| world.in_scope(viewer.scope, a));
                    chk.check(allowed, || format!("{viewer:?} listed {entity} {row}"));
                }
            }
            6 => {
                let metrics = ["items", "users", "locations", "seats", "capacity", "items.cat.1", "items.cat.3"];
                let grouping = *["department", "faculty", "university"].choose(&mut rng).unwrap();
                let spec = json!({
                    "kind": "field_comparison",
                    "left": metrics.choose(&mut rng).unwrap(),
                    "right": metrics.choose(&mut rng).unwrap(),
                    "grouping": grouping,
                });
                let r = client.post("/api/review/reports", spec).await;
                if !r.is_ok() {
                    refused += 1;
                    continue;
                }
                for row in r.data()["rows"].as_array().unwrap() {
                    let g = row[0].as_i64().unwrap_or(-1);
                    let allowed = viewer.scope == Scope::University || world.in_scope(viewer.scope, g);
                    chk.check(allowed, || format!("{viewer:?} got group {row} by {grouping}"));
                }
            }
            _ => {
                if rng.random_bool(0.5) && !c.item_ids.is_empty() {
                    let id = *c.item_ids.choose(&mut rng).unwrap();
                    let r = client.get(&format!("/api/assets/{id}")).await;
                    if r.is_ok() {
                        let row = json!({ "item_id": id, "loc_id": r.data()["loc_id"], "owner_id": r.data()["owner_id"] });
                        chk.rows(viewer, "items", &[row]);
                    } else {
                        refused += 1;
                    }
                } else {
                    let Some(req) = world.requests.choose(&mut rng) else { continue };
                    let id = req["req_id"].as_i64().unwrap();
                    let r = client.get(&format!("/api/requests/{id}")).await;
                    if r.is_ok() {
                        let requester = req["requester"].as_i64().unwrap_or(-1);
                        let allowed = requester == viewer.user_id
                            || req["submitted_by"] == viewer.user_id
                            || world.has_authority(viewer, requester);
                        chk.check(allowed, || format!("{viewer:?} opened request {id}"));
                    } else {
                        refused += 1;
                    }
                }
            }
        }
    }
    s.shutdown().await;
    ensure!(chk.violations.is_empty(), "{} violations, first: {}", chk.violations.len(), chk.violations[0]);
    ensure!(chk.checked > ops, "only {} records checked", chk.checked);
    Ok(format!("{ops} operations, {} records checked, {refused} refused, 0 violations", chk.checked))
}

// ---------------------------------------------------------------- bulk import

/// Per-table hashes of every table except the audit log and error reports,
/// plus the log count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snap {
    pub tables: Vec<(String, u64)>,
    pub logs: i64,
}

impl Snap {
    pub fn same_data(&self, other: &Snap) -> bool {
        self.tables == other.tables
    }

    /// Names of tables whose contents differ.
    pub fn changed(&self, other: &Snap) -> Vec<String> {
        self.tables.iter().zip(&other.tables).filter(|(a, b)| a != b).map(|(a, _)| a.0.clone()).collect()
    }
}

pub fn snap(u: &Uuis) -> Snap {
    u.store()
        .read(|c| {
            let tables: Vec<String> = {
                let mut s = c.prepare("SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name")?;
                let names = s.query_map([], |r| r.get(0))?.collect::<Result<_, _>>()?;
                names
            };
            let mut out = Vec::new();
            for t in tables.iter().filter(|t| *t != "logs" && *t != "ext_error_reports") {
                let mut h = DefaultHasher::new();
                // Counters of the two excluded tables move with them.
                let sql = if t == "sqlite_sequence" {
                    "SELECT * FROM sqlite_sequence WHERE name NOT IN ('logs', 'ext_error_reports') ORDER BY name".to_string()
                } else {
                    format!("SELECT * FROM \"{t}\" ORDER BY rowid")
                };
                let mut s = c.prepare(&sql)?;
                let n = s.column_count();
                let mut rows = s.query([])?;
                while let Some(r) = rows.next()? {
                    for i in 0..n {
                        format!("{:?}", r.get_ref(i)?).hash(&mut h);
                    }
                }
                out.push((t.clone(), h.finish()));
            }
            let logs: i64 = c.query_row("SELECT COUNT(*) FROM logs", [], |r| r.get(0))?;
            Ok(Snap { tables: out, logs })
        })
        .expect("snapshot")
}

fn user_rows(tag: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{tag}_{i},Last,First,{PASSWORD},{},20,", if i % 2 == 0 { 10 } else { 2 })).collect()
}

fn asset_rows(tag: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("item {i},{tag}-{i},{tag}-sn-{i},1,1,1,active,Desktop=d{i}")).collect()
}

const USER_HEADER: &str = "user_code,last_name,first_name,password,title_id,affln_id,email";
const ASSET_HEADER: &str = "description,code,serial_number,cat_id,owner_id,loc_id,status,properties";

/// CSVs with one bad row at a random position insert nothing; the same files
/// without it insert every row.
pub async fn bulk_import(trials: usize, seed: u64) -> Outcome {
    let mut rng = StdRng::seed_from_u64(seed);
    let s = Server::seeded().await;
    let admin = s.admin().await;
    let mut refused = 0;
    for t in 0..trials {
        let users = t % 2 == 0;
        let tag = format!("bi{t}");
        let n = rng.random_range(3..=30);
        let mut rows = if users { user_rows(&tag, n) } else { asset_rows(&tag, n) };
        let at = rng.random_range(0..=n);
        let (bad, label) = if users {
            let choices = [
                (format!("admin,X,Y,{PASSWORD},10,20,"), "existing user code"),
                (format!("{tag}_0,X,Y,{PASSWORD},10,20,"), "duplicate in file"),
                (format!("{tag}_bad,X,Y,{PASSWORD},999,20,"), "unknown title"),
                (format!("{tag}_bad,X,Y,{PASSWORD},10,abc,"), "non-numeric affiliation"),
                (format!("{tag}_bad,X,Y,{PASSWORD},10,77,"), "unknown affiliation"),
                (format!("{tag}_bad,X,Y"), "missing columns"),
            ];
            choices.choose(&mut rng).unwrap().clone()
        } else {
            let choices = [
                ("x,UUIS000002,sn-x,1,1,1,active,".to_string(), "existing asset code"),
                (format!("x,{tag}-0,sn-x,1,1,1,active,"), "duplicate in file"),
                (format!("x,{tag}-bad,sn-x,999,1,1,active,"), "unknown category"),
                (format!("x,{tag}-bad,sn-x,1,1,9999,active,"), "unknown location"),
                (format!("x,{tag}-bad,sn-x,1,1,1,broken,"), "bad status"),
                (format!("x,{tag}-bad,sn-x,1,one,1,active,"), "non-numeric owner"),
                (format!("x,{tag}-bad,sn-x,2,1,1,active,Desktop=x"), "property of another category"),
            ];
            choices.choose(&mut rng).unwrap().clone()
        };
        // A duplicate of row 0 needs row 0 in front of it.
        let at = if label == "duplicate in file" { at.max(1) } else { at };
        let clean = rows.clone();
        rows.insert(at.min(rows.len()), bad);
        let (path, header) = if users { ("/api/admin/users/import", USER_HEADER) } else { ("/api/assets/import", ASSET_HEADER) };
        let before = snap(&s.uuis);
        let r = admin.upload(path, format!("{header}\n{}\n", rows.join("\n"))).await;
        ensure!(!r.is_ok(), "trial {t}: {label} at row {at} was accepted");
        let after = snap(&s.uuis);
        ensure!(after == before, "trial {t}: {label} at row {at} ({}) changed {:?}, logs {} -> {}", r.code(), before.changed(&after), before.logs, after.logs);
        refused += 1;

        let point = if users { "import.users" } else { "import.assets" };
        s.uuis.store().inject_fault(point);
        let r = admin.upload(path, format!("{header}\n{}\n", clean.join("\n"))).await;
        s.uuis.store().clear_fault();
        ensure!(r.code() == "internal", "trial {t}: fault mid-import gave {}", r.text);
        let after = snap(&s.uuis);
        ensure!(after == before, "trial {t}: fault mid-import changed {:?}, logs {} -> {}", before.changed(&after), before.logs, after.logs);

        let d = ok(admin.upload(path, format!("{header}\n{}\n", clean.join("\n"))).await, "clean import")?;
        ensure!(d["inserted"] == n, "trial {t}: clean file inserted {}", d["inserted"]);
    }
    s.shutdown().await;
    Ok(format!("{refused} poisoned files and {trials} mid-import faults inserted 0 rows; clean copies inserted all"))
}

// ---------------------------------------------------------------- backup

fn table_rows(store: &Store) -> Vec<(String, Vec<String>)> {
    store
        .read(|c| {
            let tables: Vec<String> = {
                let mut s = c.prepare("SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name")?;
                let names = s.query_map([], |r| r.get(0))?.collect::<Result<_, _>>()?;
                names
            };
            let mut out = Vec::new();
            for t in tables {
                // sqlite_sequence row order is an artifact of insertion order.
                let order = if t == "sqlite_sequence" { "name" } else { "rowid" };
                let mut s = c.prepare(&format!("SELECT * FROM \"{t}\" ORDER BY {order}"))?;
                let n = s.column_count();
                let mut rows = s.query([])?;
                let mut lines = Vec::new();
                while let Some(r) = rows.next()? {
                    lines.push((0..n).map(|i| format!("{:?}", r.get_ref(i).unwrap())).collect::<Vec<_>>().join("|"));
                }
                out.push((t, lines));
            }
            Ok(out)
        })
        .expect("table rows")
}

async fn confirmed_backup(admin: &Client) -> Result<Value, String> {
    let first = admin.post("/api/admin/backup", json!({})).await;
    ensure!(first.code() == "confirmation-required", "backup without confirmation: {}", first.text);
    let ticket = first.body["error"]["confirmation"].clone();
    ok(admin.post("/api/admin/backup", json!({ "confirmation": ticket })).await, "confirmed backup")
}

pub async fn backup(seed: u64) -> Outcome {
    let mut rng = StdRng::seed_from_u64(seed);
    let dir = tempfile::tempdir().map_err(fail)?;
    let mut config = Config::default();
    config.backup.dir = Some(dir.path().to_path_buf());
    let source = Uuis::open(config, Arc::new(SystemClock)).map_err(fail)?;
    let s = Server::start(source).await;
    let c = corpus::build(&s, &mut rng, "b", Size { users: 25, locations: 6, items: 200, requests: 40 }).await;

    let expected = table_rows(s.uuis.store());
    let record = confirmed_backup(&c.admin).await?;
    let path = record["path"].as_str().ok_or("backup record has no path")?;
    let archive = BackupArchive::read_from(std::path::Path::new(path)).map_err(fail)?;
    archive.verify().map_err(fail)?;

    let target = Store::open_in_memory(Arc::new(SystemClock)).map_err(fail)?;
    target.restore(&archive, false).map_err(fail)?;
    let restored = table_rows(&target);
    ensure!(restored.len() == expected.len(), "restored {} tables of {}", restored.len(), expected.len());
    let mut rows = 0;
    for ((tn, want), (rn, got)) in expected.iter().zip(&restored) {
        ensure!(tn == rn, "table {rn} where {tn} was expected");
        if want != got {
            let diff: Vec<_> = want.iter().zip(got).filter(|(a, b)| a != b).take(3).collect();
            return Err(format!("table {tn}: {} rows restored, {} in source, first differences {diff:?}", got.len(), want.len()));
        }
        rows += want.len();
    }
    // The restored copy serves the same answers.
    let copy = Server::start(Uuis::new(Arc::new(target), Config::default()).map_err(fail)?).await;
    let a = copy.admin().await;
    let n_copy = a.get("/api/assets?size=1").await.body["pagination"]["total_count"].clone();
    let n_src = c.admin.get("/api/assets?size=1").await.body["pagination"]["total_count"].clone();
    ensure!(n_copy == n_src, "restored service lists {n_copy} assets, source {n_src}");
    copy.shutdown().await;
    s.shutdown().await;

    // Scheduled path under a clock running several hundred times real time.
    let due = Utc.from_utc_datetime(&NaiveDate::from_ymd_opt(2026, 10, 18).unwrap().and_hms_opt(2, 0, 0).unwrap());
    let clock = ManualClock::new(due - chrono::Duration::seconds(90));
    let mut config = Config::default();
    config.backup.daily_at = Some("02:00".into());
    let sched_uuis = Uuis::open(config, Arc::new(clock.clone())).map_err(fail)?;
    let schedule = sched_uuis.start_backup_schedule(Duration::from_millis(5)).map_err(fail)?.ok_or("no schedule configured")?;
    let started = Instant::now();
    while schedule.runs().is_empty() && clock_now(&clock) < due + chrono::Duration::minutes(10) {
        clock.advance(chrono::Duration::seconds(1));
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
    let runs = schedule.runs();
    schedule.stop();
    let run = runs.first().ok_or("scheduled backup never ran")?;
    let at = parse_ts(&run.created_at).ok_or("unparseable backup time")?;
    let late = (at - due).num_seconds();
    ensure!((0..=60).contains(&late), "scheduled backup ran {late}s after the scheduled instant");
    let s2 = Server::start(sched_uuis).await;
    let listed = ok(s2.admin().await.get("/api/admin/backup").await, "list backups")?;
    ensure!(listed.as_array().is_some_and(|v| v.iter().any(|r| r["trigger"] == "auto")), "automatic run not listed: {listed}");
    let logged = ok(s2.admin().await.post("/api/review/logs", json!({ "event_prefix": "backup.auto" })).await, "audit")?;
    ensure!(logged.as_array().map(Vec::len) == Some(1), "backup.auto entries: {logged}");
    s2.shutdown().await;
    Ok(format!(
        "{} tables / {rows} rows restored identically; scheduled run {late}s after 02:00 (simulated, {:.1}s real)",
        expected.len(),
        started.elapsed().as_secs_f64()
    ))
}

fn clock_now(c: &ManualClock) -> chrono::DateTime<Utc> {
    uuis::Clock::now(c)
}

// ---------------------------------------------------------------- request lifecycle

fn legal(before: &str, after: &str) -> bool {
    before == after || (before == "pending" && matches!(after, "approved" | "rejected" | "cancelled"))
}

/// Random operation sequences over fresh requests; every observed status
/// change must be a legal transition made by someone entitled to make it.
pub async fn request_lifecycle(sequences: usize, seed: u64) -> Outcome {
    let mut rng = StdRng::seed_from_u64(seed);
    let s = Server::seeded().await;
    let c = corpus::build(&s, &mut rng, "r", Size { users: 30, locations: 8, items: 120, requests: 0 }).await;
    let world = World::load(&s.uuis);
    let admin = c.admin.clone();

    // Reject without authority: an L1 in SOEN against a faculty-level requester.
    let (_, boss) = user_client(&admin, "r_boss", TITLE_L2, 20).await;
    let (_, clerk) = user_client(&admin, "r_clerk", TITLE_L1, 20).await;
    let req = ok(boss.post("/api/requests", json!({ "request_type": 1, "description": "chairs" })).await, "submit")?;
    let id = req["req_id"].as_i64().unwrap();
    let r = clerk.post(&format!("/api/requests/{id}/reject"), json!({ "reason": "not needed" })).await;
    ensure!(r.code() == "forbidden", "reject without authority: {}", r.text);
    let after = ok(admin.get(&format!("/api/requests/{id}")).await, "reload")?;
    ensure!(after["status"] == "pending", "status became {}", after["status"]);
    let comments = after["comments"].as_array().cloned().unwrap_or_default();
    ensure!(
        comments.len() == 1 && comments[0]["kind"] == "rejection-attempt" && comments[0]["comment"] == "not needed",
        "comments {comments:?}"
    );

    let mut actors: Vec<(Viewer, Client)> =
        c.members.iter().map(|m| (viewer_of(&world, m), m.client.clone().unwrap())).collect();
    actors.push((admin_viewer(), admin.clone()));
    let mut ops = 0;
    let mut changes = 0;
    let mut attempts = 0;
    for seq in 0..sequences {
        let ri = rng.random_range(0..c.members.len());
        let (requester, rc) = (&actors[ri].0.clone(), actors[ri].1.clone());
        let kind = rng.random_range(1..=6);
        let mut body = json!({ "request_type": kind, "description": format!("seq {seq}") });
        if [2, 3, 4, 6].contains(&kind) || rng.random_bool(0.2) {
            body["identifier"] = json!(c.serials.choose(&mut rng).unwrap());
        }
        let submitted = rc.post("/api/requests", body).await;
        let Ok(req) = ok(submitted, "submit") else { continue };
        ensure!(req["status"] == "pending", "seq {seq}: new request is {}", req["status"]);
        let id = req["req_id"].as_i64().unwrap();
        let mut status = "pending".to_string();
        let mut comments = 0usize;
        for step in 0..rng.random_range(1..=6) {
            let (actor, client) = match rng.random_range(0..3) {
                0 => (requester.clone(), rc.clone()),
                1 => (admin_viewer(), admin.clone()),
                _ => actors.choose(&mut rng).map(|(v, c)| (v.clone(), c.clone())).unwrap(),
            };
            let op = *["approve", "reject", "cancel"].choose(&mut rng).unwrap();
            let body = match op {
                "approve" => json!({ "loc_id": c.locations.choose(&mut rng), "comment": "ok" }),
                "reject" => json!({ "reason": format!("step {step}") }),
                _ => json!({}),
            };
            let r = client.post(&format!("/api/requests/{id}/{op}"), body).await;
            ops += 1;
            let now = ok(admin.get(&format!("/api/requests/{id}")).await, "reload")?;
            let new_status = now["status"].as_str().unwrap_or_default().to_string();
            let new_comments = now["comments"].as_array().map(Vec::len).unwrap_or(0);
            let ctx = || format!("seq {seq} step {step}: {op} by user {} ({status} -> {new_status}) {}", actor.user_id, r.text);
            ensure!(legal(&status, &new_status), "illegal transition: {}", ctx());
            let owner = actor.user_id == requester.user_id;
            let authority = world.has_authority(&actor, requester.user_id);
            if new_status != status {
                changes += 1;
                ensure!(r.is_ok(), "status changed by a failed call: {}", ctx());
                let (expected, entitled) = match op {
                    "approve" => ("approved", authority),
                    "reject" => ("rejected", authority),
                    _ => ("cancelled", owner),
                };
                ensure!(new_status == expected && entitled, "unentitled or wrong transition: {}", ctx());
            } else {
                ensure!(!r.is_ok(), "ok reply without a transition: {}", ctx());
                let must_succeed = status == "pending" && ((op == "cancel" && owner) || (op == "reject" && authority));
                ensure!(!must_succeed, "entitled call refused: {}", ctx());
                if status == "pending" && op == "reject" {
                    attempts += 1;
                    ensure!(r.code() == "forbidden", "{}", ctx());
                    ensure!(new_comments == comments + 1, "rejection attempt left no comment: {}", ctx());
                }
            }
            status = new_status;
            comments = new_comments;
        }
    }
    s.shutdown().await;
    Ok(format!("{sequences} sequences, {ops} operations, {changes} transitions, {attempts} refused rejections kept as comments, 0 illegal"))
}

// ---------------------------------------------------------------- audit completeness

pub struct Ledger {
    pub committed: usize,
    pub rolled_back: usize,
    pub names: Vec<String>,
}

impl Ledger {
    fn judge(&mut self, name: &str, before: &Snap, after: &Snap, r: &Reply, expect_ok: bool) -> Result<(), String> {
        self.names.push(name.to_string());
        ensure!(r.is_ok() == expect_ok, "{name}: expected ok={expect_ok}, got {} {}", r.status, r.text);
        let logs = after.logs - before.logs;
        if !after.same_data(before) {
            self.committed += 1;
            ensure!(logs >= 1, "{name}: changed {:?} with no audit entry", before.changed(after));
        } else if !r.is_ok() {
            self.rolled_back += 1;
            ensure!(logs == 0, "{name}: failed call wrote {logs} audit entries");
        }
        Ok(())
    }
}

/// Every mutating operation, successful and rolled back, measured by table
/// fingerprints before and after.
pub async fn audit_completeness() -> Outcome {
    let s = Server::seeded().await;
    let u = s.uuis.clone();
    let admin = s.admin().await;
    let (_, staff) = user_client(&admin, "au_staff", TITLE_L1, 20).await;
    let (_, student) = user_client(&admin, "au_student", TITLE_L0, 20).await;
    let (_, dean) = user_client(&admin, "au_dean", TITLE_L2, 2).await;
    let loc20 = add_location(&admin, "AU-20", 20).await;
    let mut l = Ledger { committed: 0, rolled_back: 0, names: Vec::new() };

    macro_rules! op {
        ($name:expr, $ok:expr, $call:expr) => {{
            let before = snap(&u);
            let r: Reply = $call.await;
            l.judge($name, &before, &snap(&u), &r, $ok)?;
            r
        }};
    }
    macro_rules! fault {
        ($point:expr, $name:expr, $call:expr) => {{
            u.store().inject_fault($point);
            let r = op!($name, false, $call);
            u.store().clear_fault();
            r
        }};
    }

    op!("login", true, s.client().try_login("au_staff", PASSWORD));
    op!("login: wrong password", false, s.client().try_login("au_staff", "nope-nope"));
    op!("login: unknown user", false, s.client().try_login("nobody", "nope-nope"));
    op!("password change", true, student.post("/api/password", json!({ "current": PASSWORD, "new": "password2", "confirm": "password2" })));
    op!("password change: mismatch", false, student.post("/api/password", json!({ "current": "password2", "new": "password3", "confirm": "password4" })));
    op!("password change: weak", false, student.post("/api/password", json!({ "current": "password2", "new": "short", "confirm": "short" })));
    op!("profile update", true, student.patch("/api/profile", json!({ "email": "s@example.org" })));
    op!("profile update: forbidden field", false, student.patch("/api/profile", json!({ "user_code": "x" })));

    let a = op!("add asset", true, staff.post("/api/assets", json!({ "description": "scope", "code": "AU-1", "serial_number": "au-sn-1", "cat_id": 1, "owner_id": 1, "loc_id": loc20 })));
    let a1 = a.data()["item_id"].as_i64().unwrap();
    let b = op!("add asset", true, staff.post("/api/assets", json!({ "description": "probe", "code": "AU-2", "serial_number": "au-sn-2", "cat_id": 3, "owner_id": 1, "loc_id": loc20 })));
    let a2 = b.data()["item_id"].as_i64().unwrap();
    op!("add asset: duplicate code", false, staff.post("/api/assets", json!({ "description": "x", "code": "AU-1", "cat_id": 1, "loc_id": loc20 })));
    op!("add asset: out of scope", false, staff.post("/api/assets", json!({ "description": "x", "code": "AU-3", "cat_id": 1, "loc_id": 1 })));
    op!("update asset", true, staff.patch(&format!("/api/assets/{a1}"), json!({ "status": "lent" })));
    op!("update asset: bad status", false, staff.patch(&format!("/api/assets/{a1}"), json!({ "status": "melted" })));
    op!("batch update", true, staff.patch("/api/assets", json!({ "items": [a1, a2], "patch": { "description": "both" } })));
    fault!("assets.update", "batch update: fault on second row", staff.patch("/api/assets", json!({ "items": [a1, a2], "patch": { "description": "never" } })));
    let csv = format!("{ASSET_HEADER}\nx,AU-10,au-10,2,1,{loc20},active,\ny,AU-11,au-11,2,1,{loc20},active,\nz,AU-12,au-12,2,1,{loc20},active,\n");
    fault!("import.assets", "asset import: fault mid-file", staff.upload("/api/assets/import", csv.clone()));
    op!("asset import: bad row", false, staff.upload("/api/assets/import", format!("{csv}w,AU-13,au-13,99,1,{loc20},active,\n")));
    op!("asset import", true, staff.upload("/api/assets/import", csv));
    fault!("assets.group", "group: fault", staff.post("/api/assets/group", json!({ "items": [a1, a2] })));
    op!("group", true, staff.post("/api/assets/group", json!({ "items": [a1, a2] })));
    op!("define property", true, admin.post("/api/admin/properties", json!({ "cat_id": 2, "prop_name": "Buttons", "default_value": "2" })));
    op!("define property: not L3", false, staff.post("/api/admin/properties", json!({ "cat_id": 2, "prop_name": "Wheel" })));

    let sub = op!("submit request", true, student.post("/api/requests", json!({ "request_type": 4, "identifier": "au-sn-1", "description": "move it" })));
    let r1 = sub.data()["req_id"].as_i64().unwrap();
    op!("submit request: unknown type", false, student.post("/api/requests", json!({ "request_type": 42, "description": "x" })));
    op!("submit request: identifier missing", false, student.post("/api/requests", json!({ "request_type": 6, "description": "x" })));
    fault!("requests.approve", "approve: fault", staff.post(&format!("/api/requests/{r1}/approve"), json!({ "loc_id": loc20 })));
    op!("approve: invalid location", false, staff.post(&format!("/api/requests/{r1}/approve"), json!({ "loc_id": 9999 })));
    op!("approve", true, staff.post(&format!("/api/requests/{r1}/approve"), json!({ "loc_id": loc20 })));
    op!("approve: already approved", false, staff.post(&format!("/api/requests/{r1}/approve"), json!({ "loc_id": loc20 })));
    let r2 = op!("submit request", true, student.post("/api/requests", json!({ "request_type": 1, "description": "lost pen" }))).data()["req_id"].as_i64().unwrap();
    op!("cancel: not the requester", false, staff.post(&format!("/api/requests/{r2}/cancel"), json!({})));
    op!("cancel", true, student.post(&format!("/api/requests/{r2}/cancel"), json!({})));
    let r3 = op!("submit request", true, dean.post("/api/requests", json!({ "request_type": 1, "description": "projector" }))).data()["req_id"].as_i64().unwrap();
    op!("reject without authority (comment kept)", false, staff.post(&format!("/api/requests/{r3}/reject"), json!({ "reason": "no" })));
    op!("reject: empty reason", false, admin.post(&format!("/api/requests/{r3}/reject"), json!({ "reason": "  " })));
    op!("reject", true, admin.post(&format!("/api/requests/{r3}/reject"), json!({ "reason": "budget" })));

    op!("create faculty", true, admin.post("/api/admin/faculties", json!({ "name": "Music", "code": "MUS" })));
    op!("create faculty: L1", false, staff.post("/api/admin/faculties", json!({ "name": "Law", "code": "LAW" })));
    op!("create department", true, admin.post("/api/admin/departments", json!({ "name": "Physics", "code": "PHY", "faculty_id": 1 })));
    op!("create department: unknown faculty", false, admin.post("/api/admin/departments", json!({ "name": "X", "code": "X", "faculty_id": 77 })));
    op!("add location", true, dean.post("/api/admin/locations", json!({ "loc_code": "AU-L2", "loc_name": "lab", "bldg_id": 1, "affln_id": 20 })));
    op!("add location: L1", false, staff.post("/api/admin/locations", json!({ "loc_code": "AU-L4", "loc_name": "lab", "bldg_id": 1, "affln_id": 20 })));
    op!("add location: out of scope", false, dean.post("/api/admin/locations", json!({ "loc_code": "AU-L3", "loc_name": "lab", "bldg_id": 1, "affln_id": 30 })));
    let ucsv = format!("{USER_HEADER}\nau_n1,A,B,{PASSWORD},10,20,\nau_n2,A,B,{PASSWORD},10,20,\nau_n3,A,B,{PASSWORD},10,20,\n");
    fault!("import.users", "user import: fault mid-file", admin.upload("/api/admin/users/import", ucsv.clone()));
    op!("user import: escalation", false, staff.upload("/api/admin/users/import", format!("{USER_HEADER}\nau_x,A,B,{PASSWORD},1,20,\n")));
    let imported = op!("user import", true, admin.upload("/api/admin/users/import", ucsv));
    let new_user = imported.data()["user_ids"][0].as_i64().unwrap();
    op!("role update", true, staff.put(&format!("/api/admin/users/{new_user}/role"), json!({ "title_id": 4 })));
    op!("role update: escalation", false, staff.put(&format!("/api/admin/users/{new_user}/role"), json!({ "title_id": 1 })));

    let first = op!("backup: ask", false, admin.post("/api/admin/backup", json!({})));
    let ticket = first.body["error"]["confirmation"].clone();
    op!("backup: confirmed", true, admin.post("/api/admin/backup", json!({ "confirmation": ticket })));
    let errors = ok(admin.get("/api/errors").await, "error list")?;
    let err_id = errors[0]["error_id"].as_i64().ok_or(format!("no error report to annotate: {errors}"))?;
    op!("annotate error", true, admin.post(&format!("/api/errors/{err_id}/annotations"), json!({ "comment": "looked at it" })));
    op!("annotate error: empty", false, admin.post(&format!("/api/errors/{err_id}/annotations"), json!({ "comment": " " })));
    op!("logout", true, student.post("/api/logout", json!({})));
    s.shutdown().await;
    Ok(format!(
        "{} operations: {} committed with audit entries, {} refused or rolled back with none",
        l.names.len(),
        l.committed,
        l.rolled_back
    ))
}

// ---------------------------------------------------------------- load

pub struct LoadStats {
    pub transactions: usize,
    pub max: Duration,
    pub p50: Duration,
    pub p99: Duration,
}

/// `clients` concurrent sessions, each running `per_client` mixed
/// transactions against a file-backed instance.
pub async fn load(clients: usize, per_client: usize, seed: u64) -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let mut config = Config::default();
    config.store.path = Some(dir.path().join("uuis.db"));
    let s = Server::start(Uuis::open(config, Arc::new(SystemClock)).map_err(fail)?).await;
    let mut rng = StdRng::seed_from_u64(seed);
    let c = corpus::build(&s, &mut rng, "w", Size { users: 8, locations: 12, items: 200, requests: 20 }).await;
    let world = World::load(&s.uuis);
    let depts = [10, 11, 12, 13, 20, 21, 30, 31];
    let mut locs = std::collections::HashMap::new();
    for d in depts {
        locs.insert(d, add_location(&c.admin, &format!("W-{d}"), d).await);
    }
    let mut csv = format!("{USER_HEADER}\n");
    let mut plan = Vec::new();
    for i in 0..clients {
        let dept = depts[i % depts.len()];
        let title = [TITLE_L0, TITLE_L1, TITLE_L2][i % 3];
        csv.push_str(&format!("load{i},L,F,{PASSWORD},{title},{dept},\n"));
        plan.push((format!("load{i}"), title != TITLE_L0, dept));
    }
    ok(c.admin.upload("/api/admin/users/import", csv).await, "load users")?;
    drop(world);

    let barrier = Arc::new(tokio::sync::Barrier::new(clients));
    let started = Instant::now();
    let mut tasks = Vec::new();
    for (i, (code, staff, dept)) in plan.into_iter().enumerate() {
        let anon = s.client();
        let barrier = Arc::clone(&barrier);
        let loc = locs[&dept];
        tasks.push(tokio::spawn(async move {
            let mut rng = StdRng::seed_from_u64(seed ^ i as u64);
            let mut times = Vec::new();
            let mut failures = Vec::new();
            barrier.wait().await;
            let login = anon.try_login(&code, PASSWORD).await;
            times.push(login.elapsed);
            let Some(token) = login.data()["session_id"].as_str() else {
                return (times, vec![format!("{code} login: {}", login.text)]);
            };
            let me = anon.with_token(token);
            for n in 0..per_client {
                let pick = rng.random_range(0..if staff { 10 } else { 5 });
                let word = *WORDS.choose(&mut rng).unwrap();
                let r = match pick {
                    0 => me.get("/api/profile").await,
                    1 => me.post("/api/requests", json!({ "request_type": 1, "description": format!("{code} #{n}") })).await,
                    2 => me.get("/api/requests?size=10").await,
                    3 => me.patch("/api/profile", json!({ "email": format!("{code}.{n}@example.org") })).await,
                    4 => me.post("/api/search/basic", json!({ "target": "requests", "text": "#" })).await,
                    5 => me.get(&format!("/api/assets?page={}&size=20", rng.random_range(0..3))).await,
                    6 => me.post("/api/search/basic", json!({ "target": "items", "text": word })).await,
                    7 => {
                        me.post(
                            "/api/search/advanced",
                            json!({ "target": "items", "parameters": [
                                { "field": "status", "op": "eq", "value": "active" },
                                { "field": "item_description", "op": "contains", "value": word }
                            ], "expression": "1 OR 2" }),
                        )
                        .await
                    }
                    8 => me.post("/api/review/logs?size=20", json!({ "event_prefix": "request" })).await,
                    _ => {
                        me.post(
                            "/api/assets",
                            json!({ "description": word, "code": format!("{code}-{n}"), "serial_number": format!("{code}-sn-{n}"), "cat_id": 2, "owner_id": 1, "loc_id": loc }),
                        )
                        .await
                    }
                };
                times.push(r.elapsed);
                if !r.is_ok() {
                    failures.push(format!("{code} op {pick}: {} {}", r.status, r.text));
                }
            }
            let out = me.post("/api/logout", json!({})).await;
            times.push(out.elapsed);
            (times, failures)
        }));
    }
    let mut times = Vec::new();
    let mut failures = Vec::new();
    for t in tasks {
        let (ts, fs) = t.await.map_err(fail)?;
        times.extend(ts);
        failures.extend(fs);
    }
    let total = started.elapsed();
    s.shutdown().await;
    times.sort();
    let stats = LoadStats {
        transactions: times.len(),
        max: *times.last().unwrap_or(&Duration::ZERO),
        p50: times[times.len() / 2],
        p99: times[times.len() * 99 / 100],
    };
    ensure!(failures.is_empty(), "{} failed transactions, first: {}", failures.len(), failures[0]);
    ensure!(stats.max < Duration::from_secs(5), "slowest transaction took {:?}", stats.max);
    ensure!(stats.transactions == clients * (per_client + 2), "{} transactions completed", stats.transactions);
    Ok(format!(
        "{clients} clients, {} transactions in {:.1}s; p50 {:?}, p99 {:?}, max {:?}",
        stats.transactions,
        total.as_secs_f64(),
        stats.p50,
        stats.p99,
        stats.max
    ))
}
