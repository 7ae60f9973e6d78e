//! Assets: listing, single and bulk creation, updates, grouping, and the
//! per-category property rules.

use std::collections::{BTreeMap, HashMap, HashSet};

use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::auth::Actor;
use crate::csvio::{self, CsvRow};
use crate::domain::{AfflnId, ItemId, PermissionLevel, UserId};
use crate::error::{Error, Issue, Result};
use crate::lookup;
use crate::page::{PageRequest, ResultPage};
use crate::search::{Query, Record, SearchTarget};
use crate::service::Uuis;
use crate::store::{Severity, Tx};

pub const ASSET_CSV_HEADER: [&str; 8] = [
    "description",
    "code",
    "serial_number",
    "cat_id",
    "owner_id",
    "loc_id",
    "status",
    "properties",
];

/// Values `items.status` may take. Blank means unset.
pub const ASSET_STATUSES: [&str; 4] = ["active", "inactive", "stolen", "lent"];

pub const PROPERTY_VALUE_MAX: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub item_id: ItemId,
    pub item_description: Option<String>,
    pub code: Option<String>,
    pub group_id: Option<i64>,
    pub serial_number: Option<String>,
    pub cat_id: Option<i64>,
    pub owner_id: Option<UserId>,
    pub loc_id: Option<i64>,
    pub date_modified: Option<String>,
    pub status: Option<String>,
    pub properties: BTreeMap<String, String>,
    /// The affiliation the asset is attributed to for scope checks.
    pub affln_id: AfflnId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewAsset {
    pub description: String,
    pub code: String,
    pub serial_number: String,
    pub cat_id: i64,
    pub owner_id: UserId,
    pub loc_id: i64,
    pub status: Option<String>,
    pub properties: BTreeMap<String, String>,
}

/// Fields to change on one or more assets. Property values are merged; an
/// empty value removes the property.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetPatch {
    pub description: Option<String>,
    pub code: Option<String>,
    pub serial_number: Option<String>,
    pub cat_id: Option<i64>,
    pub owner_id: Option<UserId>,
    pub loc_id: Option<i64>,
    pub status: Option<String>,
    pub properties: BTreeMap<String, String>,
}

impl AssetPatch {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssetGroup {
    pub group_id: i64,
    pub members: Vec<ItemId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssetImportReport {
    pub inserted: usize,
    pub item_ids: Vec<ItemId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyDefinition {
    pub prop_id: i64,
    pub cat_id: i64,
    pub prop_name: String,
    pub default_value: Option<String>,
    pub required: bool,
    /// The property whose numeric value caps this one.
    pub numeric_cap_of: Option<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewPropertyDefinition {
    pub cat_id: i64,
    pub prop_name: String,
    pub default_value: Option<String>,
    pub required: bool,
    pub numeric_cap_of: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Category {
    pub cat_id: i64,
    pub parent_cat_id: Option<String>,
    pub description: Option<String>,
    pub properties: Vec<PropertyDefinition>,
}

/// Why a candidate asset was refused.
#[derive(Debug)]
enum Fault {
    Reference(String),
    Property(String),
    Invalid(String),
    Scope(String),
    Conflict(String),
}

impl Fault {
    fn into_error(self) -> Error {
        match self {
            Fault::Reference(m) => Error::InvalidReference(m),
            Fault::Property(m) => Error::InvalidProperty(m),
            Fault::Invalid(m) => Error::ValidationFailed(vec![Issue::general(m)]),
            Fault::Scope(m) => Error::Forbidden(m),
            Fault::Conflict(m) => Error::Conflict(vec![Issue::general(m)]),
        }
    }
}

impl From<Error> for Fault {
    fn from(e: Error) -> Self {
        Fault::Invalid(e.to_string())
    }
}

/// The column values an asset will have once written.
#[derive(Clone, Debug)]
struct Candidate {
    description: Option<String>,
    code: Option<String>,
    serial_number: Option<String>,
    cat_id: Option<i64>,
    owner_id: Option<UserId>,
    loc_id: Option<i64>,
    status: Option<String>,
    properties: BTreeMap<String, String>,
}

fn blank_to_none(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

fn load_definitions(c: &Connection) -> Result<Vec<PropertyDefinition>> {
    let mut stmt = c.prepare(
        "SELECT prop_id, cat_id, prop_name, default_value, required, numeric_cap_of FROM itempropertylist ORDER BY prop_id",
    )?;
    let rows = stmt
        .query_map([], |r| {
            Ok(PropertyDefinition {
                prop_id: r.get(0)?,
                cat_id: r.get::<_, Option<i64>>(1)?.unwrap_or(0),
                prop_name: r.get::<_, Option<String>>(2)?.unwrap_or_default(),
                default_value: r.get(3)?,
                required: r.get::<_, i64>(4)? != 0,
                numeric_cap_of: r.get(5)?,
            })
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(rows)
}

fn load_properties(c: &Connection, item: ItemId) -> Result<BTreeMap<String, String>> {
    let mut stmt = c.prepare(
        "SELECT l.prop_name, p.prop_value FROM itemproperties p JOIN itempropertylist l ON l.prop_id = p.prop_id
         WHERE p.item_id = ?1 ORDER BY p.item_prop_id",
    )?;
    let rows = stmt
        .query_map([item], |r| {
            Ok((r.get::<_, Option<String>>(0)?.unwrap_or_default(), r.get::<_, Option<String>>(1)?.unwrap_or_default()))
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(rows.into_iter().collect())
}

pub(crate) fn load_asset(c: &Connection, item: ItemId) -> Result<Asset> {
    let mut asset = c
        .query_row(
            "SELECT item_id, item_description, code, group_id, serial_number, cat_id, owner_id, loc_id, date_modified, status
             FROM items WHERE item_id = ?1",
            [item],
            |r| {
                Ok(Asset {
                    item_id: r.get(0)?,
                    item_description: r.get(1)?,
                    code: r.get(2)?,
                    group_id: r.get(3)?,
                    serial_number: r.get(4)?,
                    cat_id: r.get(5)?,
                    owner_id: r.get(6)?,
                    loc_id: r.get(7)?,
                    date_modified: r.get(8)?,
                    status: r.get::<_, Option<String>>(9)?.filter(|s| !s.is_empty()),
                    properties: BTreeMap::new(),
                    affln_id: 0,
                })
            },
        )
        .optional()?
        .ok_or_else(|| Error::not_found(format!("item {item}")))?;
    asset.properties = load_properties(c, item)?;
    asset.affln_id = lookup::attribute_asset(c, asset.loc_id, asset.owner_id)?;
    Ok(asset)
}

fn candidate_of(asset: &Asset) -> Candidate {
    Candidate {
        description: asset.item_description.clone(),
        code: asset.code.clone(),
        serial_number: asset.serial_number.clone(),
        cat_id: asset.cat_id,
        owner_id: asset.owner_id,
        loc_id: asset.loc_id,
        status: asset.status.clone(),
        properties: asset.properties.clone(),
    }
}

impl Candidate {
    fn from_new(n: &NewAsset) -> Self {
        Self {
            description: blank_to_none(&n.description),
            code: blank_to_none(&n.code),
            serial_number: blank_to_none(&n.serial_number),
            cat_id: Some(n.cat_id),
            owner_id: Some(n.owner_id),
            loc_id: Some(n.loc_id),
            status: n.status.as_deref().and_then(blank_to_none),
            properties: n.properties.clone(),
        }
    }

    fn apply(&mut self, p: &AssetPatch) {
        if let Some(v) = &p.description {
            self.description = blank_to_none(v);
        }
        if let Some(v) = &p.code {
            self.code = blank_to_none(v);
        }
        if let Some(v) = &p.serial_number {
            self.serial_number = blank_to_none(v);
        }
        if let Some(v) = p.cat_id {
            self.cat_id = Some(v);
        }
        if let Some(v) = p.owner_id {
            self.owner_id = Some(v);
        }
        if let Some(v) = p.loc_id {
            self.loc_id = Some(v);
        }
        if let Some(v) = &p.status {
            self.status = blank_to_none(v);
        }
        for (k, v) in &p.properties {
            match blank_to_none(v) {
                Some(v) => {
                    self.properties.insert(k.clone(), v);
                }
                None => {
                    self.properties.remove(k);
                }
            }
        }
    }
}

/// Checks a candidate against references, status, properties and the
/// caller's scope, filling in property defaults. Returns the attributed
/// affiliation.
fn validate(
    c: &Connection,
    actor: &Actor,
    defs: &[PropertyDefinition],
    cand: &mut Candidate,
    changed: Option<&AssetPatch>,
) -> std::result::Result<AfflnId, Fault> {
    // Updates only re-check the references they touch; seeded rows may hold
    // dangling ones.
    let check = |touched: bool| changed.is_none() || touched;
    let cat = cand.cat_id.unwrap_or(0);
    if check(changed.is_some_and(|p| p.cat_id.is_some()))
        && (cat == 0 || !lookup::exists(c, "categories", "cat_id", cat)?)
    {
        return Err(Fault::Reference(format!("category {cat}")));
    }
    let loc = cand.loc_id.ok_or_else(|| Fault::Reference("a location is required".into()))?;
    if check(changed.is_some_and(|p| p.loc_id.is_some())) && !lookup::exists(c, "locations", "loc_id", loc)? {
        return Err(Fault::Reference(format!("location {loc}")));
    }
    let owner = cand.owner_id.unwrap_or(0);
    if check(changed.is_some_and(|p| p.owner_id.is_some())) && owner != 0 && !lookup::exists(c, "users", "user_id", owner)? {
        return Err(Fault::Reference(format!("owner {owner}")));
    }
    if let Some(s) = &cand.status {
        let lower = s.to_ascii_lowercase();
        if !ASSET_STATUSES.contains(&lower.as_str()) {
            return Err(Fault::Invalid(format!("status `{s}` is not one of {}", ASSET_STATUSES.join(", "))));
        }
        cand.status = Some(lower);
    }

    let mine: Vec<&PropertyDefinition> = defs.iter().filter(|d| d.cat_id == cat).collect();
    let mut resolved: BTreeMap<String, String> = BTreeMap::new();
    for (name, value) in &cand.properties {
        let Some(def) = mine.iter().find(|d| d.prop_name.eq_ignore_ascii_case(name.trim())) else {
            let elsewhere = defs.iter().find(|d| d.prop_name.eq_ignore_ascii_case(name.trim()));
            return Err(Fault::Property(match elsewhere {
                Some(d) => format!("property `{name}` belongs to category {}, not {cat}", d.cat_id),
                None => format!("property `{name}` is not defined for category {cat}"),
            }));
        };
        if value.chars().count() > PROPERTY_VALUE_MAX {
            return Err(Fault::Invalid(format!("property `{name}` exceeds {PROPERTY_VALUE_MAX} characters")));
        }
        resolved.insert(def.prop_name.clone(), value.trim().to_string());
    }
    for def in &mine {
        if !resolved.contains_key(&def.prop_name) {
            if let Some(d) = def.default_value.as_deref().and_then(blank_to_none) {
                resolved.insert(def.prop_name.clone(), d);
            } else if def.required {
                return Err(Fault::Invalid(format!("required property `{}` is missing", def.prop_name)));
            }
        }
    }
    for def in &mine {
        let Some(cap_id) = def.numeric_cap_of else { continue };
        let Some(cap) = mine.iter().find(|d| d.prop_id == cap_id) else { continue };
        let (Some(v), Some(limit)) = (resolved.get(&def.prop_name), resolved.get(&cap.prop_name)) else {
            continue;
        };
        let num = |s: &str, n: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Fault::Invalid(format!("property `{n}` must be numeric, found `{s}`")))
        };
        let (v, limit) = (num(v, &def.prop_name)?, num(limit, &cap.prop_name)?);
        if v > limit {
            return Err(Fault::Invalid(format!(
                "`{}` is {v}, above the `{}` limit of {limit}",
                def.prop_name, cap.prop_name
            )));
        }
    }
    cand.properties = resolved;

    let affln = lookup::attribute_asset(c, Some(loc), Some(owner))?;
    if !actor.covers(affln)? {
        return Err(Fault::Scope(format!("the asset would belong to affiliation {affln}, outside your scope")));
    }
    Ok(affln)
}

fn code_taken(c: &Connection, code: &str) -> Result<Option<ItemId>> {
    Ok(c.query_row("SELECT item_id FROM items WHERE code = ?1 LIMIT 1", [code], |r| r.get(0))
        .optional()?)
}

fn write_properties(tx: &Tx<'_>, defs: &[PropertyDefinition], item: ItemId, cat: i64, props: &BTreeMap<String, String>) -> Result<()> {
    tx.execute("DELETE FROM itemproperties WHERE item_id = ?1", [item])?;
    for (name, value) in props {
        let def = defs
            .iter()
            .find(|d| d.cat_id == cat && d.prop_name == *name)
            .ok_or_else(|| Error::InvalidProperty(name.clone()))?;
        tx.execute(
            "INSERT INTO itemproperties (item_id, prop_id, prop_value) VALUES (?1, ?2, ?3)",
            params![item, def.prop_id, value],
        )?;
    }
    Ok(())
}

fn insert_item(tx: &mut Tx<'_>, actor: &Actor, defs: &[PropertyDefinition], cand: &Candidate, how: &str) -> Result<ItemId> {
    tx.execute(
        "INSERT INTO items (item_description, code, group_id, serial_number, cat_id, owner_id, loc_id, date_modified, status)
         VALUES (?1, ?2, NULL, ?3, ?4, ?5, ?6, ?7, ?8)",
        params![
            cand.description,
            cand.code,
            cand.serial_number,
            cand.cat_id,
            cand.owner_id,
            cand.loc_id,
            tx.now_str(),
            cand.status
        ],
    )?;
    let id = tx.last_insert_rowid();
    write_properties(tx, defs, id, cand.cat_id.unwrap_or(0), &cand.properties)?;
    tx.record_log(
        Some(actor.user_id),
        Some(id),
        "asset.create",
        &format!(
            "{how}: code {} serial {} category {} location {} owner {}",
            cand.code.as_deref().unwrap_or("-"),
            cand.serial_number.as_deref().unwrap_or("-"),
            cand.cat_id.unwrap_or(0),
            cand.loc_id.unwrap_or(0),
            cand.owner_id.unwrap_or(0)
        ),
    )?;
    Ok(id)
}

/// Parses `name=value;name=value`.
fn parse_properties(s: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("property `{part}` is not name=value"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(format!("property `{part}` has no name"));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(format!("property `{k}` given twice"));
        }
    }
    Ok(out)
}

impl Uuis {
    /// Every asset visible to the caller; the default search over items.
    pub fn list_assets(&self, token: &str, page: PageRequest) -> Result<ResultPage<Record>> {
        let plan = self.compile(token, &Query::All, SearchTarget::Items)?;
        self.execute(token, &plan, page)
    }

    pub fn get_asset(&self, token: &str, item: ItemId) -> Result<Asset> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "viewing assets")?;
        if item == 0 {
            return Err(Error::not_found("item 0"));
        }
        let asset = self.store().read(|c| load_asset(c, item))?;
        actor.require_covers(asset.affln_id, &format!("item {item}"))?;
        Ok(asset)
    }

    pub fn categories(&self, token: &str) -> Result<Vec<Category>> {
        self.actor(token)?;
        self.store().read(|c| {
            let defs = load_definitions(c)?;
            let mut stmt = c.prepare("SELECT cat_id, parent_cat_id, description FROM categories WHERE cat_id <> 0 ORDER BY cat_id")?;
            let cats = stmt
                .query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get(1)?, r.get(2)?)))?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(cats
                .into_iter()
                .map(|(cat_id, parent_cat_id, description)| Category {
                    cat_id,
                    parent_cat_id,
                    description,
                    properties: defs.iter().filter(|d| d.cat_id == cat_id).cloned().collect(),
                })
                .collect())
        })
    }

    /// Declares a property for a category. Level 3 only.
    pub fn define_category_property(&self, token: &str, def: NewPropertyDefinition) -> Result<PropertyDefinition> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L3, "defining category properties")?;
        let name = def.prop_name.trim().to_string();
        if name.is_empty() || name.contains(['=', ';']) {
            return Err(Error::invalid("prop_name must be non-empty and free of `=` and `;`"));
        }
        self.store().write(|tx| {
            if def.cat_id == 0 || !lookup::exists(tx, "categories", "cat_id", def.cat_id)? {
                return Err(Error::InvalidReference(format!("category {}", def.cat_id)));
            }
            let defs = load_definitions(tx)?;
            if defs.iter().any(|d| d.cat_id == def.cat_id && d.prop_name.eq_ignore_ascii_case(&name)) {
                return Err(Error::Conflict(vec![Issue::general(format!(
                    "category {} already has property `{name}`",
                    def.cat_id
                ))]));
            }
            if let Some(cap) = def.numeric_cap_of {
                if !defs.iter().any(|d| d.prop_id == cap && d.cat_id == def.cat_id) {
                    return Err(Error::InvalidReference(format!("property {cap} in category {}", def.cat_id)));
                }
            }
            tx.execute(
                "INSERT INTO itempropertylist (cat_id, prop_name, default_value, required, numeric_cap_of) VALUES (?1, ?2, ?3, ?4, ?5)",
                params![def.cat_id, name, def.default_value, def.required as i64, def.numeric_cap_of],
            )?;
            let prop_id = tx.last_insert_rowid();
            tx.record_log(
                Some(actor.user_id),
                None,
                "property.define",
                &format!("property {prop_id} `{name}` for category {} required={}", def.cat_id, def.required),
            )?;
            Ok(PropertyDefinition {
                prop_id,
                cat_id: def.cat_id,
                prop_name: name.clone(),
                default_value: def.default_value.clone(),
                required: def.required,
                numeric_cap_of: def.numeric_cap_of,
            })
        })
    }

    pub fn add_asset(&self, token: &str, asset: NewAsset) -> Result<Asset> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "adding assets")?;
        self.store().write(|tx| {
            let defs = load_definitions(tx)?;
            let mut cand = Candidate::from_new(&asset);
            validate(tx, &actor, &defs, &mut cand, None).map_err(Fault::into_error)?;
            if let Some(code) = &cand.code {
                if let Some(id) = code_taken(tx, code)? {
                    return Err(Fault::Conflict(format!("code {code} is already used by item {id}")).into_error());
                }
            }
            let id = insert_item(tx, &actor, &defs, &cand, "added")?;
            load_asset(tx, id)
        })
    }

    /// Applies one patch to several assets, all or none.
    pub fn update_assets(&self, token: &str, items: &[ItemId], patch: &AssetPatch) -> Result<Vec<Asset>> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "updating assets")?;
        if items.is_empty() {
            return Err(Error::invalid("no items given"));
        }
        let unique: Vec<ItemId> = {
            let mut seen = HashSet::new();
            items.iter().copied().filter(|i| seen.insert(*i)).collect()
        };
        if unique.contains(&0) {
            return Err(Error::not_found("item 0"));
        }
        if patch.is_empty() {
            return self.store().read(|c| {
                unique
                    .iter()
                    .map(|&id| {
                        let a = load_asset(c, id)?;
                        actor.require_covers(a.affln_id, &format!("item {id}"))?;
                        Ok(a)
                    })
                    .collect()
            });
        }
        self.store().write(|tx| {
            let defs = load_definitions(tx)?;
            let mut planned = Vec::with_capacity(unique.len());
            for &id in &unique {
                let current = load_asset(tx, id)?;
                actor.require_covers(current.affln_id, &format!("item {id}"))?;
                let mut cand = candidate_of(&current);
                cand.apply(patch);
                validate(tx, &actor, &defs, &mut cand, Some(patch)).map_err(|f| match f {
                    Fault::Scope(m) => Error::Forbidden(format!("item {id}: {m}")),
                    other => other.into_error(),
                })?;
                planned.push((id, cand));
            }
            for (n, (id, cand)) in planned.iter().enumerate() {
                if n == 1 {
                    tx.fault_point("assets.update")?;
                }
                tx.execute(
                    "UPDATE items SET item_description = ?1, code = ?2, serial_number = ?3, cat_id = ?4, owner_id = ?5,
                     loc_id = ?6, status = ?7, date_modified = ?8 WHERE item_id = ?9",
                    params![
                        cand.description,
                        cand.code,
                        cand.serial_number,
                        cand.cat_id,
                        cand.owner_id,
                        cand.loc_id,
                        cand.status,
                        tx.now_str(),
                        id
                    ],
                )?;
                write_properties(tx, &defs, *id, cand.cat_id.unwrap_or(0), &cand.properties)?;
                let fields = serde_json::to_string(patch).unwrap_or_default();
                tx.record_log(Some(actor.user_id), Some(*id), "asset.update", &fields)?;
            }
            unique.iter().map(|&id| load_asset(tx, id)).collect()
        })
    }

    /// Creates assets from CSV with columns [`ASSET_CSV_HEADER`]. One bad row
    /// and nothing is inserted.
    pub fn bulk_add_assets(&self, token: &str, csv: &[u8]) -> Result<AssetImportReport> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "importing assets")?;
        let result = csvio::parse_upload(csv, &ASSET_CSV_HEADER).and_then(|rows| self.import_assets(&actor, &rows));
        if let Err(e) = &result {
            if !e.issues().is_empty() {
                let detail: Vec<String> = e
                    .issues()
                    .iter()
                    .take(20)
                    .map(|i| format!("line {}: {}", i.line.unwrap_or(0), i.message))
                    .collect();
                self.report(
                    "import.assets",
                    Severity::Warning,
                    format!("asset import by {} refused: {}", actor.user_id, e.code()),
                    Some(detail.join("\n")),
                    Some(actor.role.affln_id),
                );
            }
        }
        result
    }

    fn import_assets(&self, actor: &Actor, rows: &[CsvRow]) -> Result<AssetImportReport> {
        if rows.is_empty() {
            return Err(Error::InvalidInput(vec![Issue::general("the file has no data rows")]));
        }
        self.store().write(|tx| {
            let defs = load_definitions(tx)?;
            let (mut invalid, mut outside, mut conflicts) = (Vec::new(), Vec::new(), Vec::new());
            let mut ready = Vec::new();
            let mut codes: HashMap<String, usize> = HashMap::new();
            for row in rows {
                let num = |i: usize, name: &str| -> std::result::Result<i64, String> {
                    match row.get(i) {
                        "" if name == "owner_id" => Ok(0),
                        v => v.parse().map_err(|_| format!("{name} `{v}` is not a number")),
                    }
                };
                let parsed = (|| -> std::result::Result<NewAsset, String> {
                    Ok(NewAsset {
                        description: row.get(0).into(),
                        code: row.get(1).into(),
                        serial_number: row.get(2).into(),
                        cat_id: num(3, "cat_id")?,
                        owner_id: num(4, "owner_id")?,
                        loc_id: num(5, "loc_id")?,
                        status: blank_to_none(row.get(6)),
                        properties: parse_properties(row.get(7))?,
                    })
                })();
                let new = match parsed {
                    Ok(n) => n,
                    Err(m) => {
                        invalid.push(Issue::at(row.line, m));
                        continue;
                    }
                };
                let mut cand = Candidate::from_new(&new);
                match validate(tx, actor, &defs, &mut cand, None) {
                    Ok(_) => {}
                    Err(Fault::Scope(m)) => {
                        outside.push(Issue::at(row.line, m));
                        continue;
                    }
                    Err(Fault::Conflict(m)) => {
                        conflicts.push(Issue::at(row.line, m));
                        continue;
                    }
                    Err(Fault::Reference(m)) => {
                        invalid.push(Issue::at(row.line, format!("unknown {m}")));
                        continue;
                    }
                    Err(Fault::Property(m) | Fault::Invalid(m)) => {
                        invalid.push(Issue::at(row.line, m));
                        continue;
                    }
                }
                if let Some(code) = &cand.code {
                    if let Some(first) = codes.insert(code.clone(), row.line) {
                        conflicts.push(Issue::at(row.line, format!("code {code} repeats line {first}")));
                        continue;
                    }
                    if let Some(id) = code_taken(tx, code)? {
                        conflicts.push(Issue::at(row.line, format!("code {code} is already used by item {id}")));
                        continue;
                    }
                }
                ready.push(cand);
            }
            if !invalid.is_empty() {
                return Err(Error::InvalidInput(invalid));
            }
            if !outside.is_empty() {
                return Err(Error::ForbiddenRow(outside));
            }
            if !conflicts.is_empty() {
                return Err(Error::Conflict(conflicts));
            }
            let mut ids = Vec::with_capacity(ready.len());
            for (n, cand) in ready.iter().enumerate() {
                if n == ready.len() / 2 {
                    tx.fault_point("import.assets")?;
                }
                ids.push(insert_item(tx, actor, &defs, cand, "imported")?);
            }
            Ok(AssetImportReport {
                inserted: ids.len(),
                item_ids: ids,
            })
        })
    }

    /// Stamps a fresh group id on every listed asset.
    pub fn group_assets(&self, token: &str, items: &[ItemId]) -> Result<AssetGroup> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "grouping assets")?;
        let mut members: Vec<ItemId> = items.to_vec();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::invalid("no items given"));
        }
        if members.contains(&0) {
            return Err(Error::not_found("item 0"));
        }
        self.store().write(|tx| {
            for &id in &members {
                if !lookup::exists(tx, "items", "item_id", id)? {
                    return Err(Error::not_found(format!("item {id}")));
                }
                let affln = lookup::item_affiliation(tx, id)?;
                actor.require_covers(affln, &format!("item {id}"))?;
            }
            let group_id: i64 = tx.query_row("SELECT COALESCE(MAX(group_id), 0) + 1 FROM items", [], |r| r.get(0))?;
            let now = tx.now_str();
            for (n, &id) in members.iter().enumerate() {
                if n == 1 {
                    tx.fault_point("assets.group")?;
                }
                tx.execute(
                    "UPDATE items SET group_id = ?1, date_modified = ?2 WHERE item_id = ?3",
                    params![group_id, now, id],
                )?;
                tx.record_log(Some(actor.user_id), Some(id), "asset.group", &format!("group {group_id}"))?;
            }
            Ok(AssetGroup { group_id, members: members.clone() })
        })
    }
}
