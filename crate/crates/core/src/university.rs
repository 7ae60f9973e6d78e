//! Faculties, departments, locations, manual backups, user import and role
//! administration.

use std::collections::{HashMap, HashSet};

use rand::RngCore;
use rusqlite::{params, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::auth::Actor;
use crate::csvio::{self, CsvRow};
use crate::domain::{Affiliation, AffiliationKind, AfflnId, PermissionLevel, PermissionSignature, UserId, UserRole};
use crate::error::{Error, Issue, Result};
use crate::lookup;
use crate::password;
use crate::service::Uuis;
use crate::store::backup::BackupRecord;
use crate::store::Severity;

pub const USER_CSV_HEADER: [&str; 7] = ["user_code", "last_name", "first_name", "password", "title_id", "affln_id", "email"];

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewLocation {
    pub parent_loc_id: Option<i64>,
    pub loc_code: String,
    pub loc_name: String,
    pub bldg_id: i64,
    pub affln_id: AfflnId,
    pub status: Option<String>,
    pub loc_type_id: Option<i64>,
    pub comment: Option<String>,
    pub seats: Option<i64>,
    pub capacity: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationRecord {
    pub loc_id: i64,
    pub parent_loc_id: Option<i64>,
    pub loc_code: Option<String>,
    pub loc_name: Option<String>,
    pub bldg_id: Option<i64>,
    pub affln_id: Option<AfflnId>,
    pub status: Option<String>,
    pub loc_type_id: Option<i64>,
    pub comment: Option<String>,
    pub seats: Option<i64>,
    pub capacity: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GeneratedPassword {
    pub user_code: String,
    pub password: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UserImportReport {
    pub inserted: usize,
    pub user_ids: Vec<UserId>,
    /// Initial passwords made up for rows that left the column blank.
    pub generated_passwords: Vec<GeneratedPassword>,
}

/// Requested changes to a user's role. Absent fields are left alone.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoleChange {
    /// Which of the user's roles; the highest-level one when absent.
    pub user_role_id: Option<i64>,
    pub title_id: Option<i64>,
    pub affln_id: Option<AfflnId>,
    /// Per-role signature that takes precedence over the title's.
    pub permission_override: Option<u64>,
    /// Drop the per-role signature and fall back to the title's.
    pub clear_override: bool,
    /// Reset the failed-login counter.
    pub unlock: bool,
}

pub(crate) fn location_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<LocationRecord> {
    Ok(LocationRecord {
        loc_id: r.get(0)?,
        parent_loc_id: r.get(1)?,
        loc_code: r.get(2)?,
        loc_name: r.get(3)?,
        bldg_id: r.get(4)?,
        affln_id: r.get(5)?,
        status: r.get(6)?,
        loc_type_id: r.get(7)?,
        comment: r.get(8)?,
        seats: r.get(9)?,
        capacity: r.get(10)?,
    })
}

pub(crate) const LOCATION_SELECT: &str = "SELECT loc_id, parent_loc_id, loc_code, loc_name, bldg_id, affln_id, status, loc_type_id, comment, seats, capacity FROM locations";

fn required(value: &str, what: &str) -> Result<String> {
    let v = value.trim();
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} must not be empty")));
    }
    Ok(v.to_string())
}

fn title_permission(c: &rusqlite::Connection, title_id: i64) -> Result<Option<PermissionSignature>> {
    c.query_row("SELECT permission FROM professionaltitles WHERE title_id = ?1", [title_id], |r| {
        r.get::<_, Option<i64>>(0)
    })
    .optional()?
    .map(|p| PermissionSignature::from_stored(p.unwrap_or(0)))
    .transpose()
}

impl Uuis {
    /// The affiliation tree, for any signed-in user.
    pub fn affiliations(&self, token: &str) -> Result<Vec<Affiliation>> {
        let actor = self.actor(token)?;
        Ok(actor.hierarchy.iter().cloned().collect())
    }

    pub fn create_faculty(&self, token: &str, name: &str, code: &str) -> Result<Affiliation> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L3, "creating a faculty")?;
        self.insert_affiliation(&actor, name, code, crate::domain::UNIVERSITY)
    }

    pub fn create_department(&self, token: &str, name: &str, code: &str, faculty_id: AfflnId) -> Result<Affiliation> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L2, "creating a department")?;
        let faculty = actor.hierarchy.get(faculty_id)?;
        if faculty.kind != AffiliationKind::Faculty {
            return Err(Error::invalid(format!("affiliation {faculty_id} is not a faculty")));
        }
        actor.require_covers(faculty_id, "that faculty")?;
        self.insert_affiliation(&actor, name, code, faculty_id)
    }

    fn insert_affiliation(&self, actor: &Actor, name: &str, code: &str, parent: AfflnId) -> Result<Affiliation> {
        let name = required(name, "name")?;
        let code = required(code, "code")?;
        self.store().write(|tx| {
            let clash: Option<i64> = tx
                .query_row(
                    "SELECT affln_id FROM affiliations WHERE lower(trim(affln_code)) = lower(?1)",
                    [&code],
                    |r| r.get(0),
                )
                .optional()?;
            if let Some(id) = clash {
                return Err(Error::Conflict(vec![Issue::general(format!(
                    "affiliation code {code} is already used by {id}"
                ))]));
            }
            let id: i64 = tx.query_row("SELECT COALESCE(MAX(affln_id), 0) + 1 FROM affiliations", [], |r| r.get(0))?;
            tx.execute(
                "INSERT INTO affiliations (affln_id, affln_name, affln_code, parent_affln_id) VALUES (?1, ?2, ?3, ?4)",
                params![id, name, code, parent],
            )?;
            // Re-validate the whole tree before committing.
            let tree = lookup::load_hierarchy(tx)?;
            tx.record_log(
                Some(actor.user_id),
                None,
                "affln.create",
                &format!("affiliation {id} {code} \"{name}\" under {parent}"),
            )?;
            Ok(tree.get(id)?.clone())
        })
    }

    pub fn add_location(&self, token: &str, loc: NewLocation) -> Result<LocationRecord> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L2, "adding a location")?;
        let code = required(&loc.loc_code, "loc_code")?;
        let name = required(&loc.loc_name, "loc_name")?;
        if !actor.hierarchy.contains(loc.affln_id) {
            return Err(Error::InvalidReference(format!("affiliation {}", loc.affln_id)));
        }
        actor.require_covers(loc.affln_id, "that affiliation")?;
        if loc.seats.is_some_and(|v| v < 0) || loc.capacity.is_some_and(|v| v < 0) {
            return Err(Error::invalid("seats and capacity cannot be negative"));
        }
        self.store().write(|tx| {
            if !lookup::exists(tx, "building", "bldg_id", loc.bldg_id)? {
                return Err(Error::InvalidReference(format!("building {}", loc.bldg_id)));
            }
            if let Some(p) = loc.parent_loc_id {
                if !lookup::exists(tx, "locations", "loc_id", p)? {
                    return Err(Error::InvalidReference(format!("location {p}")));
                }
            }
            if let Some(t) = loc.loc_type_id {
                if !lookup::exists(tx, "locationtypes", "loc_type_id", t)? {
                    return Err(Error::InvalidReference(format!("location type {t}")));
                }
            }
            let clash: Option<i64> = tx
                .query_row(
                    "SELECT loc_id FROM locations WHERE lower(loc_code) = lower(?1)
                     AND COALESCE(status, '') <> 'inactive'",
                    [&code],
                    |r| r.get(0),
                )
                .optional()?;
            if let Some(id) = clash {
                return Err(Error::Conflict(vec![Issue::general(format!(
                    "location code {code} is in use by location {id}"
                ))]));
            }
            tx.execute(
                "INSERT INTO locations (parent_loc_id, loc_code, loc_name, bldg_id, affln_id, status, loc_type_id, comment, seats, capacity)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
                params![
                    loc.parent_loc_id,
                    code,
                    name,
                    loc.bldg_id,
                    loc.affln_id,
                    loc.status,
                    loc.loc_type_id,
                    loc.comment,
                    loc.seats,
                    loc.capacity
                ],
            )?;
            let id = tx.last_insert_rowid();
            tx.record_log(
                Some(actor.user_id),
                None,
                "location.create",
                &format!("location {id} {code} in affiliation {}", loc.affln_id),
            )?;
            Ok(tx.query_row(&format!("{LOCATION_SELECT} WHERE loc_id = ?1"), [id], location_from_row)?)
        })
    }

    /// Locations attributed to the caller's scope.
    pub fn locations(&self, token: &str) -> Result<Vec<LocationRecord>> {
        let actor = self.actor(token)?;
        let all = self.store().read(|c| {
            let mut stmt = c.prepare(&format!("{LOCATION_SELECT} ORDER BY loc_id"))?;
            let rows = stmt.query_map([], location_from_row)?.collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(rows)
        })?;
        let members: HashSet<AfflnId> = actor.scope_members().into_iter().collect();
        Ok(all
            .into_iter()
            .filter(|l| {
                actor.scope == crate::domain::AffiliationScope::University
                    || l.affln_id.is_some_and(|a| members.contains(&a))
            })
            .collect())
    }

    /// Starts a manual backup. The first call (no `confirmation`) returns
    /// [`Error::ConfirmationRequired`] carrying a token; repeating the call
    /// with that token runs the backup.
    pub fn trigger_backup(&self, token: &str, confirmation: Option<&str>) -> Result<BackupRecord> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "a manual backup")?;
        let Some(confirmation) = confirmation.filter(|c| !c.is_empty()) else {
            let mut bytes = [0u8; 16];
            rand::rng().fill_bytes(&mut bytes);
            let ticket = hex::encode(bytes);
            self.shared
                .confirmations
                .lock()
                .insert(ticket.clone(), actor.session_id.clone());
            return Err(Error::ConfirmationRequired { token: ticket });
        };
        {
            let mut pending = self.shared.confirmations.lock();
            match pending.get(confirmation) {
                Some(owner) if *owner == actor.session_id => {
                    pending.remove(confirmation);
                }
                _ => return Err(Error::invalid("unknown or foreign confirmation token")),
            }
        }
        let (record, _) = self.vault().take(self.store(), "manual")?;
        self.store().write(|tx| {
            tx.record_log(
                Some(actor.user_id),
                None,
                "backup.manual",
                &format!("archive {} {}", record.archive_id, record.checksum),
            )
        })?;
        Ok(record)
    }

    /// Archives taken by this process, for L1 and above.
    pub fn list_backups(&self, token: &str) -> Result<Vec<BackupRecord>> {
        self.actor(token)?.require(PermissionLevel::L1, "listing backups")?;
        Ok(self.vault().records())
    }

    /// Creates users from CSV with columns [`USER_CSV_HEADER`]. Every row is
    /// checked first; one bad row and nothing is inserted.
    pub fn bulk_import_users(&self, token: &str, csv: &[u8]) -> Result<UserImportReport> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "importing users")?;
        let result = csvio::parse_upload(csv, &USER_CSV_HEADER).and_then(|rows| self.import_users(&actor, &rows));
        if let Err(e) = &result {
            if !e.issues().is_empty() {
                let lines: Vec<String> = e
                    .issues()
                    .iter()
                    .take(20)
                    .map(|i| match i.line {
                        Some(l) => format!("line {l}: {}", i.message),
                        None => i.message.clone(),
                    })
                    .collect();
                self.report(
                    "import.users",
                    Severity::Warning,
                    format!("user import by {} refused: {}", actor.user_id, e.code()),
                    Some(lines.join("\n")),
                    Some(actor.role.affln_id),
                );
            }
        }
        result
    }

    fn import_users(&self, actor: &Actor, rows: &[CsvRow]) -> Result<UserImportReport> {
        struct Parsed {
            line: usize,
            code: String,
            last: String,
            first: String,
            password: Option<String>,
            title_id: i64,
            affln_id: AfflnId,
            email: Option<String>,
        }
        let titles: HashMap<i64, PermissionSignature> = self.store().read(|c| {
            let mut stmt = c.prepare("SELECT title_id, permission FROM professionaltitles")?;
            let raw = stmt
                .query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, Option<i64>>(1)?)))?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            raw.into_iter()
                .map(|(id, p)| Ok((id, PermissionSignature::from_stored(p.unwrap_or(0))?)))
                .collect()
        })?;

        let mut invalid = Vec::new();
        let mut parsed = Vec::new();
        for row in rows {
            let mut bad = |m: String| invalid.push(Issue::at(row.line, m));
            let code = row.get(0).to_string();
            if code.is_empty() {
                bad("user_code is empty".into());
                continue;
            }
            let password = match row.get(3) {
                "" => None,
                p => {
                    if let Some(why) = password::policy_violation(p) {
                        bad(format!("password {why}"));
                        continue;
                    }
                    Some(p.to_string())
                }
            };
            let Ok(title_id) = row.get(4).parse::<i64>() else {
                bad(format!("title_id `{}` is not a number", row.get(4)));
                continue;
            };
            if !titles.contains_key(&title_id) {
                bad(format!("title {title_id} does not exist"));
                continue;
            }
            let Ok(affln_id) = row.get(5).parse::<i64>() else {
                bad(format!("affln_id `{}` is not a number", row.get(5)));
                continue;
            };
            if !actor.hierarchy.contains(affln_id) {
                bad(format!("affiliation {affln_id} does not exist"));
                continue;
            }
            let email = match row.get(6) {
                "" => None,
                e if e.contains('@') => Some(e.to_string()),
                e => {
                    bad(format!("email `{e}` has no @"));
                    continue;
                }
            };
            parsed.push(Parsed {
                line: row.line,
                code,
                last: row.get(1).to_string(),
                first: row.get(2).to_string(),
                password,
                title_id,
                affln_id,
                email,
            });
        }
        if !invalid.is_empty() {
            return Err(Error::InvalidInput(invalid));
        }
        if parsed.is_empty() {
            return Err(Error::InvalidInput(vec![Issue::general("the file has no data rows")]));
        }

        let mut outside = Vec::new();
        for p in &parsed {
            if !actor.covers(p.affln_id)? {
                outside.push(Issue::at(p.line, format!("affiliation {} is outside your scope", p.affln_id)));
            } else if titles[&p.title_id].level() >= actor.level() {
                outside.push(Issue::at(
                    p.line,
                    format!("title {} grants level {}, not below yours", p.title_id, titles[&p.title_id].level()),
                ));
            }
        }
        if !outside.is_empty() {
            return Err(Error::ForbiddenRow(outside));
        }

        self.store().write(|tx| {
            let mut conflicts = Vec::new();
            let mut seen: HashMap<String, usize> = HashMap::new();
            for p in &parsed {
                let key = p.code.to_lowercase();
                if let Some(first) = seen.get(&key) {
                    conflicts.push(Issue::at(p.line, format!("user_code {} repeats line {first}", p.code)));
                    continue;
                }
                seen.insert(key, p.line);
                let existing: Option<i64> = tx
                    .query_row("SELECT user_id FROM users WHERE lower(user_code) = lower(?1)", [&p.code], |r| {
                        r.get(0)
                    })
                    .optional()?;
                if let Some(id) = existing {
                    conflicts.push(Issue::at(p.line, format!("user_code {} already belongs to user {id}", p.code)));
                }
            }
            if !conflicts.is_empty() {
                return Err(Error::Conflict(conflicts));
            }
            let now = tx.now_str();
            let mut report = UserImportReport {
                inserted: 0,
                user_ids: Vec::new(),
                generated_passwords: Vec::new(),
            };
            for (n, p) in parsed.iter().enumerate() {
                if n == parsed.len() / 2 {
                    tx.fault_point("import.users")?;
                }
                let plain = match &p.password {
                    Some(pw) => pw.clone(),
                    None => {
                        let pw = password::generate();
                        report.generated_passwords.push(GeneratedPassword {
                            user_code: p.code.clone(),
                            password: pw.clone(),
                        });
                        pw
                    }
                };
                tx.execute(
                    "INSERT INTO users (user_code, last_name, first_name, password, date_modified, login_attempts)
                     VALUES (?1, ?2, ?3, ?4, ?5, 0)",
                    params![p.code, p.last, p.first, password::hash(&plain), now],
                )?;
                let uid = tx.last_insert_rowid();
                tx.execute(
                    "INSERT INTO userroles (user_id, title_id, affln_id, status) VALUES (?1, ?2, ?3, 'active')",
                    params![uid, p.title_id, p.affln_id],
                )?;
                if let Some(email) = &p.email {
                    tx.execute("INSERT INTO userinfo (user_id, email) VALUES (?1, ?2)", params![uid, email])?;
                }
                tx.record_log(
                    Some(actor.user_id),
                    None,
                    "user.create",
                    &format!("user {uid} {} title {} affiliation {}", p.code, p.title_id, p.affln_id),
                )?;
                report.user_ids.push(uid);
            }
            report.inserted = report.user_ids.len();
            tx.record_log(Some(actor.user_id), None, "user.import", &format!("{} users imported", report.inserted))?;
            Ok(report)
        })
    }

    /// Changes a user's role. The caller must administer the current role,
    /// and the result must stay below the caller's level and inside the
    /// caller's scope.
    pub fn update_user_role(&self, token: &str, target_user: UserId, change: RoleChange) -> Result<UserRole> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "changing roles")?;
        if let Some(bits) = change.permission_override {
            PermissionSignature::new(bits)?;
        }
        self.store().write(|tx| {
            let role = match change.user_role_id {
                Some(id) => lookup::role_by_id(tx, id)?.filter(|r| r.user_id == target_user),
                None => lookup::primary_role(tx, target_user)?,
            }
            .ok_or_else(|| Error::not_found(format!("role of user {target_user}")))?;
            if !actor.hierarchy.may_administer(&actor.role, &role)? {
                return Err(Error::forbidden(format!("user {target_user} is not yours to administer")));
            }
            let title_id = change.title_id.or(role.title_id);
            let title_sig = match title_id {
                Some(t) => title_permission(tx, t)?.ok_or_else(|| Error::InvalidReference(format!("title {t}")))?,
                None => PermissionSignature::EMPTY,
            };
            let acl: Option<i64> =
                tx.query_row("SELECT permission FROM acls WHERE user_role_id = ?1", [role.user_role_id], |r| r.get(0))
                    .optional()?
                    .flatten();
            let acl = if change.clear_override {
                None
            } else if let Some(bits) = change.permission_override {
                Some(bits as i64)
            } else {
                acl
            };
            let effective = UserRole::effective(acl, Some(i64::from(title_sig.bits())))?;
            if effective.level() >= actor.level() {
                return Err(Error::ForbiddenEscalation);
            }
            let affln_id = change.affln_id.unwrap_or(role.affln_id);
            if !actor.hierarchy.contains(affln_id) {
                return Err(Error::InvalidReference(format!("affiliation {affln_id}")));
            }
            actor.require_covers(affln_id, "the new affiliation")?;

            let mut changed = Vec::new();
            if title_id != role.title_id || affln_id != role.affln_id {
                tx.execute(
                    "UPDATE userroles SET title_id = ?1, affln_id = ?2 WHERE user_role_id = ?3",
                    params![title_id, affln_id, role.user_role_id],
                )?;
                changed.push(format!("title {title_id:?} affiliation {affln_id}"));
            }
            if change.clear_override {
                tx.execute("DELETE FROM acls WHERE user_role_id = ?1", [role.user_role_id])?;
                changed.push("override cleared".into());
            } else if let Some(bits) = change.permission_override {
                tx.execute(
                    "INSERT INTO acls (user_role_id, permission) VALUES (?1, ?2)
                     ON CONFLICT(user_role_id) DO UPDATE SET permission = excluded.permission",
                    params![role.user_role_id, bits as i64],
                )?;
                changed.push(format!("override {bits}"));
            }
            if !changed.is_empty() {
                tx.execute(
                    "UPDATE users SET date_modified = ?1 WHERE user_id = ?2",
                    params![tx.now_str(), target_user],
                )?;
                tx.record_log(
                    Some(actor.user_id),
                    None,
                    "role.update",
                    &format!("user {target_user} role {}: {}", role.user_role_id, changed.join(", ")),
                )?;
            }
            if change.unlock {
                tx.execute("UPDATE users SET login_attempts = 0 WHERE user_id = ?1", [target_user])?;
                tx.record_log(Some(actor.user_id), None, "auth.unlock", &format!("user {target_user} unlocked"))?;
            }
            lookup::role_by_id(tx, role.user_role_id)?.ok_or_else(|| Error::not_found("role"))
        })
    }
}
