//! Shared read helpers: roles, affiliation attribution, existence checks.

use rusqlite::{params, Connection, OptionalExtension};

use crate::domain::{AfflnId, Hierarchy, ItemId, UserId, UserRole, UNIVERSITY};
use crate::error::{Error, Result};

pub(crate) fn load_hierarchy(conn: &Connection) -> Result<Hierarchy> {
    let mut stmt = conn.prepare(
        "SELECT affln_id, COALESCE(affln_name, ''), COALESCE(affln_code, ''), parent_affln_id FROM affiliations",
    )?;
    let rows = stmt
        .query_map([], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Hierarchy::from_rows(rows)
}

const ROLE_SELECT: &str = "SELECT r.user_role_id, r.user_id, r.title_id, r.affln_id, r.status, a.permission, t.permission
     FROM userroles r
     LEFT JOIN acls a ON a.user_role_id = r.user_role_id
     LEFT JOIN professionaltitles t ON t.title_id = r.title_id";

fn role_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<(UserRole, Option<i64>, Option<i64>)> {
    Ok((
        UserRole {
            user_role_id: r.get(0)?,
            user_id: r.get::<_, Option<i64>>(1)?.unwrap_or_default(),
            title_id: r.get(2)?,
            affln_id: r.get::<_, Option<i64>>(3)?.unwrap_or(UNIVERSITY),
            status: r.get(4)?,
            effective_signature: Default::default(),
        },
        r.get(5)?,
        r.get(6)?,
    ))
}

fn finish_role((mut role, acl, title): (UserRole, Option<i64>, Option<i64>)) -> Result<UserRole> {
    role.effective_signature = UserRole::effective(acl, title)?;
    Ok(role)
}

pub(crate) fn roles_of(conn: &Connection, user: UserId) -> Result<Vec<UserRole>> {
    let mut stmt = conn.prepare(&format!("{ROLE_SELECT} WHERE r.user_id = ?1 ORDER BY r.user_role_id"))?;
    let raw = stmt
        .query_map([user], role_from_row)?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    raw.into_iter().map(finish_role).collect()
}

pub(crate) fn role_by_id(conn: &Connection, role_id: i64) -> Result<Option<UserRole>> {
    conn.query_row(&format!("{ROLE_SELECT} WHERE r.user_role_id = ?1"), [role_id], role_from_row)
        .optional()?
        .map(finish_role)
        .transpose()
}

/// Highest-level role, earliest assigned on ties.
pub(crate) fn primary_role(conn: &Connection, user: UserId) -> Result<Option<UserRole>> {
    let mut roles = roles_of(conn, user)?;
    roles.sort_by_key(UserRole::precedence_key);
    Ok(roles.into_iter().next())
}

pub(crate) fn location_affiliation(conn: &Connection, loc: i64) -> Result<Option<Option<AfflnId>>> {
    Ok(conn
        .query_row("SELECT affln_id FROM locations WHERE loc_id = ?1", [loc], |r| r.get(0))
        .optional()?)
}

/// Scope attribution for an asset: its location's affiliation when set, else
/// its owner's primary-role affiliation, else the university.
pub(crate) fn attribute_asset(conn: &Connection, loc: Option<i64>, owner: Option<UserId>) -> Result<AfflnId> {
    if let Some(loc) = loc {
        if let Some(Some(a)) = location_affiliation(conn, loc)? {
            return Ok(a);
        }
    }
    if let Some(owner) = owner {
        if let Some(role) = primary_role(conn, owner)? {
            return Ok(role.affln_id);
        }
    }
    Ok(UNIVERSITY)
}

pub(crate) fn item_affiliation(conn: &Connection, item: ItemId) -> Result<AfflnId> {
    let (loc, owner): (Option<i64>, Option<i64>) = conn
        .query_row("SELECT loc_id, owner_id FROM items WHERE item_id = ?1", [item], |r| {
            Ok((r.get(0)?, r.get(1)?))
        })
        .optional()?
        .ok_or_else(|| Error::not_found(format!("item {item}")))?;
    attribute_asset(conn, loc, owner)
}

pub(crate) fn exists(conn: &Connection, table: &str, key: &str, id: i64) -> Result<bool> {
    Ok(conn
        .query_row(&format!("SELECT 1 FROM {table} WHERE {key} = ?1"), params![id], |_| Ok(()))
        .optional()?
        .is_some())
}

/// SQL: the level (0..3) of a signature expression.
fn level_sql(sig: &str) -> String {
    format!(
        "(CASE WHEN ({sig}) & 3584 <> 0 THEN 3 WHEN ({sig}) & 448 <> 0 THEN 2 WHEN ({sig}) & 56 <> 0 THEN 1 ELSE 0 END)"
    )
}

/// SQL: the primary-role affiliation of the user in `user_col`, NULL if the
/// user has no role.
pub(crate) fn user_affln_sql(user_col: &str) -> String {
    let sig = "COALESCE(pa.permission, pt.permission, 0)";
    format!(
        "(SELECT pr.affln_id FROM userroles pr \
         LEFT JOIN acls pa ON pa.user_role_id = pr.user_role_id \
         LEFT JOIN professionaltitles pt ON pt.title_id = pr.title_id \
         WHERE pr.user_id = {user_col} ORDER BY {} DESC, pr.user_role_id ASC LIMIT 1)",
        level_sql(sig)
    )
}

/// SQL: the scope attribution of the item row aliased `alias`.
pub(crate) fn item_affln_sql(alias: &str) -> String {
    format!(
        "COALESCE((SELECT il.affln_id FROM locations il WHERE il.loc_id = {alias}.loc_id), {}, 0)",
        user_affln_sql(&format!("{alias}.owner_id"))
    )
}
