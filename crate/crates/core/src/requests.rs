//! Request workflow: submission, self-service status and cancel, and the
//! privileged pending view with approve and reject.

use std::fmt;
use std::str::FromStr;

use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::auth::Actor;
use crate::domain::{ItemId, PermissionLevel, PermissionSignature, UserId, UserRole};
use crate::error::{Error, Issue, Result};
use crate::lookup;
use crate::page::{PageRequest, PageWindow, ResultPage};
use crate::service::Uuis;
use crate::store::Tx;

pub const DESCRIPTION_MAX: usize = 500;
pub const REASON_MAX: usize = 500;

/// Request types that must name an item.
pub const IDENTIFIED_TYPES: [i64; 4] = [2, 3, 4, 6];

pub const TYPE_GENERAL: i64 = 1;
pub const TYPE_PROBLEM: i64 = 2;
pub const TYPE_RETURN: i64 = 3;
pub const TYPE_MOVING: i64 = 4;
pub const TYPE_REQUEST_FOR: i64 = 5;
pub const TYPE_DISCARD: i64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestStatus {
    Pending,
    Approved,
    Rejected,
    Cancelled,
}

impl RequestStatus {
    pub const ALL: [RequestStatus; 4] = [Self::Pending, Self::Approved, Self::Rejected, Self::Cancelled];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pending => "pending",
            Self::Approved => "approved",
            Self::Rejected => "rejected",
            Self::Cancelled => "cancelled",
        }
    }

    /// Whether `self -> next` is a legal transition.
    pub fn may_become(self, next: RequestStatus) -> bool {
        self == Self::Pending && next != Self::Pending
    }
}

impl fmt::Display for RequestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RequestStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown request status `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RequestType {
    pub req_type_id: i64,
    pub code: String,
    pub description: String,
    pub requires_identifier: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RequestComment {
    pub comment_id: i64,
    pub author_id: UserId,
    pub created_at: String,
    /// `rejection` or `rejection-attempt`.
    pub kind: String,
    pub comment: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Request {
    pub req_id: i64,
    pub requester: UserId,
    pub request_type: i64,
    pub submitted_by: UserId,
    pub item_id: Option<ItemId>,
    pub description: String,
    pub date_submitted: String,
    pub approved_by: Option<UserId>,
    pub date_approved: Option<String>,
    pub status: RequestStatus,
    pub date_modified: String,
    pub comments: Vec<RequestComment>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewRequest {
    pub request_type: i64,
    /// Serial number or code of the item concerned.
    pub identifier: Option<String>,
    pub description: String,
    /// Files the request for another user the caller administers.
    pub on_behalf_of: Option<UserId>,
}

/// Details supplied when approving. Which fields matter depends on the type:
/// moving uses `loc_id`, return uses `owner_id`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fulfillment {
    pub loc_id: Option<i64>,
    pub owner_id: Option<UserId>,
    pub comment: Option<String>,
}

const REQUEST_SELECT: &str = "SELECT req_id, requester, request_type, submitted_by, item_id, description, date_submitted,
    approved_by, date_approved, status, date_modified FROM requests";

fn request_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<(Request, String)> {
    let status: Option<String> = r.get(9)?;
    Ok((
        Request {
            req_id: r.get(0)?,
            requester: r.get::<_, Option<i64>>(1)?.unwrap_or(0),
            request_type: r.get::<_, Option<i64>>(2)?.unwrap_or(0),
            submitted_by: r.get::<_, Option<i64>>(3)?.unwrap_or(0),
            item_id: r.get(4)?,
            description: r.get::<_, Option<String>>(5)?.unwrap_or_default(),
            date_submitted: r.get::<_, Option<String>>(6)?.unwrap_or_default(),
            approved_by: r.get(7)?,
            date_approved: r.get(8)?,
            status: RequestStatus::Pending,
            date_modified: r.get::<_, Option<String>>(10)?.unwrap_or_default(),
            comments: Vec::new(),
        },
        status.unwrap_or_default(),
    ))
}

fn finish(c: &Connection, (mut req, status): (Request, String)) -> Result<Request> {
    req.status = status
        .parse()
        .map_err(|_| Error::Storage(format!("request {} has unknown status `{status}`", req.req_id)))?;
    let mut stmt = c.prepare(
        "SELECT comment_id, author_id, created_at, kind, comment FROM ext_request_comments WHERE req_id = ?1 ORDER BY comment_id",
    )?;
    req.comments = stmt
        .query_map([req.req_id], |r| {
            Ok(RequestComment {
                comment_id: r.get(0)?,
                author_id: r.get(1)?,
                created_at: r.get(2)?,
                kind: r.get(3)?,
                comment: r.get(4)?,
            })
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(req)
}

pub(crate) fn load_request(c: &Connection, req_id: i64) -> Result<Request> {
    let raw = c
        .query_row(&format!("{REQUEST_SELECT} WHERE req_id = ?1"), [req_id], request_from_row)
        .optional()?
        .ok_or_else(|| Error::not_found(format!("request {req_id}")))?;
    finish(c, raw)
}

fn load_requests(c: &Connection, filter: &str, args: &[&dyn rusqlite::ToSql], limit: Option<(usize, usize)>) -> Result<Vec<Request>> {
    let mut sql = format!("{REQUEST_SELECT} WHERE {filter} ORDER BY req_id DESC");
    if let Some((offset, size)) = limit {
        sql.push_str(&format!(" LIMIT {size} OFFSET {offset}"));
    }
    let mut stmt = c.prepare(&sql)?;
    let raws = stmt.query_map(args, request_from_row)?.collect::<rusqlite::Result<Vec<_>>>()?;
    raws.into_iter().map(|raw| finish(c, raw)).collect()
}

fn load_types(c: &Connection) -> Result<Vec<RequestType>> {
    let mut stmt = c.prepare("SELECT req_type_id, req_type_code, description FROM requesttypes ORDER BY req_type_id")?;
    let rows = stmt
        .query_map([], |r| {
            let id: i64 = r.get(0)?;
            Ok(RequestType {
                req_type_id: id,
                code: r.get::<_, Option<String>>(1)?.unwrap_or_default(),
                description: r.get::<_, Option<String>>(2)?.unwrap_or_default(),
                requires_identifier: IDENTIFIED_TYPES.contains(&id),
            })
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(rows)
}

/// Finds the item an identifier names: serial number first, then code.
pub(crate) fn resolve_identifier(c: &Connection, identifier: &str) -> Result<Option<ItemId>> {
    let ident = identifier.trim();
    if ident.is_empty() {
        return Ok(None);
    }
    for column in ["serial_number", "code"] {
        let mut stmt = c.prepare(&format!(
            "SELECT item_id FROM items WHERE item_id <> 0 AND {column} = ?1 COLLATE NOCASE ORDER BY item_id LIMIT 2"
        ))?;
        let ids = stmt.query_map([ident], |r| r.get::<_, i64>(0))?.collect::<rusqlite::Result<Vec<_>>>()?;
        match ids.as_slice() {
            [] => continue,
            [one] => return Ok(Some(*one)),
            _ => {
                return Err(Error::IdentifierAmbiguous(format!("`{ident}` matches more than one item by {column}")));
            }
        }
    }
    Ok(None)
}

/// The role a requester is judged by. Users without a role rank as level 0
/// at the university root.
fn requester_role(c: &Connection, user: UserId) -> Result<UserRole> {
    Ok(lookup::primary_role(c, user)?.unwrap_or(UserRole {
        user_role_id: i64::MAX,
        user_id: user,
        title_id: None,
        affln_id: 0,
        status: None,
        effective_signature: PermissionSignature::EMPTY,
    }))
}

fn has_authority(c: &Connection, actor: &Actor, requester: UserId) -> Result<bool> {
    if actor.level() < PermissionLevel::L1 || requester == actor.user_id {
        return Ok(false);
    }
    let target = requester_role(c, requester)?;
    actor.hierarchy.may_administer(&actor.role, &target)
}

fn transition(tx: &Tx<'_>, req: &Request, next: RequestStatus, approver: Option<UserId>) -> Result<()> {
    if !req.status.may_become(next) {
        return Err(Error::InvalidState(format!("request {} is {}, not pending", req.req_id, req.status)));
    }
    let now = tx.now_str();
    let changed = tx.execute(
        "UPDATE requests SET status = ?1, approved_by = COALESCE(?2, approved_by), date_approved = CASE WHEN ?2 IS NULL THEN date_approved ELSE ?3 END,
         date_modified = ?3 WHERE req_id = ?4 AND status = 'pending'",
        params![next.as_str(), approver, now, req.req_id],
    )?;
    if changed != 1 {
        return Err(Error::InvalidState(format!("request {} is no longer pending", req.req_id)));
    }
    Ok(())
}

fn add_comment(tx: &Tx<'_>, req_id: i64, author: UserId, kind: &str, text: &str) -> Result<i64> {
    tx.execute(
        "INSERT INTO ext_request_comments (req_id, author_id, created_at, kind, comment) VALUES (?1, ?2, ?3, ?4, ?5)",
        params![req_id, author, tx.now_str(), kind, text],
    )?;
    Ok(tx.last_insert_rowid())
}

fn check_text(what: &str, text: &str, max: usize) -> Result<String> {
    let t = text.trim();
    if t.chars().count() > max {
        return Err(Error::invalid(format!("{what} exceeds {max} characters")));
    }
    Ok(t.to_string())
}

enum Rejection {
    Done(Request),
    Refused { req_id: i64, comment_id: i64 },
}

impl Uuis {
    pub fn request_types(&self, token: &str) -> Result<Vec<RequestType>> {
        self.actor(token)?;
        self.store().read(load_types)
    }

    pub fn submit_request(&self, token: &str, new: NewRequest) -> Result<Request> {
        let actor = self.actor(token)?;
        let description = check_text("description", &new.description, DESCRIPTION_MAX)?;
        self.store().write(|tx| {
            let types = load_types(tx)?;
            let Some(kind) = types.iter().find(|t| t.req_type_id == new.request_type) else {
                return Err(Error::InvalidType(new.request_type));
            };
            let requester = match new.on_behalf_of {
                None => actor.user_id,
                Some(u) if u == actor.user_id => u,
                Some(u) => {
                    if !lookup::exists(tx, "users", "user_id", u)? {
                        return Err(Error::InvalidReference(format!("user {u}")));
                    }
                    if !has_authority(tx, &actor, u)? {
                        return Err(Error::forbidden(format!("you may not file requests for user {u}")));
                    }
                    u
                }
            };
            let ident = new.identifier.as_deref().unwrap_or("").trim();
            let item = resolve_identifier(tx, ident)?;
            if kind.requires_identifier && item.is_none() {
                return Err(Error::IdentifierRequired);
            }
            if !ident.is_empty() && item.is_none() {
                return Err(Error::InvalidReference(format!("no item has serial number or code `{ident}`")));
            }
            let now = tx.now_str();
            tx.execute(
                "INSERT INTO requests (requester, request_type, submitted_by, item_id, description, date_submitted, status, date_modified)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, 'pending', ?6)",
                params![requester, kind.req_type_id, actor.user_id, item, description, now],
            )?;
            let id = tx.last_insert_rowid();
            tx.record_log(
                Some(actor.user_id),
                item,
                "request.submit",
                &format!("request {id} type {} for user {requester}: pending", kind.req_type_id),
            )?;
            load_request(tx, id)
        })
    }

    /// A request the caller filed, owns, or may decide.
    pub fn get_request(&self, token: &str, req_id: i64) -> Result<Request> {
        let actor = self.actor(token)?;
        self.store().read(|c| {
            let req = load_request(c, req_id)?;
            if req.requester == actor.user_id || req.submitted_by == actor.user_id || has_authority(c, &actor, req.requester)? {
                Ok(req)
            } else {
                Err(Error::forbidden(format!("request {req_id} is not yours to view")))
            }
        })
    }

    pub fn view_own_requests(&self, token: &str, page: PageRequest) -> Result<ResultPage<Request>> {
        let actor = self.actor(token)?;
        let default = self.config().search.page_size;
        self.store().read(|c| {
            let total: i64 = c.query_row("SELECT COUNT(*) FROM requests WHERE requester = ?1", [actor.user_id], |r| r.get(0))?;
            let window = PageWindow::new(total as usize, page, default)?;
            let rows = load_requests(c, "requester = ?1", &[&actor.user_id], Some((window.offset, window.size)))?;
            Ok(window.into_page(rows))
        })
    }

    pub fn cancel_request(&self, token: &str, req_id: i64) -> Result<Request> {
        let actor = self.actor(token)?;
        self.store().write(|tx| {
            let req = load_request(tx, req_id)?;
            if req.requester != actor.user_id {
                return Err(Error::forbidden(format!("only the requester may cancel request {req_id}")));
            }
            transition(tx, &req, RequestStatus::Cancelled, None)?;
            tx.record_log(Some(actor.user_id), req.item_id, "request.cancel", &format!("request {req_id}: pending -> cancelled"))?;
            load_request(tx, req_id)
        })
    }

    /// Pending requests from users the caller may administer.
    pub fn view_pending(&self, token: &str, page: PageRequest) -> Result<ResultPage<Request>> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "viewing pending requests")?;
        let default = self.config().search.page_size;
        self.store().read(|c| {
            let mut visible = Vec::new();
            for req in load_requests(c, "status = 'pending'", &[], None)? {
                if has_authority(c, &actor, req.requester)? {
                    visible.push(req);
                }
            }
            let window = PageWindow::new(visible.len(), page, default)?;
            Ok(window.slice(&visible))
        })
    }

    /// Approves (formalizes) a pending request and applies its effect on the
    /// item in the same transaction.
    pub fn approve_request(&self, token: &str, req_id: i64, fulfillment: &Fulfillment) -> Result<Request> {
        let actor = self.actor(token)?;
        actor.require(PermissionLevel::L1, "approving requests")?;
        let note = fulfillment.comment.as_deref().map(|c| check_text("comment", c, REASON_MAX)).transpose()?;
        self.store().write(|tx| {
            let req = load_request(tx, req_id)?;
            if req.status != RequestStatus::Pending {
                return Err(Error::InvalidState(format!("request {req_id} is {}, not pending", req.status)));
            }
            if !has_authority(tx, &actor, req.requester)? {
                return Err(Error::forbidden(format!("request {req_id} is outside your authority")));
            }

            let mut issues = Vec::new();
            if let Some(loc) = fulfillment.loc_id {
                if !lookup::exists(tx, "locations", "loc_id", loc)? {
                    issues.push(Issue::field("loc_id", format!("location {loc} does not exist")));
                }
            }
            if let Some(owner) = fulfillment.owner_id {
                if owner != 0 && !lookup::exists(tx, "users", "user_id", owner)? {
                    issues.push(Issue::field("owner_id", format!("user {owner} does not exist")));
                }
            }
            if req.request_type == TYPE_MOVING && fulfillment.loc_id.is_none() {
                issues.push(Issue::field("loc_id", "a moving request needs a destination location"));
            }
            if IDENTIFIED_TYPES.contains(&req.request_type) && req.item_id.is_none() {
                issues.push(Issue::general("the request names no item"));
            }
            if let Some(item) = req.item_id {
                if !lookup::exists(tx, "items", "item_id", item)? {
                    issues.push(Issue::general(format!("item {item} no longer exists")));
                }
            }
            if !issues.is_empty() {
                return Err(Error::ValidationFailed(issues));
            }

            let effect = match (req.request_type, req.item_id) {
                (TYPE_MOVING, Some(item)) => Some((item, "loc_id", fulfillment.loc_id.unwrap_or_default().into())),
                (TYPE_DISCARD, Some(item)) => Some((item, "status", "inactive".to_string().into())),
                (TYPE_RETURN, Some(item)) => Some((item, "owner_id", fulfillment.owner_id.unwrap_or(0).into())),
                (TYPE_REQUEST_FOR, Some(item)) => Some((item, "owner_id", req.requester.into())),
                _ => None,
            };
            if let Some((item, column, value)) = effect {
                let value: rusqlite::types::Value = value;
                actor.require_covers(lookup::item_affiliation(tx, item)?, &format!("item {item}"))?;
                tx.execute(
                    &format!("UPDATE items SET {column} = ?1, date_modified = ?2 WHERE item_id = ?3"),
                    params![value, tx.now_str(), item],
                )?;
                actor.require_covers(lookup::item_affiliation(tx, item)?, &format!("item {item} after the change"))?;
                tx.record_log(
                    Some(actor.user_id),
                    Some(item),
                    "asset.update",
                    &format!("{column} set by request {req_id}: {value:?}"),
                )?;
            }
            tx.fault_point("requests.approve")?;
            transition(tx, &req, RequestStatus::Approved, Some(actor.user_id))?;
            if let Some(note) = note.filter(|n| !n.is_empty()) {
                add_comment(tx, req_id, actor.user_id, "approval", &note)?;
            }
            tx.record_log(Some(actor.user_id), req.item_id, "request.approve", &format!("request {req_id}: pending -> approved"))?;
            load_request(tx, req_id)
        })
    }

    /// Rejects a pending request. Without authority the status stays pending,
    /// the attempt is kept as a comment, and the caller gets `Forbidden`
    /// naming that comment.
    pub fn reject_request(&self, token: &str, req_id: i64, reason: &str) -> Result<Request> {
        let actor = self.actor(token)?;
        let reason = check_text("reason", reason, REASON_MAX)?;
        if reason.is_empty() {
            return Err(Error::invalid("a rejection needs a reason"));
        }
        let outcome = self.store().write(|tx| {
            let req = load_request(tx, req_id)?;
            if req.status != RequestStatus::Pending {
                return Err(Error::InvalidState(format!("request {req_id} is {}, not pending", req.status)));
            }
            if has_authority(tx, &actor, req.requester)? {
                transition(tx, &req, RequestStatus::Rejected, None)?;
                add_comment(tx, req_id, actor.user_id, "rejection", &reason)?;
                tx.record_log(Some(actor.user_id), req.item_id, "request.reject", &format!("request {req_id}: pending -> rejected"))?;
                Ok(Rejection::Done(load_request(tx, req_id)?))
            } else {
                let comment_id = add_comment(tx, req_id, actor.user_id, "rejection-attempt", &reason)?;
                tx.record_log(
                    Some(actor.user_id),
                    req.item_id,
                    "request.reject_attempt",
                    &format!("request {req_id}: rejection without authority kept as comment {comment_id}"),
                )?;
                Ok(Rejection::Refused { req_id, comment_id })
            }
        })?;
        match outcome {
            Rejection::Done(req) => Ok(req),
            Rejection::Refused { req_id, comment_id } => Err(Error::forbidden(format!(
                "you may not reject request {req_id}; it stays pending and your rejection was recorded as comment {comment_id}"
            ))),
        }
    }
}
