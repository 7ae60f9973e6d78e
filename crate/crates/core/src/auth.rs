//! Login, logout, lockout, password change and the personal profile.

use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use parking_lot::RwLock;
use rand::RngCore;
use rusqlite::{params, OptionalExtension};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::domain::{AffiliationScope, AfflnId, Hierarchy, PermissionLevel, UserId, UserRole};
use crate::error::{Error, Result};
use crate::lookup;
use crate::password;
use crate::service::Uuis;

/// Consecutive failures that lock an account.
pub const LOCKOUT_THRESHOLD: i64 = 3;
pub const SESSION_IDLE: Duration = Duration::minutes(24);
pub const SESSION_MAX: Duration = Duration::hours(12);

#[derive(Clone, Debug, Serialize)]
pub struct Session {
    pub session_id: String,
    pub user_id: UserId,
    pub acting_role: UserRole,
    pub created_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug)]
struct SessionState {
    user_id: UserId,
    role_id: i64,
    created_at: DateTime<Utc>,
    last_seen: DateTime<Utc>,
}

impl SessionState {
    fn expires_at(&self) -> DateTime<Utc> {
        (self.last_seen + SESSION_IDLE).min(self.created_at + SESSION_MAX)
    }
}

#[derive(Debug, Default)]
pub(crate) struct SessionRegistry {
    live: RwLock<HashMap<String, SessionState>>,
}

impl SessionRegistry {
    fn open(&self, user_id: UserId, role_id: i64, now: DateTime<Utc>) -> (String, DateTime<Utc>) {
        let mut bytes = [0u8; 32];
        rand::rng().fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        let state = SessionState {
            user_id,
            role_id,
            created_at: now,
            last_seen: now,
        };
        let expires = state.expires_at();
        self.live.write().insert(token.clone(), state);
        (token, expires)
    }

    /// Returns `(user, role)` for a live session and refreshes its idle timer.
    fn touch(&self, token: &str, now: DateTime<Utc>) -> Result<(UserId, i64)> {
        let mut live = self.live.write();
        let state = live.get_mut(token).ok_or(Error::Unauthenticated)?;
        if now >= state.expires_at() {
            live.remove(token);
            return Err(Error::Unauthenticated);
        }
        state.last_seen = now;
        Ok((state.user_id, state.role_id))
    }

    fn close(&self, token: &str) -> Option<SessionState> {
        self.live.write().remove(token)
    }

    pub(crate) fn live_count(&self) -> usize {
        self.live.read().len()
    }
}

/// The authenticated caller of an operation, resolved fresh on every call so
/// role changes take effect immediately.
#[derive(Clone, Debug)]
pub struct Actor {
    pub session_id: String,
    pub user_id: UserId,
    pub role: UserRole,
    pub scope: AffiliationScope,
    pub hierarchy: Hierarchy,
}

impl Actor {
    pub fn level(&self) -> PermissionLevel {
        self.role.level()
    }

    pub fn require(&self, min: PermissionLevel, what: &str) -> Result<()> {
        if self.level() < min {
            return Err(Error::forbidden(format!("{what} requires level {min} or higher")));
        }
        Ok(())
    }

    pub fn covers(&self, affln: AfflnId) -> Result<bool> {
        self.hierarchy.within_scope(self.scope, affln)
    }

    pub fn require_covers(&self, affln: AfflnId, what: &str) -> Result<()> {
        if !self.covers(affln)? {
            return Err(Error::forbidden(format!("{what} is outside your affiliation scope")));
        }
        Ok(())
    }

    /// Affiliation ids inside the actor's scope, ascending.
    pub fn scope_members(&self) -> Vec<AfflnId> {
        self.hierarchy.members(self.scope)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: UserId,
    pub user_code: String,
    pub last_name: Option<String>,
    pub first_name: Option<String>,
    pub email: Option<String>,
    pub dob: Option<String>,
    pub home_phone: Option<String>,
    pub cell_phone: Option<String>,
    pub street_address: Option<String>,
    pub level: PermissionLevel,
    pub affln_id: AfflnId,
}

/// userinfo columns a user may edit about themselves.
pub const PROFILE_FIELDS: [&str; 5] = ["email", "dob", "home_phone", "cell_phone", "street_address"];

enum LoginOutcome {
    Ok { user_id: UserId, role: UserRole },
    WrongPassword { locked_now: bool },
}

impl Uuis {
    /// Authenticates and opens a session bound to the user's highest-level
    /// role, or to `role_id` when the user holds it.
    pub fn login(&self, user_code: &str, password: &str, role_id: Option<i64>) -> Result<Session> {
        let store = &self.shared.store;
        let outcome = store.write(|tx| {
            let row: Option<(UserId, Option<String>, Option<i64>)> = tx
                .query_row(
                    "SELECT user_id, password, login_attempts FROM users WHERE user_code = ?1",
                    [user_code],
                    |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
                )
                .optional()?;
            let Some((user_id, stored, attempts)) = row else {
                return Err(Error::InvalidCredentials);
            };
            let attempts = attempts.unwrap_or(0);
            if attempts >= LOCKOUT_THRESHOLD {
                return Err(Error::AccountLocked);
            }
            if !stored.as_deref().is_some_and(|s| password::verify(password, s)) {
                let attempts = attempts + 1;
                tx.execute("UPDATE users SET login_attempts = ?1 WHERE user_id = ?2", params![attempts, user_id])?;
                tx.record_log(Some(user_id), None, "auth.login_failed", &format!("consecutive failures: {attempts}"))?;
                let locked_now = attempts >= LOCKOUT_THRESHOLD;
                if locked_now {
                    tx.record_log(Some(user_id), None, "auth.locked", "account locked after consecutive failures")?;
                }
                return Ok(LoginOutcome::WrongPassword { locked_now });
            }
            let mut roles = lookup::roles_of(tx, user_id)?;
            roles.sort_by_key(UserRole::precedence_key);
            let role = match role_id {
                Some(id) => roles.into_iter().find(|r| r.user_role_id == id),
                None => roles.into_iter().next(),
            }
            .ok_or_else(|| Error::forbidden("no usable role for this user"))?;
            if attempts != 0 {
                tx.execute("UPDATE users SET login_attempts = 0 WHERE user_id = ?1", [user_id])?;
            }
            tx.record_log(
                Some(user_id),
                None,
                "auth.login",
                &format!("role {} level {}", role.user_role_id, role.level()),
            )?;
            Ok(LoginOutcome::Ok { user_id, role })
        })?;
        match outcome {
            LoginOutcome::WrongPassword { locked_now: true } => Err(Error::AccountLocked),
            LoginOutcome::WrongPassword { locked_now: false } => Err(Error::InvalidCredentials),
            LoginOutcome::Ok { user_id, role } => {
                let now = store.now();
                let (session_id, expires_at) = self.shared.sessions.open(user_id, role.user_role_id, now);
                Ok(Session {
                    session_id,
                    user_id,
                    acting_role: role,
                    created_at: now,
                    expires_at,
                })
            }
        }
    }

    pub fn logout(&self, token: &str) -> Result<()> {
        let now = self.shared.store.now();
        self.shared.sessions.touch(token, now)?;
        let state = self.shared.sessions.close(token).ok_or(Error::Unauthenticated)?;
        self.shared
            .store
            .write(|tx| tx.record_log(Some(state.user_id), None, "auth.logout", "session closed"))?;
        Ok(())
    }

    /// Resolves the caller of an operation.
    pub fn actor(&self, token: &str) -> Result<Actor> {
        let now = self.shared.store.now();
        let (user_id, role_id) = self.shared.sessions.touch(token, now)?;
        self.shared.store.read(|c| {
            let role = lookup::role_by_id(c, role_id)?
                .filter(|r| r.user_id == user_id)
                .ok_or(Error::Unauthenticated)?;
            let hierarchy = lookup::load_hierarchy(c)?;
            let scope = hierarchy.scope_of(role.level(), role.affln_id)?;
            Ok(Actor {
                session_id: token.to_string(),
                user_id,
                role,
                scope,
                hierarchy,
            })
        })
    }

    pub fn live_sessions(&self) -> usize {
        self.shared.sessions.live_count()
    }

    pub fn change_password(&self, token: &str, current: &str, new: &str, confirm: &str) -> Result<()> {
        let actor = self.actor(token)?;
        self.shared.store.write(|tx| {
            let stored: Option<String> =
                tx.query_row("SELECT password FROM users WHERE user_id = ?1", [actor.user_id], |r| r.get(0))?;
            if !stored.as_deref().is_some_and(|s| password::verify(current, s)) {
                return Err(Error::NotAuthorized("current password is incorrect".into()));
            }
            if new != confirm {
                return Err(Error::Mismatch);
            }
            if let Some(why) = password::policy_violation(new) {
                return Err(Error::WeakPassword(why));
            }
            tx.execute(
                "UPDATE users SET password = ?1, date_modified = ?2 WHERE user_id = ?3",
                params![password::hash(new), tx.now_str(), actor.user_id],
            )?;
            tx.record_log(Some(actor.user_id), None, "password.change", "password changed")?;
            Ok(())
        })
    }

    pub fn view_personal_info(&self, token: &str) -> Result<UserProfile> {
        let actor = self.actor(token)?;
        self.shared.store.read(|c| load_profile(c, &actor))
    }

    /// Applies a partial edit of the caller's own userinfo. Keys outside
    /// [`PROFILE_FIELDS`] are refused.
    pub fn update_personal_info(&self, token: &str, patch: &Map<String, Value>) -> Result<UserProfile> {
        let actor = self.actor(token)?;
        let mut changes: Vec<(&str, Option<String>)> = Vec::new();
        for (key, value) in patch {
            let Some(&field) = PROFILE_FIELDS.iter().find(|f| *f == key) else {
                return Err(Error::ForbiddenField(key.clone()));
            };
            let value = match value {
                Value::Null => None,
                Value::String(s) if s.is_empty() => None,
                Value::String(s) => Some(s.clone()),
                _ => return Err(Error::invalid(format!("{key} must be a string or null"))),
            };
            if let (Some(v), "dob") = (&value, field) {
                chrono::NaiveDate::parse_from_str(v, "%Y-%m-%d")
                    .map_err(|_| Error::invalid("dob must be YYYY-MM-DD"))?;
            }
            if let (Some(v), "email") = (&value, field) {
                if !v.contains('@') {
                    return Err(Error::invalid("email must contain @"));
                }
            }
            changes.push((field, value));
        }
        if changes.is_empty() {
            return self.shared.store.read(|c| load_profile(c, &actor));
        }
        self.shared.store.write(|tx| {
            tx.execute("INSERT OR IGNORE INTO userinfo (user_id) VALUES (?1)", [actor.user_id])?;
            for (field, value) in &changes {
                tx.execute(
                    &format!("UPDATE userinfo SET {field} = ?1 WHERE user_id = ?2"),
                    params![value, actor.user_id],
                )?;
            }
            let fields: Vec<&str> = changes.iter().map(|(f, _)| *f).collect();
            tx.record_log(Some(actor.user_id), None, "profile.update", &fields.join(","))?;
            load_profile(tx, &actor)
        })
    }
}

fn load_profile(c: &rusqlite::Connection, actor: &Actor) -> Result<UserProfile> {
    c.query_row(
        "SELECT u.user_id, u.user_code, u.last_name, u.first_name,
                i.email, i.dob, i.home_phone, i.cell_phone, i.street_address
         FROM users u LEFT JOIN userinfo i ON i.user_id = u.user_id WHERE u.user_id = ?1",
        [actor.user_id],
        |r| {
            Ok(UserProfile {
                user_id: r.get(0)?,
                user_code: r.get::<_, Option<String>>(1)?.unwrap_or_default(),
                last_name: r.get(2)?,
                first_name: r.get(3)?,
                email: r.get(4)?,
                dob: r.get(5)?,
                home_phone: r.get(6)?,
                cell_phone: r.get(7)?,
                street_address: r.get(8)?,
                level: actor.level(),
                affln_id: actor.role.affln_id,
            })
        },
    )
    .optional()?
    .ok_or_else(|| Error::not_found("user"))
}
