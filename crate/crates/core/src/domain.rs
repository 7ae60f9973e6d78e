//! Permission signatures, permission levels and the affiliation hierarchy.
//!
//! Everything in here is a pure function over immutable values. Other modules
//! load a [`Hierarchy`] from the store and ask it scope questions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type AfflnId = i64;
pub type UserId = i64;
pub type ItemId = i64;

/// Affiliation id of the university root.
pub const UNIVERSITY: AfflnId = 0;

/// 16-bit capability mask. Bits 12..15 are reserved and never issued.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PermissionSignature(u16);

impl PermissionSignature {
    pub const EMPTY: Self = Self(0);
    /// System-administrator capability (carried by the seeded "IT Group" title).
    pub const SYSADMIN: Self = Self(2048);
    pub const RESERVED_MASK: u16 = 0xF000;

    /// Validates a raw stored value (a widened integer column).
    pub fn new(raw: u64) -> Result<Self> {
        if raw > u64::from(u16::MAX) || raw as u16 & Self::RESERVED_MASK != 0 {
            return Err(Error::InvalidSignature(raw));
        }
        Ok(Self(raw as u16))
    }

    pub fn from_stored(raw: i64) -> Result<Self> {
        u64::try_from(raw)
            .map_err(|_| Error::InvalidSignature(raw as u64))
            .and_then(Self::new)
    }

    pub const fn bits(self) -> u16 {
        self.0
    }

    pub fn level(self) -> PermissionLevel {
        PermissionLevel::ALL
            .into_iter()
            .rev()
            .find(|l| self.0 & l.group_mask() != 0)
            .unwrap_or(PermissionLevel::L0)
    }

    /// Whether `bit` (a single capability) is granted by this signature.
    pub fn grants(self, bit: PermissionSignature) -> Result<bool> {
        if bit.0.count_ones() != 1 {
            return Err(Error::invalid(format!(
                "capability {} must have exactly one bit set",
                bit.0
            )));
        }
        Ok(self.0 & bit.0 != 0)
    }

    pub fn union(self, other: PermissionSignature) -> PermissionSignature {
        Self(self.0 | other.0)
    }
}

impl fmt::Debug for PermissionSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PermissionSignature({:#06x})", self.0)
    }
}

impl TryFrom<u64> for PermissionSignature {
    type Error = Error;
    fn try_from(raw: u64) -> Result<Self> {
        Self::new(raw)
    }
}

impl From<PermissionSignature> for u64 {
    fn from(s: PermissionSignature) -> u64 {
        u64::from(s.0)
    }
}

/// Derives the level of a raw signature, rejecting reserved bits.
pub fn level_of(raw: u64) -> Result<PermissionLevel> {
    PermissionSignature::new(raw).map(PermissionSignature::level)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PermissionLevel {
    L0,
    L1,
    L2,
    L3,
}

impl PermissionLevel {
    pub const ALL: [PermissionLevel; 4] = [Self::L0, Self::L1, Self::L2, Self::L3];

    /// The three signature bits reserved for this level.
    pub const fn group_mask(self) -> u16 {
        match self {
            Self::L0 => 0b000_000_000_111,
            Self::L1 => 0b000_000_111_000,
            Self::L2 => 0b000_111_000_000,
            Self::L3 => 0b111_000_000_000,
        }
    }

    pub const fn rank(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for PermissionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.rank())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffiliationKind {
    University,
    Faculty,
    Department,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affiliation {
    pub affln_id: AfflnId,
    pub name: String,
    pub code: String,
    pub kind: AffiliationKind,
    pub parent: Option<AfflnId>,
}

/// The set of affiliations a session may read or mutate.
///
/// `Department(id)` holds exactly one node. Low-level roles attached at the
/// university root get `Department(UNIVERSITY)`, which holds only the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum AffiliationScope {
    Department(AfflnId),
    Faculty(AfflnId),
    University,
}

/// A resolved user role with its effective signature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRole {
    pub user_role_id: i64,
    pub user_id: UserId,
    pub title_id: Option<i64>,
    pub affln_id: AfflnId,
    pub status: Option<String>,
    pub effective_signature: PermissionSignature,
}

impl UserRole {
    /// An `acls` override wins over the title's default permission.
    pub fn effective(acl: Option<i64>, title_permission: Option<i64>) -> Result<PermissionSignature> {
        match acl.or(title_permission) {
            Some(raw) => PermissionSignature::from_stored(raw),
            None => Ok(PermissionSignature::EMPTY),
        }
    }

    pub fn level(&self) -> PermissionLevel {
        self.effective_signature.level()
    }

    /// Orders roles for "highest-level role" selection: level first, then the
    /// earliest-assigned role.
    pub fn precedence_key(&self) -> (std::cmp::Reverse<PermissionLevel>, i64) {
        (std::cmp::Reverse(self.level()), self.user_role_id)
    }
}

/// The university → faculty → department tree.
#[derive(Clone, Debug, Default)]
pub struct Hierarchy {
    nodes: BTreeMap<AfflnId, Affiliation>,
}

impl Hierarchy {
    /// Builds the tree from `(id, name, code, parent)` rows, checking the
    /// shape invariants.
    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (AfflnId, String, String, Option<AfflnId>)>,
    {
        let raw: BTreeMap<_, _> = rows
            .into_iter()
            .map(|(id, name, code, parent)| (id, (name, code, parent)))
            .collect();
        let mut nodes = BTreeMap::new();
        for (&id, (name, code, parent)) in &raw {
            let kind = match parent {
                None if id == UNIVERSITY => AffiliationKind::University,
                None => {
                    return Err(Error::invalid(format!("affiliation {id} has no parent")));
                }
                Some(UNIVERSITY) => AffiliationKind::Faculty,
                Some(p) => match raw.get(p) {
                    Some((_, _, Some(UNIVERSITY))) => AffiliationKind::Department,
                    _ => {
                        return Err(Error::invalid(format!(
                            "affiliation {id} has parent {p}, which is not a faculty"
                        )));
                    }
                },
            };
            nodes.insert(
                id,
                Affiliation {
                    affln_id: id,
                    name: name.clone(),
                    code: code.clone(),
                    kind,
                    parent: *parent,
                },
            );
        }
        Ok(Self { nodes })
    }

    pub fn get(&self, id: AfflnId) -> Result<&Affiliation> {
        self.nodes
            .get(&id)
            .ok_or_else(|| Error::not_found(format!("affiliation {id}")))
    }

    pub fn contains(&self, id: AfflnId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Affiliation> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parent_faculty(&self, dept: AfflnId) -> Result<AfflnId> {
        let node = self.get(dept)?;
        match (node.kind, node.parent) {
            (AffiliationKind::Department, Some(p)) => Ok(p),
            _ => Err(Error::invalid(format!("affiliation {dept} is not a department"))),
        }
    }

    pub fn scope_of(&self, level: PermissionLevel, affln: AfflnId) -> Result<AffiliationScope> {
        let node = self.get(affln)?;
        let scope = match (level, node.kind) {
            (PermissionLevel::L3, _) => AffiliationScope::University,
            (_, AffiliationKind::University) => AffiliationScope::Department(UNIVERSITY),
            (PermissionLevel::L2, AffiliationKind::Department) => {
                AffiliationScope::Faculty(self.parent_faculty(affln)?)
            }
            (_, AffiliationKind::Faculty) => AffiliationScope::Faculty(affln),
            (_, AffiliationKind::Department) => AffiliationScope::Department(affln),
        };
        Ok(scope)
    }

    pub fn within_scope(&self, scope: AffiliationScope, target: AfflnId) -> Result<bool> {
        let node = self.get(target)?;
        Ok(match scope {
            AffiliationScope::University => true,
            AffiliationScope::Faculty(f) => {
                self.get(f)?;
                target == f || node.parent == Some(f)
            }
            AffiliationScope::Department(d) => {
                self.get(d)?;
                target == d
            }
        })
    }

    /// All affiliation ids inside `scope`, ascending.
    pub fn members(&self, scope: AffiliationScope) -> Vec<AfflnId> {
        self.nodes
            .keys()
            .copied()
            .filter(|&id| self.within_scope(scope, id).unwrap_or(false))
            .collect()
    }

    pub fn may_administer(&self, actor: &UserRole, target: &UserRole) -> Result<bool> {
        if actor.level() <= target.level() {
            return Ok(false);
        }
        let scope = self.scope_of(actor.level(), actor.affln_id)?;
        self.within_scope(scope, target.affln_id)
    }
}
