//! Randomized data sets loaded through the API.

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::json;

use super::{add_location, Client, Server, PASSWORD, TITLE_L0, TITLE_L1, TITLE_L2};

pub const WORDS: &[&str] = &[
    "Dell", "dell", "HP", "Tower", "tower", "laptop", "Mouse", "lab", "x1", "X2", "alpha", "Beta", "desk", "Lenovo", "cable",
];
pub const STATUSES: &[&str] = &["active", "inactive", "stolen", "lent"];
pub const AFFILIATIONS: &[i64] = &[0, 1, 2, 3, 10, 11, 12, 13, 20, 21, 30, 31];
/// Titles members can be given. L3 cannot be granted by anyone (the seeded
/// administrator is the only L3 session).
pub const TITLES: &[(i64, u8)] = &[(TITLE_L0, 0), (TITLE_L1, 1), (TITLE_L2, 2)];

#[derive(Clone)]
pub struct Member {
    pub user_id: i64,
    pub code: String,
    pub level: u8,
    pub affln: i64,
    pub client: Option<Client>,
}

pub struct Corpus {
    pub admin: Client,
    pub members: Vec<Member>,
    pub locations: Vec<i64>,
    pub item_ids: Vec<i64>,
    pub serials: Vec<String>,
}

pub struct Size {
    pub users: usize,
    pub locations: usize,
    pub items: usize,
    pub requests: usize,
}

fn phrase(rng: &mut StdRng, words: usize) -> String {
    (0..words).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Users, locations, assets and requests with random attributes. Every
/// member at L1 and above gets a live session; L0 members too when they
/// submitted requests.
pub async fn build(server: &Server, rng: &mut StdRng, tag: &str, size: Size) -> Corpus {
    let admin = server.admin().await;

    let mut csv = String::from("user_code,last_name,first_name,password,title_id,affln_id,email\n");
    let mut planned = Vec::new();
    for n in 0..size.users {
        // The first few cover every grantable level; the rest are random.
        let (title, level) = TITLES.get(n).copied().unwrap_or_else(|| *TITLES.choose(rng).unwrap());
        let affln = *AFFILIATIONS.choose(rng).unwrap();
        let code = format!("{tag}u{n}");
        let last = phrase(rng, 1);
        csv.push_str(&format!("{code},{last},{},{PASSWORD},{title},{affln},\n", phrase(rng, 1)));
        planned.push((code, level, affln));
    }
    let report = admin.upload("/api/admin/users/import", csv).await.ok();
    let ids: Vec<i64> = report["user_ids"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();

    let mut locations: Vec<i64> = (1..=7).collect();
    for n in 0..size.locations {
        let affln = *AFFILIATIONS.choose(rng).unwrap();
        locations.push(add_location(&admin, &format!("{tag}L{n}"), affln).await);
    }

    let owners: Vec<i64> = ids.iter().copied().chain([1]).collect();
    let mut assets = String::from("description,code,serial_number,cat_id,owner_id,loc_id,status,properties\n");
    let mut serials = Vec::new();
    for n in 0..size.items {
        let cat = rng.random_range(1..=3);
        let props = match cat {
            1 if rng.random_bool(0.6) => format!("Desktop={}", phrase(rng, 1)),
            3 if rng.random_bool(0.6) => format!("Desktop Laser={}", phrase(rng, 1)),
            _ => String::new(),
        };
        let serial = format!("{tag}S{n:04}{}", WORDS.choose(rng).unwrap());
        let loc = *locations.choose(rng).unwrap();
        assets.push_str(&format!(
            "{},{tag}C{n:04},{serial},{cat},{},{loc},{},{props}\n",
            phrase(rng, 2),
            owners.choose(rng).unwrap(),
            STATUSES.choose(rng).unwrap(),
        ));
        serials.push(serial);
    }
    let item_ids = if size.items > 0 {
        let r = admin.upload("/api/assets/import", assets).await.ok();
        r["item_ids"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect()
    } else {
        Vec::new()
    };

    let mut members: Vec<Member> = planned
        .into_iter()
        .zip(&ids)
        .map(|((code, level, affln), &user_id)| Member { user_id, code, level, affln, client: None })
        .collect();
    for m in members.iter_mut() {
        m.client = Some(admin.login(&m.code, PASSWORD).await.expect("corpus user logs in"));
    }

    for _ in 0..size.requests {
        let m = members.choose(rng).unwrap();
        let c = m.client.as_ref().unwrap();
        let body = if rng.random_bool(0.5) && !serials.is_empty() {
            json!({ "request_type": 2, "identifier": serials.choose(rng).unwrap(), "description": phrase(rng, 3) })
        } else {
            json!({ "request_type": 1, "description": phrase(rng, 3) })
        };
        c.post("/api/requests", body).await.ok();
    }

    Corpus { admin, members, locations, item_ids, serials }
}
