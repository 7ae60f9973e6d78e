//! Basic and advanced searches. The same query returns fewer rows for a
//! department-level session than for the university administrator.

use uuis::page::PageRequest;
use uuis::search::{Operator, SearchParameter, SearchTarget};
use uuis::Uuis;

fn main() -> uuis::Result<()> {
    let u = Uuis::in_memory()?;
    let admin = u.login("admin", "teamtwo", None)?;
    let csv = "user_code,last_name,first_name,password,title_id,affln_id,email\ntech,Tran,Kim,password1,2,1,\n";
    u.bulk_import_users(&admin.session_id, csv.as_bytes())?;
    let tech = u.login("tech", "password1", None)?;

    for (who, token) in [("admin", &admin.session_id), ("tech", &tech.session_id)] {
        let out = u.search_basic(token, SearchTarget::Items, "dell", PageRequest::new(0, 5))?;
        println!("{who}: `dell` -> {} items; plan: {}", out.page.total_count, out.plan);
    }

    let params = vec![
        SearchParameter::new("item_description", Operator::Contains, "Dell"),
        SearchParameter::new("status", Operator::Eq, "active"),
        SearchParameter::new("cat_id", Operator::Eq, "1"),
    ];
    let out = u.search_advanced(&admin.session_id, SearchTarget::Items, params, Some("(1 OR 3) AND 2"), PageRequest::new(0, 10))?;
    for row in &out.page.rows {
        println!("  {} {} {}", row["item_id"], row["code"], row["item_description"]);
    }

    let long = "x".repeat(40);
    let q = u.capture_basic(&admin.session_id, &long)?;
    println!("40-char input kept as {} chars, truncated={}", q.text.len(), q.truncated);
    Ok(())
}
