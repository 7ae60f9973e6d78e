//! Adding, updating and grouping assets; every change lands in the audit log.

use std::collections::BTreeMap;

use uuis::assets::{AssetPatch, NewAsset};
use uuis::page::PageRequest;
use uuis::review::AuditFilter;
use uuis::Uuis;

fn main() -> uuis::Result<()> {
    let u = Uuis::in_memory()?;
    let admin = u.login("admin", "teamtwo", None)?;
    let t = &admin.session_id;

    let a = u.add_asset(
        t,
        NewAsset {
            description: "Lab workstation".into(),
            code: "LAB-001".into(),
            serial_number: "SN-9001".into(),
            cat_id: 1,
            owner_id: 1,
            loc_id: 2,
            status: None,
            properties: BTreeMap::from([("Desktop".to_string(), "i7".to_string())]),
        },
    )?;
    println!("added item {} at location {:?}", a.item_id, a.loc_id);

    let moved = u.update_assets(t, &[a.item_id, 20], &AssetPatch { status: Some("lent".into()), ..Default::default() })?;
    println!("{} items now lent", moved.len());
    let group = u.group_assets(t, &[a.item_id, 20])?;
    println!("grouped as {group:?}");

    let filter = AuditFilter { event_prefix: Some("asset".into()), ..Default::default() };
    for entry in u.audit_logs(t, &filter, PageRequest::new(0, 20))?.rows {
        println!("  {} {:<14} {}", entry.log_time, entry.event_type, entry.content);
    }
    Ok(())
}
