//! CSV imports are all or nothing: one bad row refuses the whole file.

use uuis::Uuis;

const HEADER: &str = "description,code,serial_number,cat_id,owner_id,loc_id,status,properties\n";

fn main() -> uuis::Result<()> {
    let u = Uuis::in_memory()?;
    let admin = u.login("admin", "teamtwo", None)?;
    let t = &admin.session_id;
    let before = u.store().row_count("items")?;

    let bad = format!("{HEADER}Monitor,MON-1,m1,2,1,1,active,\nMonitor,MON-2,m2,2,1,999,active,\nMonitor,MON-3,m3,2,1,1,active,\n");
    match u.bulk_add_assets(t, bad.as_bytes()) {
        Err(e) => {
            println!("refused: {e}");
            for issue in e.issues() {
                println!("  line {:?}: {}", issue.line, issue.message);
            }
        }
        Ok(_) => unreachable!(),
    }
    assert_eq!(u.store().row_count("items")?, before);

    let good = format!("{HEADER}Monitor,MON-1,m1,2,1,1,active,\nMonitor,MON-3,m3,2,1,1,active,\nDesktop,PC-9,p9,1,1,2,active,Desktop=i5\n");
    let report = u.bulk_add_assets(t, good.as_bytes())?;
    println!("inserted {} items: {:?}", report.inserted, report.item_ids);
    Ok(())
}
