//! Internal failures are filed as error reports that administrators can
//! filter, annotate and print.

use uuis::assets::AssetPatch;
use uuis::error_reports::ErrorConstraints;
use uuis::page::PageRequest;
use uuis::Uuis;

fn main() -> uuis::Result<()> {
    let u = Uuis::in_memory()?;
    let admin = u.login("admin", "teamtwo", None)?;
    let t = &admin.session_id;

    // Make the second row of a batch update fail; the first row rolls back too.
    u.store().inject_fault("assets.update");
    let failed = u.update_assets(t, &[20, 21], &AssetPatch { status: Some("lent".into()), ..Default::default() });
    println!("batch update: {}", failed.unwrap_err().code());
    println!("item 20 status still {:?}", u.get_asset(t, 20)?.status);

    let page = u.list_errors(t, &ErrorConstraints::default(), PageRequest::new(0, 10))?;
    for e in &page.rows {
        println!("#{} {} {:?} {}", e.error_id, e.source, e.severity, e.message);
    }
    let id = page.rows[0].error_id;
    let noted = u.annotate_error(t, id, "fault injected on purpose")?;
    println!("annotations: {}", noted.annotations.len());
    let doc = u.print_errors(t, &[id])?;
    println!("{} is {} bytes of {}", doc.filename, doc.body.len(), doc.content_type);
    Ok(())
}
