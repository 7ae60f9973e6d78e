//! Comparison and listing reports, grouped as widely as the session's level
//! allows, rendered as CSV.

use uuis::render::ExportFormat;
use uuis::review::{Grouping, ReportKind, ReportSpec, ReviewSource};
use uuis::Uuis;

fn main() -> uuis::Result<()> {
    let u = Uuis::in_memory()?;
    let admin = u.login("admin", "teamtwo", None)?;
    let t = &admin.session_id;

    let options = u.view_audit_options(t)?;
    println!("groupings: {:?}", options.groupings);
    println!("metrics: {:?}", options.metrics.iter().map(|m| m.name.as_str()).collect::<Vec<_>>());

    let spec = ReportSpec {
        kind: ReportKind::FieldComparison,
        left: "items".into(),
        right: Some("seats".into()),
        grouping: Grouping::Faculty,
        affln_id: None,
    };
    let report = u.produce_report(t, &spec)?;
    println!("{}", report.title);
    for row in &report.rows {
        println!("  {row:?}");
    }

    let listing = ReportSpec { kind: ReportKind::EntityListing, left: "locations".into(), right: None, grouping: Grouping::University, affln_id: Some(1) };
    let doc = u.output_review(t, &ReviewSource::Report { spec: listing }, ExportFormat::Csv)?;
    println!("{} ({})\n{}", doc.filename, doc.content_type, doc.body);
    Ok(())
}
