//! Manual backups need a confirmation round trip. An archive restores into a
//! fresh store row for row.

use std::sync::Arc;

use uuis::store::Store;
use uuis::{Config, Error, SystemClock, Uuis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut config = Config::default();
    config.backup.dir = Some(dir.path().to_path_buf());
    let u = Uuis::open(config, Arc::new(SystemClock))?;
    let admin = u.login("admin", "teamtwo", None)?;

    let ticket = match u.trigger_backup(&admin.session_id, None) {
        Err(Error::ConfirmationRequired { token }) => token,
        other => panic!("expected a confirmation request, got {other:?}"),
    };
    let record = u.trigger_backup(&admin.session_id, Some(&ticket))?;
    println!("archive {} ({} bytes) {}", record.archive_id, record.bytes, record.checksum);

    let archive = uuis::store::backup::BackupArchive::read_from(record.path.as_deref().unwrap())?;
    archive.verify()?;
    let fresh = Store::open_in_memory(Arc::new(SystemClock))?;
    fresh.restore(&archive, false)?;
    for table in ["items", "users", "locations", "affiliations"] {
        println!("{table:<6} source {:>3} restored {:>3}", u.store().row_count(table)?, fresh.row_count(table)?);
    }
    Ok(())
}
