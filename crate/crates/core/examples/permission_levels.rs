//! How permission signatures map to levels, and how level plus affiliation
//! decides how far a role reaches.

use uuis::domain::{level_of, PermissionSignature};
use uuis::page::PageRequest;
use uuis::Uuis;

fn main() -> uuis::Result<()> {
    for bits in [0, 1, 8, 24, 64, 512, 2048, 512 | 8] {
        println!("signature {bits:>5} -> {:?}", level_of(bits)?);
    }
    let sig = PermissionSignature::new(512 | 8)?;
    println!("512|8 grants bit 8: {}", sig.grants(PermissionSignature::new(8)?)?);

    let u = Uuis::in_memory()?;
    let admin = u.login("admin", "teamtwo", None)?;
    let csv = "user_code,last_name,first_name,password,title_id,affln_id,email\n\
               tech,Tran,Kim,password1,2,20,\n\
               dean,Ng,Ada,password1,3,2,\n";
    u.bulk_import_users(&admin.session_id, csv.as_bytes())?;

    for code in ["admin", "dean", "tech"] {
        let s = u.login(code, if code == "admin" { "teamtwo" } else { "password1" }, None)?;
        let actor = u.actor(&s.session_id)?;
        let assets = u.list_assets(&s.session_id, PageRequest::new(0, 1))?;
        println!(
            "{code:<6} level {:?}, scope {:?}, sees {} assets",
            actor.level(),
            actor.scope,
            assets.total_count
        );
    }
    Ok(())
}
