//! Three consecutive wrong passwords lock an account until an administrator
//! unlocks it.

use uuis::university::RoleChange;
use uuis::{Error, Uuis};

fn main() -> uuis::Result<()> {
    let u = Uuis::in_memory()?;
    let admin = u.login("admin", "teamtwo", None)?;
    let csv = "user_code,last_name,first_name,password,title_id,affln_id,email\nsam,Lee,Sam,password1,10,20,\n";
    let sam = u.bulk_import_users(&admin.session_id, csv.as_bytes())?.user_ids[0];

    for attempt in 1..=3 {
        match u.login("sam", "guess", None) {
            Err(e) => println!("attempt {attempt}: {}", e.code()),
            Ok(_) => unreachable!(),
        }
    }
    let after = u.login("sam", "password1", None);
    println!("right password while locked: {}", after.err().map(|e| e.code()).unwrap_or("ok"));
    assert!(matches!(u.login("sam", "password1", None), Err(Error::AccountLocked)));

    u.update_user_role(&admin.session_id, sam, RoleChange { unlock: true, ..Default::default() })?;
    let s = u.login("sam", "password1", None)?;
    println!("after unlock: session for user {}", s.user_id);
    Ok(())
}
