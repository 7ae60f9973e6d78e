//! A student files requests; staff above them approve or reject. Rejecting
//! without authority leaves the request pending but keeps the attempt.

use uuis::requests::{Fulfillment, NewRequest};
use uuis::Uuis;

fn main() -> uuis::Result<()> {
    let u = Uuis::in_memory()?;
    let admin = u.login("admin", "teamtwo", None)?;
    let csv = "user_code,last_name,first_name,password,title_id,affln_id,email\n\
               stu,Ray,Jo,password1,10,20,\n\
               tech,Tran,Kim,password1,2,20,\n\
               prof,Ng,Ada,password1,3,20,\n";
    u.bulk_import_users(&admin.session_id, csv.as_bytes())?;
    let [stu, tech, prof] = ["stu", "tech", "prof"].map(|c| u.login(c, "password1", None).unwrap().session_id);

    let mv = u.submit_request(
        &stu,
        NewRequest { request_type: 4, identifier: Some("a0002".into()), description: "desk moved to room 4".into(), on_behalf_of: None },
    )?;
    println!("request {} for item {:?} is {}", mv.req_id, mv.item_id, mv.status);
    let done = u.approve_request(&tech, mv.req_id, &Fulfillment { loc_id: Some(4), ..Default::default() })?;
    println!("approved by {:?}; item now at {:?}", done.approved_by, u.get_asset(&tech, 20)?.loc_id);

    let ask = u.submit_request(&prof, NewRequest { request_type: 1, description: "need a projector".into(), ..Default::default() })?;
    let refused = u.reject_request(&tech, ask.req_id, "no budget");
    println!("department tech rejecting a faculty request: {}", refused.unwrap_err().code());
    let kept = u.get_request(&admin.session_id, ask.req_id)?;
    println!("still {}; comment kind `{}`", kept.status, kept.comments[0].kind);
    let rejected = u.reject_request(&admin.session_id, ask.req_id, "no budget")?;
    println!("administrator: {}", rejected.status);
    Ok(())
}
