//! Serves the JSON API on a loopback port and walks through a login, a
//! search and a logout with plain HTTP.

use serde_json::{json, Value};
use tokio::net::TcpListener;
use uuis::Uuis;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(uuis::gateway::serve(Uuis::in_memory()?, listener, async {
        let _ = stopped.await;
    }));

    let http = reqwest::Client::new();
    let login: Value = http
        .post(format!("{base}/api/login"))
        .json(&json!({ "user_code": "admin", "password": "teamtwo" }))
        .send()
        .await?
        .json()
        .await?;
    let token = login["data"]["session_id"].as_str().unwrap().to_string();
    println!("logged in, level {}", login["data"]["level"]);

    let found: Value = http
        .post(format!("{base}/api/search/basic?size=3"))
        .bearer_auth(&token)
        .json(&json!({ "target": "items", "text": "dell" }))
        .send()
        .await?
        .json()
        .await?;
    println!("{}", serde_json::to_string_pretty(&found["pagination"])?);
    for row in found["data"]["rows"].as_array().unwrap() {
        println!("  {} {}", row["code"], row["item_description"]);
    }

    let anon = http.get(format!("{base}/api/profile")).send().await?;
    println!("without a session: {} {}", anon.status(), anon.text().await?);

    http.post(format!("{base}/api/logout")).bearer_auth(&token).send().await?;
    let _ = stop.send(());
    server.await??;
    Ok(())
}
