//! Token lifetime under a manual clock, and revocation on logout.

use chrono::Duration;
use sonotate::{App, ManualClock, Settings};

fn main() -> sonotate::Result<()> {
    let clock = ManualClock::at_epoch();
    let app = App::builder()
        .settings(Settings { session_ttl: Duration::seconds(60), ..Settings::default() })
        .clock(clock.clone())
        .build()?;
    app.bootstrap_admin("root", "change me please")?;

    let token = app.login("root", "change me please")?;
    println!("issued, expires at {}", token.expires_at);
    clock.advance(Duration::seconds(59));
    println!("t=59s: {:?}", app.verify(&token.token).map(|p| p.role));
    clock.advance(Duration::seconds(2));
    println!("t=61s: {:?}", app.verify(&token.token).map_err(|e| e.code));

    let token = app.login("root", "change me please")?;
    app.logout(&token.token)?;
    println!("after logout: {:?}", app.verify(&token.token).map_err(|e| e.code));
    println!("wrong password: {}", app.login("root", "guess guess").unwrap_err());
    Ok(())
}
