use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;

/// Serve the session API.
#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for session logs; sessions found there are recovered at start.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let state = nlrobot_server::AppState::new(args.data_dir);
    match state.recover_all() {
        Ok(0) => {}
        Ok(n) => eprintln!("recovered {n} session(s)"),
        Err(e) => {
            eprintln!("recovery failed: {e}");
            std::process::exit(1);
        }
    }
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, nlrobot_server::router(state)).await
}
