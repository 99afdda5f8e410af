use std::net::{IpAddr, SocketAddr};

use clap::Parser;

/// HTTP API for pedigree carrier probabilities and risk curves.
#[derive(Parser)]
#[command(name = "pedrisk-server", version)]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let addr = SocketAddr::new(args.bind, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, pedrisk_server::app()).await
}
