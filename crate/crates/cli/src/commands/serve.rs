use pdt_service::{router_with_static, serve, AppState};

use crate::args::ServeArgs;
use crate::error::{CliError, CliResult};

pub fn run(a: ServeArgs) -> CliResult {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Service(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .map_err(|e| CliError::Service(format!("cannot bind {}: {e}", a.addr)))?;
        let app = router_with_static(AppState::new(), a.static_dir);
        println!("serving on http://{}", listener.local_addr()?);
        serve(listener, app).await.map_err(|e| CliError::Service(e.to_string()))
    })
}
