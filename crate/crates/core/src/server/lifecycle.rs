//! Startup/shutdown composition of the MCP subsystem and user hooks.

use std::sync::Arc;

use async_trait::async_trait;

pub use crate::runtime::BoxError;

/// Something with a start and a stop. Implemented by the MCP transport and
/// by whatever the embedding application wants to run alongside it.
#[async_trait]
pub trait Lifecycle: Send + Sync {
    async fn startup(&self) -> Result<(), BoxError>;
    async fn shutdown(&self) -> Result<(), BoxError>;
}

/// Hooks that do nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHooks;

#[async_trait]
impl Lifecycle for NoHooks {
    async fn startup(&self) -> Result<(), BoxError> {
        Ok(())
    }

    async fn shutdown(&self) -> Result<(), BoxError> {
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LifecycleError {
    #[error("MCP subsystem failed to start: {0}")]
    McpStartup(BoxError),
    #[error("startup hook failed: {0}")]
    UserStartup(BoxError),
    #[error("shutdown hook failed: {0}")]
    UserShutdown(BoxError),
    #[error("MCP subsystem failed to stop: {0}")]
    McpShutdown(BoxError),
}

/// MCP first on the way up, last on the way down.
#[derive(Clone)]
pub struct ComposedLifecycle {
    mcp: Arc<dyn Lifecycle>,
    user: Arc<dyn Lifecycle>,
}

pub fn compose_lifecycle(mcp: Arc<dyn Lifecycle>, user: Arc<dyn Lifecycle>) -> ComposedLifecycle {
    ComposedLifecycle { mcp, user }
}

impl ComposedLifecycle {
    /// On a user startup failure the MCP subsystem is shut down again before
    /// the error is returned.
    pub async fn startup(&self) -> Result<(), LifecycleError> {
        self.mcp.startup().await.map_err(LifecycleError::McpStartup)?;
        if let Err(e) = self.user.startup().await {
            if let Err(stop) = self.mcp.shutdown().await {
                tracing::error!("MCP shutdown after failed startup: {stop}");
            }
            return Err(LifecycleError::UserStartup(e));
        }
        Ok(())
    }

    /// Runs both halves even if the user hook fails; reports the first error.
    pub async fn shutdown(&self) -> Result<(), LifecycleError> {
        let user = self.user.shutdown().await.map_err(LifecycleError::UserShutdown);
        let mcp = self.mcp.shutdown().await.map_err(LifecycleError::McpShutdown);
        user.and(mcp)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;

    struct Recorder {
        name: &'static str,
        log: Arc<Mutex<Vec<String>>>,
        fail_start: bool,
    }

    #[async_trait]
    impl Lifecycle for Recorder {
        async fn startup(&self) -> Result<(), BoxError> {
            if self.fail_start {
                return Err("nope".into());
            }
            self.log.lock().unwrap().push(format!("{}_up", self.name));
            Ok(())
        }

        async fn shutdown(&self) -> Result<(), BoxError> {
            self.log.lock().unwrap().push(format!("{}_down", self.name));
            Ok(())
        }
    }

    fn pair(fail_user: bool) -> (ComposedLifecycle, Arc<Mutex<Vec<String>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        let mcp = Arc::new(Recorder { name: "mcp", log: log.clone(), fail_start: false });
        let user = Arc::new(Recorder { name: "user", log: log.clone(), fail_start: fail_user });
        (compose_lifecycle(mcp, user), log)
    }

    #[tokio::test]
    async fn nested_order() {
        let (lc, log) = pair(false);
        lc.startup().await.unwrap();
        lc.shutdown().await.unwrap();
        assert_eq!(*log.lock().unwrap(), ["mcp_up", "user_up", "user_down", "mcp_down"]);
    }

    #[tokio::test]
    async fn failed_user_startup_unwinds_mcp() {
        let (lc, log) = pair(true);
        let err = lc.startup().await.unwrap_err();
        assert!(matches!(err, LifecycleError::UserStartup(_)));
        assert_eq!(*log.lock().unwrap(), ["mcp_up", "mcp_down"]);
    }
}
