use std::time::Duration;

use crate::error::{Error, Result};

/// Downloads the best-track text. The body is returned as-is; parsing is
/// left to [`super::parse_hurdat2`].
pub fn fetch_hurdat2(url: &str, timeout: Duration) -> Result<String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(true)
        .build()
        .into();
    let mut response = agent
        .get(url)
        .call()
        .map_err(|e| Error::Fetch(format!("{url}: {e}")))?;
    response
        .body_mut()
        .with_config()
        .limit(512 * 1024 * 1024)
        .read_to_string()
        .map_err(|e| Error::Fetch(format!("{url}: reading body: {e}")))
}
