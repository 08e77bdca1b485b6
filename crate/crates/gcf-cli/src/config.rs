use std::path::Path;

use anyhow::{Context, Result};
use gcf_core::FlowConfig;

/// Read and validate a run configuration. Unknown keys are rejected and
/// validation errors name the offending field.
pub fn parse_config(path: &Path) -> Result<FlowConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: FlowConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    config
        .validate()
        .with_context(|| format!("validating config {}", path.display()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gcf_core::FlowKind;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults_are_filled() {
        let f = write_temp(
            r#"{"n":2,"flow":"primal","initial":{"kind":"ball","radius":1},"resolution":[256]}"#,
        );
        let c = parse_config(f.path()).unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.flow, FlowKind::Primal);
        assert_eq!(c.cfl_factor, 0.25);
        assert_eq!(c.stop_threshold, 0.05);
        assert_eq!(c.snapshot_every, 50);
        assert!(c.recentre);
        assert!(!c.normalize);
    }

    #[test]
    fn missing_n_is_named() {
        let f = write_temp(r#"{"flow":"primal","initial":{"kind":"ball","radius":1},"resolution":[64]}"#);
        let err = parse_config(f.path()).unwrap_err();
        assert!(format!("{err:#}").contains("`n`"), "{err:#}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let f = write_temp(
            r#"{"n":2,"flow":"primal","initial":{"kind":"ball","radius":1},"resolution":[64],"bogus":1}"#,
        );
        let err = parse_config(f.path()).unwrap_err();
        assert!(format!("{err:#}").contains("bogus"), "{err:#}");
    }

    #[test]
    fn field_constraints_are_reported() {
        let f = write_temp(
            r#"{"n":2,"flow":"primal","initial":{"kind":"ball","radius":1},"resolution":[64],"cfl_factor":1.5}"#,
        );
        let err = parse_config(f.path()).unwrap_err();
        assert!(format!("{err:#}").contains("cfl_factor"), "{err:#}");
    }
}
