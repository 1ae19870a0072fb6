use std::path::{Path, PathBuf};

use molcom_core::SystemConfig;

/// System 1 with a sparse enzyme population so simulations finish quickly.
pub fn write_small_config(dir: &Path) -> PathBuf {
    let mut file = SystemConfig::preset("system1").unwrap().to_file();
    file.n_enzyme = 2000.0;
    file.n_emit = 2000.0;
    let path = dir.join("small.toml");
    std::fs::write(&path, file.to_toml_string()).unwrap();
    path
}
